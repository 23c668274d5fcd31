"""Named, reproducible random substreams derived from a single master seed."""

import hashlib

import numpy as np


def substream(seed, *route):
    """Deterministic 64-bit child seed for the stream named by ``route``.

    Stable across platforms and processes (unlike the builtin ``hash``),
    so every consumer of randomness can be keyed by (seed, purpose, ...).
    """
    digest = hashlib.sha256(repr((int(seed),) + route).encode()).digest()
    return int.from_bytes(digest[:8], "little")


def rng_for(seed, *route):
    """A ``numpy.random.Generator`` seeded from the named substream."""
    return np.random.default_rng(substream(seed, *route))
