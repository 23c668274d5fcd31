import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alsim.acquisition import (
    AccuracyEstimator,
    CalibrationState,
    combine_utilities,
    entropy_rows,
    hypothetical_entropy_utility,
    influence_utility,
    normalized,
    record_prediction_outcome,
    select_next,
    snapshot_entropy,
    surrogate_softmax_entropies,
    surrogate_softmax_entropy,
    update_calibration,
)
from alsim.kernel import KernelParams
from alsim.learner import LearnerSnapshot
from alsim.sparse_gp import SparseSurrogate, build_basis

PARAMS = KernelParams(sigma_x=2.0, sigma_f=2.0, sigma_sq_noise=1e-10)


def make_surrogate(rng, n=40, n_basis=10, n_classes=3, params=PARAMS, scale=3.0):
    X = rng.normal(size=(n, 3)) * scale
    probs = rng.dirichlet(np.ones(n_classes), size=n)
    basis = build_basis(X, n_basis, n_classes, params, input_seed=1, output_seed=2)
    surrogate = SparseSurrogate(X, basis, params)
    surrogate.rebuild(probs, unlabeled=np.arange(n))
    return surrogate, probs


def snapshot_of(probs):
    return LearnerSnapshot(
        probs=probs, entropies=entropy_rows(probs), stage=0
    )


class TestSnapshotEntropy:
    def test_uniform_four_classes(self):
        assert snapshot_entropy([0.25] * 4) == pytest.approx(
            math.log(4.0), abs=1e-12
        )

    def test_one_hot(self):
        assert snapshot_entropy([0.0, 1.0, 0.0]) == 0.0

    def test_half_half(self):
        assert snapshot_entropy([0.5, 0.5, 0.0, 0.0]) == pytest.approx(
            math.log(2.0), abs=1e-12
        )


def influence_bruteforce(surrogate, inserted, candidates):
    """Direct trace-difference evaluation via full matrix inversions."""
    noise = surrogate.params.sigma_sq_noise
    system = surrogate.basis.gram.copy()
    for i in inserted:
        k = surrogate.kernel_rows[i]
        system += np.outer(k, k) / (surrogate.diag_correction[i] + noise)
    system_inv = np.linalg.inv(system)
    unlabeled = surrogate.unlabeled_indices()
    values = []
    for i in candidates:
        k_i = surrogate.kernel_rows[i]
        grown = system + np.outer(k_i, k_i) / (
            surrogate.diag_correction[i] + noise
        )
        grown_inv = np.linalg.inv(grown)
        diff = system_inv - grown_inv
        total = 0.0
        for j in unlabeled:
            k_j = surrogate.kernel_rows[j]
            total += k_j @ diff @ k_j
        values.append(surrogate.n_classes * total)
    return np.asarray(values)


class TestInfluenceUtility:
    def test_nonnegative(self):
        rng = np.random.default_rng(0)
        surrogate, probs = make_surrogate(rng)
        eye = np.eye(3)
        for i in (1, 5):
            surrogate.insert_label(i, eye[0], probs[i])
        values = influence_utility(surrogate, surrogate.unlabeled_indices())
        assert (values >= 0.0).all()

    def test_matches_bruteforce_oracle(self):
        rng = np.random.default_rng(1)
        surrogate, probs = make_surrogate(rng, n=60, n_basis=12, scale=1.0)
        eye = np.eye(3)
        inserted = []
        for i in (2, 9, 33):
            surrogate.insert_label(i, eye[rng.integers(3)], probs[i])
            inserted.append(i)
        candidates = surrogate.unlabeled_indices()
        fast = influence_utility(surrogate, candidates)
        brute = influence_bruteforce(surrogate, inserted, candidates)
        # keep utilities well above the double-inversion noise floor of the
        # oracle itself, so the relative comparison is meaningful
        assert brute.min() > 1e-8
        np.testing.assert_allclose(fast, brute, rtol=1e-8, atol=1e-15)

    def test_remote_candidate_scores_zero(self):
        rng = np.random.default_rng(2)
        surrogate, _ = make_surrogate(rng)
        surrogate.kernel_rows[7] = 0.0  # a point the basis cannot see
        surrogate.diag_correction[7] = 1.0
        values = influence_utility(surrogate, np.array([7]))
        assert values[0] == 0.0


class TestSurrogateSoftmaxEntropy:
    def test_fresh_uniform_prediction(self):
        rng = np.random.default_rng(3)
        surrogate, probs = make_surrogate(rng)
        probs[4] = 1.0 / 3.0
        value = surrogate_softmax_entropy(surrogate, probs, 4)
        assert value == pytest.approx(math.log(3.0), abs=1e-12)

    def test_residual_toward_one_class_lowers_entropy(self):
        rng = np.random.default_rng(4)
        surrogate, probs = make_surrogate(rng)
        probs[6] = 1.0 / 3.0
        before = surrogate_softmax_entropy(surrogate, probs, 6)
        surrogate.insert_label(6, np.eye(3)[1], probs[6])
        after = surrogate_softmax_entropy(surrogate, probs, 6)
        assert after < before

    def test_identical_points_get_identical_values(self):
        rng = np.random.default_rng(5)
        surrogate, probs = make_surrogate(rng)
        surrogate.pool_x[11] = surrogate.pool_x[10]
        probs[11] = probs[10]
        surrogate.rebuild(probs, unlabeled=np.arange(surrogate.n_points))
        a = surrogate_softmax_entropy(surrogate, probs, 10)
        b = surrogate_softmax_entropy(surrogate, probs, 11)
        assert a == b


class TestCalibration:
    def test_anchor_exact_at_retrain(self):
        rng = np.random.default_rng(6)
        surrogate, probs = make_surrogate(rng)
        snap = snapshot_of(probs)
        sur_ent = surrogate_softmax_entropies(
            surrogate, probs, np.arange(surrogate.n_points)
        )
        cal = CalibrationState.at_retrain(snap.entropies, sur_ent)
        np.testing.assert_array_equal(cal.calibrated, snap.entropies)

    def test_unchanged_surrogate_means_unchanged_utility(self):
        rng = np.random.default_rng(7)
        surrogate, probs = make_surrogate(rng)
        snap = snapshot_of(probs)
        sur_ent = surrogate_softmax_entropies(
            surrogate, probs, np.arange(surrogate.n_points)
        )
        cal = CalibrationState.at_retrain(snap.entropies, sur_ent)
        first = update_calibration(cal, surrogate, snap)
        np.testing.assert_array_equal(first, snap.entropies)

    def test_neighbor_utility_drops_after_informative_label(self):
        # two nearby 1-D points; labeling one with a confident class pushes
        # the neighbor's surrogate entropy, and hence its utility, down
        params = KernelParams(sigma_x=1.0, sigma_f=5.0, sigma_sq_noise=1e-10)
        X = np.array([[0.0], [0.2], [5.0], [-5.0]])
        probs = np.full((4, 2), 0.5)
        basis = build_basis(
            X, 4, 2, params, input_seed=0, output_seed=0,
            inputs=X, outputs=probs,
        )
        surrogate = SparseSurrogate(X, basis, params)
        surrogate.rebuild(probs, unlabeled=np.arange(4))
        snap = snapshot_of(probs)
        sur_ent = surrogate_softmax_entropies(surrogate, probs, np.arange(4))
        cal = CalibrationState.at_retrain(snap.entropies, sur_ent)

        surrogate.insert_label(0, np.array([1.0, 0.0]), probs[0])
        updated = update_calibration(cal, surrogate, snap)
        assert updated[1] < snap.entropies[1]

    def test_ratio_bounds_absorb_degenerate_denominators(self):
        rng = np.random.default_rng(8)
        surrogate, probs = make_surrogate(rng)
        snap = snapshot_of(probs)
        cal = CalibrationState.at_retrain(
            snap.entropies, np.zeros(surrogate.n_points)
        )
        updated = update_calibration(cal, surrogate, snap)
        assert np.isfinite(updated).all()
        # the per-step ratio is capped at 10
        assert (updated <= 10.0 * snap.entropies + 1e-12).all()

    def test_values_stay_in_entropy_range(self):
        rng = np.random.default_rng(9)
        surrogate, probs = make_surrogate(rng)
        snap = snapshot_of(probs)
        sur_ent = surrogate_softmax_entropies(
            surrogate, probs, np.arange(surrogate.n_points)
        )
        cal = CalibrationState.at_retrain(snap.entropies, sur_ent)
        eye = np.eye(3)
        for i in range(6):
            surrogate.insert_label(i, eye[i % 3], probs[i])
            values = update_calibration(cal, surrogate, snap)
            assert (values >= 0.0).all()
            assert (values <= math.log(3.0) + 1e-12).all()


class TestHypotheticalEntropyUtility:
    def test_invisible_candidate_scores_zero(self):
        rng = np.random.default_rng(10)
        surrogate, probs = make_surrogate(rng)
        surrogate.kernel_rows[3] = 0.0
        surrogate.diag_correction[3] = 1.0
        snap = snapshot_of(probs)
        assert hypothetical_entropy_utility(surrogate, snap, 3) == 0.0

    def test_single_class_rejected(self):
        rng = np.random.default_rng(11)
        surrogate, _ = make_surrogate(rng)
        snap = snapshot_of(np.ones((surrogate.n_points, 1)))
        with pytest.raises(ValueError, match="single class"):
            hypothetical_entropy_utility(surrogate, snap, 0)

    def test_state_is_untouched(self):
        rng = np.random.default_rng(12)
        surrogate, probs = make_surrogate(rng)
        snap = snapshot_of(probs)
        inv = surrogate.system_inv.copy()
        cross = surrogate.cross_term.copy()
        hypothetical_entropy_utility(surrogate, snap, 5)
        np.testing.assert_array_equal(inv, surrogate.system_inv)
        np.testing.assert_array_equal(cross, surrogate.cross_term)

    def test_mostly_agrees_with_calibrated_entropy_ranking(self):
        # diagnostic on a 100-point instance with a smooth decision boundary:
        # the expensive hypothetical utility's argmax should usually sit in
        # the calibrated utility's top five
        rng = np.random.default_rng(13)
        n = 100
        X = np.sort(rng.uniform(-3.0, 3.0, size=(n, 1)), axis=0)
        logits = np.column_stack([2.0 * X[:, 0], -2.0 * X[:, 0]])
        shifted = np.exp(logits - logits.max(axis=1, keepdims=True))
        probs = shifted / shifted.sum(axis=1, keepdims=True)

        params = KernelParams(sigma_x=0.6, sigma_f=2.0, sigma_sq_noise=1e-10)
        basis = build_basis(X, 16, 2, params, input_seed=1, output_seed=2)
        surrogate = SparseSurrogate(X, basis, params)
        surrogate.rebuild(probs, unlabeled=np.arange(n))
        snap = snapshot_of(probs)
        cal = CalibrationState.at_retrain(
            snap.entropies,
            surrogate_softmax_entropies(surrogate, probs, np.arange(n)),
        )
        eye = np.eye(2)
        agreements = 0
        stages = 10
        for _ in range(stages):
            candidates = surrogate.unlabeled_indices()
            calibrated = update_calibration(cal, surrogate, snap)[candidates]
            hypothetical = np.array(
                [
                    hypothetical_entropy_utility(surrogate, snap, int(i))
                    for i in candidates
                ]
            )
            top5 = candidates[np.argsort(calibrated)[-5:]]
            best = candidates[int(np.argmax(hypothetical))]
            agreements += int(best in top5)
            pick = int(candidates[int(np.argmax(calibrated))])
            surrogate.insert_label(pick, eye[int(X[pick, 0] > 0)], probs[pick])
        assert agreements >= 0.6 * stages


class TestAccuracyEstimator:
    def test_empty_start(self):
        assert AccuracyEstimator().value == 0.0

    def test_three_of_four(self):
        est = AccuracyEstimator()
        for predicted, true in [(0, 0), (1, 1), (2, 0), (1, 1)]:
            record_prediction_outcome(est, predicted, true)
        assert est.value == 0.75

    def test_all_correct_makes_combination_pure_entropy(self):
        est = AccuracyEstimator()
        for _ in range(5):
            record_prediction_outcome(est, 1, 1)
        assert est.value == 1.0
        u1 = np.array([5.0, 1.0, 2.0])
        u2 = np.array([0.1, 0.9, 0.2])
        combined = combine_utilities(u1, u2, est.value)
        np.testing.assert_array_equal(combined, normalized(u2))


class TestCombineUtilities:
    def test_endpoint_zero_is_pure_influence(self):
        u1 = np.array([1.0, 9.0, 3.0])
        u2 = np.array([8.0, 0.5, 2.0])
        combined = combine_utilities(u1, u2, 0.0)
        assert np.argmax(combined) == np.argmax(u1)

    def test_endpoint_one_is_pure_entropy(self):
        u1 = np.array([1.0, 9.0, 3.0])
        u2 = np.array([8.0, 0.5, 2.0])
        combined = combine_utilities(u1, u2, 1.0)
        assert np.argmax(combined) == np.argmax(u2)

    @given(
        st.lists(
            st.integers(0, 1000), min_size=3, max_size=12, unique=True
        ),
        st.floats(1e-3, 1e3),
        st.floats(0.0, 1.0),
    )
    @settings(max_examples=60, deadline=None)
    def test_scaling_influence_leaves_argmax_alone(self, values, scale, accuracy):
        u1 = np.asarray(values, dtype=float)
        rng = np.random.default_rng(len(values))
        u2 = rng.random(len(values))
        base = combine_utilities(u1, u2, accuracy)
        scaled = combine_utilities(scale * u1, u2, accuracy)
        assert np.argmax(base) == np.argmax(scaled)

    def test_constant_vector_normalizes_to_zero(self):
        u1 = np.full(4, 3.3)
        u2 = np.array([0.0, 2.0, 1.0, 0.5])
        combined = combine_utilities(u1, u2, 0.5)
        np.testing.assert_array_equal(combined, 0.5 * normalized(u2))

    def test_uniform_mode(self):
        u1 = np.array([2.0, 0.0])
        u2 = np.array([0.0, 2.0])
        combined = combine_utilities(u1, u2, 0.9, mode="uniform")
        np.testing.assert_allclose(combined, 0.5 * normalized(u1) + 0.5 * normalized(u2))

    def test_unknown_mode(self):
        with pytest.raises(ValueError, match="combination"):
            combine_utilities(np.ones(2), np.ones(2), 0.5, mode="blend")


class TestSelectNext:
    def test_single_candidate(self):
        assert select_next(np.array([0.2]), np.array([9])) == 9

    def test_all_equal_takes_lowest(self):
        assert select_next(np.zeros(4), np.array([7, 3, 12, 5])) == 3

    def test_one_hot_utility(self):
        u = np.zeros(10)
        u[7] = 1.0
        assert select_next(u, np.arange(10)) == 7

    def test_empty_candidates(self):
        with pytest.raises(ValueError, match="no unlabeled"):
            select_next(np.array([]), np.array([], dtype=int))
