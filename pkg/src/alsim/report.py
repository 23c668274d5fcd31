"""Learning-curve and sweep figures rendered next to the CSV outputs."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def plot_learning_curves(curve_rows, path):
    """Mean test accuracy versus label count, one line per strategy with a
    +/- one-standard-deviation band."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    strategies = sorted({row["strategy"] for row in curve_rows})
    for strategy in strategies:
        rows = [r for r in curve_rows if r["strategy"] == strategy]
        rows.sort(key=lambda r: r["label_count"])
        x = [r["label_count"] for r in rows]
        mean = [r["mean_acc"] for r in rows]
        std = [r["std_acc"] for r in rows]
        (line,) = ax.plot(x, mean, "o-", markersize=4, label=strategy)
        ax.fill_between(
            x,
            [m - s for m, s in zip(mean, std)],
            [m + s for m, s in zip(mean, std)],
            alpha=0.15,
            color=line.get_color(),
        )
    ax.set_xlabel("labels acquired")
    ax.set_ylabel("test accuracy")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_sweep(sweep_rows, axis, path):
    """Accuracy offset versus the base configuration, one line per value."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    values = []
    for row in sweep_rows:
        if row["axis_value"] not in values:
            values.append(row["axis_value"])
    for value in values:
        rows = [r for r in sweep_rows if r["axis_value"] == value]
        rows.sort(key=lambda r: r["label_count"])
        ax.plot(
            [r["label_count"] for r in rows],
            [r["offset_vs_base"] for r in rows],
            "o-",
            markersize=4,
            label=f"{axis}={value}",
        )
    ax.axhline(0.0, color="grey", lw=0.8, ls="--")
    ax.set_xlabel("labels acquired")
    ax.set_ylabel("accuracy offset vs base")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
