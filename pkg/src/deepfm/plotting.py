"""Report figures rendered to files with the Agg backend."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path


def loss_curves(curves: dict, path, xlabel="epoch", ylabel="test logloss", title=None) -> Path:
    """``curves`` maps a label to ``(x, y)`` sequences."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, (x, y) in curves.items():
        ax.plot(x, y, marker="o", ms=3, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend()
    return _save(fig, path)


def training_log(records: list[dict], path) -> Path:
    steps = [r["step"] for r in records]
    losses = [r["mean_loss"] for r in records]
    return loss_curves({"train": (steps, losses)}, path, xlabel="step", ylabel="batch logloss")


def sweep_plot(rows: list[dict], axis: str, path) -> Path:
    labels = [str(r["axis_value"]) for r in rows]
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(9, 3.5))
    a1.plot(labels, [r["auc"] for r in rows], marker="o")
    a1.set_ylabel("AUC")
    a2.plot(labels, [r["logloss"] for r in rows], marker="o", color="tab:red")
    a2.set_ylabel("logloss")
    for a in (a1, a2):
        a.set_xlabel(axis)
        a.grid(alpha=0.3)
        a.tick_params(axis="x", labelrotation=30)
    return _save(fig, path)


def ab_plot(rows: list[dict], path) -> Path:
    """Grouped bars per metric and L; popularity bars carry the across-list std."""
    models = [m for m in dict.fromkeys(r["model"] for r in rows) if m != "delta"]
    Ls = sorted({r["L"] for r in rows})
    metrics = ["personalization", "coverage", "popularity_mean"]
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.5))
    width = 0.8 / max(len(models), 1)
    for ax, metric in zip(axes, metrics):
        for i, model in enumerate(models):
            sub = {r["L"]: r for r in rows if r["model"] == model}
            vals = [sub[L][metric] for L in Ls]
            err = None
            if metric == "popularity_mean":
                err = [sub[L]["popularity_var"] ** 0.5 for L in Ls]
            xs = [j + i * width for j in range(len(Ls))]
            ax.bar(xs, vals, width, yerr=err, label=model, capsize=3)
        ax.set_xticks([j + width * (len(models) - 1) / 2 for j in range(len(Ls))])
        ax.set_xticklabels([f"L={L}" for L in Ls])
        ax.set_title(metric.replace("_mean", ""))
    axes[0].legend()
    return _save(fig, path)


def bench_plot(rows: list[dict], path, value="normalized_time") -> Path:
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.bar([r["name"] for r in rows], [r[value] for r in rows])
    ax.set_ylabel(value.replace("_", " "))
    ax.tick_params(axis="x", labelrotation=45)
    return _save(fig, path)
