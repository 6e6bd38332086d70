"""Report figures written to image files (non-interactive backend)."""

from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .evaluate import ConfusionMatrix, EvalReport  # noqa: E402


def importance_chart(names: Sequence[str], importance: Sequence[float], path, title: str = "Feature importance") -> None:
    """Bar chart keyed by feature id (F1..F21); ``names`` label the legend text."""
    importance = np.asarray(importance, dtype=float)
    ids = [f"F{i + 1}" for i in range(len(importance))]
    fig, ax = plt.subplots(figsize=(9, 4))
    ax.bar(ids, importance, color="#4c72b0")
    ax.set_ylabel("mean impurity decrease (normalized)")
    ax.set_title(title)
    ax.tick_params(axis="x", labelrotation=90)
    top = int(np.argmax(importance)) if importance.any() else None
    if top is not None:
        ax.annotate(names[top], (top, importance[top]), ha="center", va="bottom", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def sweep_chart(reports: Sequence[EvalReport], path, title: str = "Hold-out precision / recall") -> None:
    """Malicious-class precision and recall per grid point."""
    n = len(reports)
    x = np.arange(n)
    prec = [np.nan if r.precision is None else r.precision for r in reports]
    rec = [np.nan if r.recall is None else r.recall for r in reports]
    # only label the axes that actually vary across the sweep
    varying = [k for k in _SHOWN if len({repr(r.params.get(k)) for r in reports}) > 1]
    labels = [
        f"{r.algorithm}\n" + "\n".join(f"{k}={_short(r.params.get(k))}" for k in varying if k in r.params)
        for r in reports
    ]
    fig, ax = plt.subplots(figsize=(max(6, 0.7 * n + 2), 4.5))
    ax.plot(x, prec, "o-", label="precision")
    ax.plot(x, rec, "s--", label="recall")
    ax.set_xticks(x)
    ax.set_xticklabels(labels, fontsize=7)
    ax.set_ylim(0, 1.05)
    ax.set_title(title)
    ax.legend()
    ax.grid(alpha=0.3)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


_SHOWN = ("n_estimators", "max_depth", "max_features", "min_samples_split", "max_leaf_nodes", "c", "gamma")


def _short(v) -> str:
    if v is None:
        return "inf"
    return f"{v:.4g}" if isinstance(v, float) else str(v)


def confusion_chart(m: ConfusionMatrix, path, title: str = "Confusion matrix") -> None:
    grid = np.array([[m.tn, m.fp], [m.fn, m.tp]])
    fig, ax = plt.subplots(figsize=(4, 3.6))
    ax.imshow(grid, cmap="Blues")
    for (i, j), v in np.ndenumerate(grid):
        ax.text(j, i, str(v), ha="center", va="center")
    ax.set_xticks([0, 1], ["Predicted Benign", "Predicted Malicious"])
    ax.set_yticks([0, 1], ["Benign", "Malicious"])
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
