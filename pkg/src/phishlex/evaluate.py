"""Confusion matrices, precision/recall and hold-out experiment sweeps.

Malicious is the positive class throughout. A metric whose denominator is
zero is reported as ``None`` ("undefined"), never as 0.
"""

from __future__ import annotations

import csv
import dataclasses
import enum
import hashlib
import io
import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .dataset import LabeledDataset, SplitConfig, split
from .errors import EmptyInput, ExperimentError, LengthMismatch
from .svm import SvmParams, fit_svm
from .tree import ForestParams, TreeParams, fit_forest


class Algorithm(enum.Enum):
    FOREST = "forest"
    SVM = "svm"


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def swapped(self) -> "ConfusionMatrix":
        """The same counts seen with benign as the positive class."""
        return ConfusionMatrix(tp=self.tn, fp=self.fn, tn=self.tp, fn=self.fp)


def confusion(pred: Sequence[int], truth: Sequence[int]) -> ConfusionMatrix:
    if len(pred) != len(truth):
        raise LengthMismatch(f"{len(pred)} predictions vs {len(truth)} labels")
    if len(pred) == 0:
        raise EmptyInput("nothing to evaluate")
    p = np.asarray(pred, dtype=np.int64) == 1
    t = np.asarray(truth, dtype=np.int64) == 1
    return ConfusionMatrix(
        tp=int(np.sum(p & t)),
        fp=int(np.sum(p & ~t)),
        tn=int(np.sum(~p & ~t)),
        fn=int(np.sum(~p & t)),
    )


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


def precision_recall(m: ConfusionMatrix) -> tuple[float | None, float | None]:
    return _ratio(m.tp, m.tp + m.fp), _ratio(m.tp, m.tp + m.fn)


def _mean(values) -> float | None:
    values = list(values)
    if any(v is None for v in values):
        return None
    return sum(values) / len(values)


@dataclass
class EvalReport:
    algorithm: str
    params: dict[str, Any]
    matrix: ConfusionMatrix
    precision: float | None
    recall: float | None
    per_class: dict[str, tuple[float | None, float | None]]
    macro_precision: float | None
    macro_recall: float | None
    weighted_precision: float | None = None
    weighted_recall: float | None = None
    test_size: int = 0
    test_digest: str = ""
    extra: dict[str, Any] = field(default_factory=dict)

    def as_dict(self) -> dict[str, Any]:
        return {
            "algorithm": self.algorithm,
            "params": self.params,
            "matrix": dataclasses.asdict(self.matrix),
            "precision": self.precision,
            "recall": self.recall,
            "per_class": {k: {"precision": p, "recall": r} for k, (p, r) in self.per_class.items()},
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "weighted_precision": self.weighted_precision,
            "weighted_recall": self.weighted_recall,
            "test_size": self.test_size,
            "test_digest": self.test_digest,
            **({"extra": self.extra} if self.extra else {}),
        }


def _weighted(values, weights) -> float | None:
    """Support-weighted mean; classes with no true examples carry no weight."""
    pairs = [(v, w) for v, w in zip(values, weights) if w]
    if any(v is None for v, _ in pairs):
        return None
    return sum(v * w for v, w in pairs) / sum(w for _, w in pairs)


def build_report(algorithm: str, params: dict, pred, truth, test_digest: str = "") -> EvalReport:
    m = confusion(pred, truth)
    mal = precision_recall(m)
    ben = precision_recall(m.swapped())
    support = (m.tp + m.fn, m.tn + m.fp)
    return EvalReport(
        algorithm=algorithm,
        params=params,
        matrix=m,
        precision=mal[0],
        recall=mal[1],
        per_class={"Malicious": mal, "Benign": ben},
        macro_precision=_mean([mal[0], ben[0]]),
        macro_recall=_mean([mal[1], ben[1]]),
        weighted_precision=_weighted([mal[0], ben[0]], support),
        weighted_recall=_weighted([mal[1], ben[1]], support),
        test_size=m.total,
        test_digest=test_digest,
    )


def hosts_digest(ds: LabeledDataset) -> str:
    h = hashlib.sha256()
    for host in ds.hosts:
        h.update(host.encode("utf-8") + b"\n")
    return h.hexdigest()[:16]


# -- parameter grids -------------------------------------------------------------

_TREE_KEYS = {f.name for f in dataclasses.fields(TreeParams)}


def params_as_dict(params) -> dict[str, Any]:
    if isinstance(params, ForestParams):
        d = {k: v for k, v in dataclasses.asdict(params).items() if k != "tree"}
        d.update(dataclasses.asdict(params.tree))
        return d
    return dataclasses.asdict(params)


def with_overrides(base, **overrides):
    """``dataclasses.replace`` that also reaches into a forest's tree params."""
    if isinstance(base, ForestParams):
        tree_kw = {k: v for k, v in overrides.items() if k in _TREE_KEYS}
        top_kw = {k: v for k, v in overrides.items() if k not in _TREE_KEYS}
        return dataclasses.replace(base, tree=dataclasses.replace(base.tree, **tree_kw), **top_kw)
    return dataclasses.replace(base, **overrides)


def expand_grid(base, **axes: Sequence[Any]) -> list:
    """Cartesian product of the axes, last axis varying fastest."""
    names = list(axes)
    return [
        with_overrides(base, **dict(zip(names, combo)))
        for combo in itertools.product(*(axes[n] for n in names))
    ]


def algorithm_of(params) -> Algorithm:
    if isinstance(params, ForestParams):
        return Algorithm.FOREST
    if isinstance(params, SvmParams):
        return Algorithm.SVM
    raise TypeError(f"no algorithm takes {type(params).__name__}")


def train(params, X: np.ndarray, y: np.ndarray, n_jobs: int = 1):
    if algorithm_of(params) is Algorithm.FOREST:
        return fit_forest(X, y, params, n_jobs=n_jobs)
    return fit_svm(X, y, params)


def evaluate_model(model, params, test: LabeledDataset) -> EvalReport:
    X, y = test.arrays()
    return build_report(
        algorithm_of(params).value, params_as_dict(params), model.predict(X), y, hosts_digest(test)
    )


def run_experiment(
    ds: LabeledDataset,
    param_grid: Sequence,
    split_cfg: SplitConfig = SplitConfig(),
    n_jobs: int = 1,
) -> list[EvalReport]:
    """Train and score every grid point on one shared seeded split.

    The algorithm is implied by each grid point's parameter type, so a mixed
    grid compares forest and SVM on the identical test half.
    """
    if not param_grid:
        raise EmptyInput("parameter grid is empty")
    train_ds, test_ds = split(ds, split_cfg)
    Xtr, ytr = train_ds.arrays()

    def one(params):
        try:
            model = train(params, Xtr, ytr)
            return evaluate_model(model, params, test_ds)
        except Exception as exc:
            raise ExperimentError(params_as_dict(params), exc) from exc

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            return list(pool.map(one, param_grid))
    return [one(p) for p in param_grid]


# -- output --------------------------------------------------------------------

REPORT_COLUMNS = (
    "algorithm",
    "params",
    "tp",
    "fp",
    "tn",
    "fn",
    "precision",
    "recall",
    "benign_precision",
    "benign_recall",
    "macro_precision",
    "macro_recall",
    "weighted_precision",
    "weighted_recall",
)


def _fmt(v: float | None, digits: int = 4) -> str:
    return "undefined" if v is None else f"{v:.{digits}f}"


def _params_text(params: dict) -> str:
    return " ".join(f"{k}={'inf' if v is None else v}" for k, v in params.items())


def report_rows(reports: Sequence[EvalReport]) -> list[list[str]]:
    rows = []
    for r in reports:
        m = r.matrix
        bp, br = r.per_class["Benign"]
        rows.append(
            [
                r.algorithm,
                _params_text(r.params),
                str(m.tp),
                str(m.fp),
                str(m.tn),
                str(m.fn),
                _fmt(r.precision),
                _fmt(r.recall),
                _fmt(bp),
                _fmt(br),
                _fmt(r.macro_precision),
                _fmt(r.macro_recall),
                _fmt(r.weighted_precision),
                _fmt(r.weighted_recall),
            ]
        )
    return rows


def reports_to_csv(reports: Sequence[EvalReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    w.writerows(report_rows(reports))
    return buf.getvalue()


def format_table(reports: Sequence[EvalReport]) -> str:
    rows = [list(REPORT_COLUMNS)] + report_rows(reports)
    widths = [max(len(row[i]) for row in rows) for i in range(len(REPORT_COLUMNS))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)
