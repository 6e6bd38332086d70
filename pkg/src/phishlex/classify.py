"""Score hosts with a trained model of either kind."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .dataset import Label
from .features import extract, feature_matrix
from .svm import SvmModel
from .tree import ForestModel
from .url_model import parse_host


@dataclass(frozen=True)
class Verdict:
    host: str
    label: Label
    score: dict[str, Any]


def score_matrix(model, X: np.ndarray) -> tuple[np.ndarray, list[dict[str, Any]]]:
    """Labels and per-row score payloads (forest votes or SVM decision values)."""
    if isinstance(model, ForestModel):
        votes = model.votes(X)
        labels = (votes[:, 1] > votes[:, 0]).astype(np.int64)
        return labels, [{"votes": [int(b), int(m)]} for b, m in votes]
    if isinstance(model, SvmModel):
        values = model.decision_function(X)
        return (values > 0).astype(np.int64), [{"decision_value": float(v)} for v in values]
    raise TypeError(f"unsupported model {type(model).__name__}")


def classify_hosts(model, texts: Sequence[str]) -> list[Verdict]:
    """Normalize, featurize and score raw host/URL strings.

    Raises the url_model errors for unparseable input; callers that stream
    untrusted lines should parse first and skip failures.
    """
    parts = [parse_host(t) for t in texts]
    if not parts:
        return []
    X = feature_matrix([extract(p) for p in parts])
    labels, scores = score_matrix(model, X)
    return [Verdict(p.host, Label(int(lab)), s) for p, lab, s in zip(parts, labels, scores)]
