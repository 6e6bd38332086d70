"""Soft-margin RBF support vector machine trained with Platt's SMO.

Inputs are z-scored with statistics from the training set before any kernel
evaluation. Malicious maps to +1, benign to -1; a decision value of exactly
zero predicts benign.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyDataset, NonConvergence

# named kernel widths; any number or fraction is accepted as well
GAMMA_PRESETS = {
    "auto": 1 / 21,  # 1 / number of features
    "auto-18": 1 / 18,  # same rule for an 18-feature table
    "wide": 1 / 500,
    "wide-x3": 3 / 500,
}

# alphas closer than this to a box bound are snapped onto it
_BOUND_EPS = 1e-8
# relative step below which a pair update counts as no progress
_STEP_EPS = 1e-12


@dataclass(frozen=True)
class SvmParams:
    c: float = 1.0
    gamma: float = 1 / 21
    tolerance: float = 1e-3
    max_passes: int = 200
    seed: int = 0

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("c must be > 0")
        if not self.gamma > 0:
            raise ValueError("gamma must be > 0")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be > 0")
        if self.max_passes < 1:
            raise ValueError("max_passes must be >= 1")


@dataclass(frozen=True)
class Standardizer:
    means: np.ndarray
    stddevs: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        sd = X.std(axis=0)
        sd[sd == 0] = 1.0
        return cls(X.mean(axis=0), sd)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.means) / self.stddevs


@dataclass(frozen=True)
class SvmModel:
    support_vectors: np.ndarray
    alphas: np.ndarray
    labels: np.ndarray
    bias: float
    params: SvmParams
    standardizer: Standardizer
    converged: bool = True
    sweeps: int = 0

    @property
    def n_features(self) -> int:
        return len(self.standardizer.means)

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got {X.shape[1]}")
        Z = self.standardizer.transform(X)
        if len(self.alphas) == 0:
            return np.full(len(Z), self.bias)
        K = rbf_matrix(Z, self.support_vectors, self.params.gamma)
        return K @ (self.alphas * self.labels) + self.bias

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.decision_function(X) > 0).astype(np.int64)


def rbf_kernel(x, z, gamma: float) -> float:
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if x.shape != z.shape:
        raise DimensionMismatch(f"{x.shape} vs {z.shape}")
    d = x - z
    return math.exp(-gamma * float(d @ d))


def rbf_matrix(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq = (A * A).sum(axis=1)[:, None] + (B * B).sum(axis=1)[None, :] - 2.0 * (A @ B.T)
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


def decision_value(model: SvmModel, x) -> float:
    return float(model.decision_function(np.asarray(x, dtype=float).reshape(1, -1))[0])


class _Smo:
    """Platt's SMO with a full error cache over a precomputed kernel matrix.

    Errors use ``E_i = u_i - y_i`` with ``u_i = sum_j a_j y_j K_ij - b``.
    """

    def __init__(self, K: np.ndarray, y: np.ndarray, params: SvmParams):
        self.K = K
        self.y = y
        self.C = params.c
        self.tol = params.tolerance
        self.rng = np.random.default_rng(params.seed)
        self.n = len(y)
        self.alpha = np.zeros(self.n)
        self.b = 0.0
        self.E = -y.astype(float)

    def take_step(self, i1: int, i2: int) -> bool:
        if i1 == i2:
            return False
        C, K, y = self.C, self.K, self.y
        a1, a2 = self.alpha[i1], self.alpha[i2]
        y1, y2 = y[i1], y[i2]
        E1, E2 = self.E[i1], self.E[i2]
        s = y1 * y2
        if s < 0:
            L, H = max(0.0, a2 - a1), min(C, C + a2 - a1)
        else:
            L, H = max(0.0, a2 + a1 - C), min(C, a2 + a1)
        if H - L <= 0:
            return False
        k11, k12, k22 = K[i1, i1], K[i1, i2], K[i2, i2]
        eta = k11 + k22 - 2.0 * k12
        if eta > 0:
            a2n = min(max(a2 + y2 * (E1 - E2) / eta, L), H)
        else:
            # objective at both box ends
            f1 = y1 * (E1 + self.b) - a1 * k11 - s * a2 * k12
            f2 = y2 * (E2 + self.b) - s * a1 * k12 - a2 * k22
            L1 = a1 + s * (a2 - L)
            H1 = a1 + s * (a2 - H)
            Lobj = L1 * f1 + L * f2 + 0.5 * L1 * L1 * k11 + 0.5 * L * L * k22 + s * L * L1 * k12
            Hobj = H1 * f1 + H * f2 + 0.5 * H1 * H1 * k11 + 0.5 * H * H * k22 + s * H * H1 * k12
            if Lobj < Hobj - _STEP_EPS:
                a2n = L
            elif Lobj > Hobj + _STEP_EPS:
                a2n = H
            else:
                a2n = a2
        if a2n < _BOUND_EPS:
            a2n = 0.0
        elif a2n > C - _BOUND_EPS:
            a2n = C
        if abs(a2n - a2) < _STEP_EPS * (a2n + a2 + _STEP_EPS):
            return False
        a1n = a1 + s * (a2 - a2n)
        # rounding can leave a1 a hair off (or outside) a bound
        if a1n < _BOUND_EPS:
            a1n = 0.0
        elif a1n > C - _BOUND_EPS:
            a1n = C
        d1, d2 = y1 * (a1n - a1), y2 * (a2n - a2)
        b1 = E1 + d1 * k11 + d2 * k12 + self.b
        b2 = E2 + d1 * k12 + d2 * k22 + self.b
        if 0.0 < a1n < C:
            bn = b1
        elif 0.0 < a2n < C:
            bn = b2
        else:
            bn = 0.5 * (b1 + b2)
        self.E += d1 * K[i1] + d2 * K[i2] - (bn - self.b)
        self.b = bn
        self.alpha[i1], self.alpha[i2] = a1n, a2n
        return True

    def examine(self, i2: int) -> bool:
        y2, a2 = self.y[i2], self.alpha[i2]
        E2 = self.E[i2]
        r2 = E2 * y2
        if not ((r2 < -self.tol and a2 < self.C) or (r2 > self.tol and a2 > 0)):
            return False
        nonbound = np.flatnonzero((self.alpha > 0) & (self.alpha < self.C))
        if len(nonbound) > 1:
            i1 = int(nonbound[np.argmax(np.abs(self.E[nonbound] - E2))])
            if self.take_step(i1, i2):
                return True
        if len(nonbound):
            start = int(self.rng.integers(len(nonbound)))
            for i1 in np.roll(nonbound, -start):
                if self.take_step(int(i1), i2):
                    return True
        start = int(self.rng.integers(self.n))
        for k in range(self.n):
            if self.take_step((start + k) % self.n, i2):
                return True
        return False

    def run(self, max_passes: int) -> tuple[bool, int]:
        """Alternate full sweeps with sweeps over the non-bound alphas.

        Only full sweeps count against ``max_passes``; the non-bound sweeps
        between them are capped at ``50 * max_passes`` in total.
        """
        examine_all = True
        changed = 0
        full = inner = 0
        while changed > 0 or examine_all:
            if examine_all:
                if full >= max_passes:
                    return False, full
                full += 1
                changed = sum(self.examine(i) for i in range(self.n))
                examine_all = False
            else:
                if inner >= 50 * max_passes:
                    return False, full
                inner += 1
                idx = np.flatnonzero((self.alpha > 0) & (self.alpha < self.C))
                changed = sum(self.examine(int(i)) for i in idx)
                if changed == 0:
                    examine_all = True
        return True, full


def fit_svm(X: np.ndarray, y: np.ndarray, params: SvmParams = SvmParams()) -> SvmModel:
    """Train on raw features ``X`` and 0/1 labels ``y`` (1 = malicious).

    Optimization stops when a full sweep finds no pair it can improve; if
    ``max_passes`` sweeps are used up first, a :class:`NonConvergence`
    warning is issued and the model is returned with ``converged=False``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if len(y) == 0 or np.all(y == y[0]):
        raise EmptyDataset("SVM training needs both classes present")
    std = Standardizer.fit(X)
    Z = std.transform(X)
    ys = np.where(y == 1, 1.0, -1.0)
    smo = _Smo(rbf_matrix(Z, Z, params.gamma), ys, params)
    converged, sweeps = smo.run(params.max_passes)
    if not converged:
        warnings.warn(
            NonConvergence(f"SMO stopped after {sweeps} full sweeps without meeting tolerance"),
            stacklevel=2,
        )
    keep = smo.alpha > 0
    return SvmModel(
        support_vectors=Z[keep],
        alphas=smo.alpha[keep],
        labels=ys[keep],
        bias=-smo.b,
        params=params,
        standardizer=std,
        converged=converged,
        sweeps=sweeps,
    )
