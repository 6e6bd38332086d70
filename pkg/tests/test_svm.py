import math
import warnings

import numpy as np
import pytest

from phishlex.errors import DimensionMismatch, EmptyDataset, NonConvergence
from phishlex.svm import (
    GAMMA_PRESETS,
    Standardizer,
    SvmModel,
    SvmParams,
    decision_value,
    fit_svm,
    rbf_kernel,
    rbf_matrix,
)

XOR_X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
XOR_Y = np.array([0, 0, 1, 1])


def blobs(seed=0, n=60, sep=1.5, d=4):
    rng = np.random.default_rng(seed)
    y = np.repeat([0, 1], n // 2)
    X = rng.normal(size=(n, d)) + sep * y[:, None]
    return X, y


def test_rbf_kernel_values():
    assert rbf_kernel([1, 2], [1, 2], 0.5) == 1.0
    assert rbf_kernel([0, 0], [1, 0], 1.0) == pytest.approx(math.exp(-1), abs=1e-15)
    assert rbf_kernel([0, 0], [30, -40], 1e-12) == pytest.approx(1.0, abs=1e-8)
    with pytest.raises(DimensionMismatch):
        rbf_kernel([0, 0], [0, 0, 0], 1.0)


def test_rbf_matrix_matches_scalar():
    rng = np.random.default_rng(0)
    A, B = rng.normal(size=(5, 3)), rng.normal(size=(4, 3))
    K = rbf_matrix(A, B, 0.3)
    for i in range(5):
        for j in range(4):
            assert K[i, j] == pytest.approx(rbf_kernel(A[i], B[j], 0.3), abs=1e-12)


def test_presets():
    assert GAMMA_PRESETS["wide"] == 1 / 500 and GAMMA_PRESETS["auto"] == 1 / 21


def test_params_validate():
    for bad in ({"c": 0}, {"gamma": -1}, {"tolerance": 0}, {"max_passes": 0}):
        with pytest.raises(ValueError):
            SvmParams(**bad)


def test_xor_separable():
    m = fit_svm(XOR_X, XOR_Y, SvmParams(c=10, gamma=1.0))
    assert (m.predict(XOR_X) == XOR_Y).all()
    assert m.converged


def test_two_point_classes():
    X = np.array([[0.0, 0.0], [0.1, 0.0], [5.0, 5.0], [5.1, 5.0]])
    y = np.array([0, 0, 1, 1])
    assert (fit_svm(X, y).predict(X) == y).all()


@pytest.mark.parametrize("c", [0.1, 1.0, 10.0])
def test_dual_feasibility_and_kkt(c):
    X, y = blobs(seed=3)
    m = fit_svm(X, y, SvmParams(c=c, gamma=0.25))
    assert abs(float(m.alphas @ m.labels)) <= 1e-6
    assert (m.alphas > 0).all() and (m.alphas <= c).all()
    ys = np.where(y == 1, 1.0, -1.0)
    margins = ys * m.decision_function(X)
    Z = m.standardizer.transform(X)
    tol = 10 * m.params.tolerance
    for z, a in zip(m.support_vectors, m.alphas):
        i = int(np.argmin(((Z - z) ** 2).sum(axis=1)))
        if a < c:
            assert abs(margins[i] - 1) <= tol  # free vectors sit on the margin
        else:
            assert margins[i] <= 1 + tol
    sv_rows = {int(np.argmin(((Z - z) ** 2).sum(axis=1))) for z in m.support_vectors}
    for i in set(range(len(y))) - sv_rows:
        assert margins[i] >= 1 - tol


def test_standardization_invariance():
    X, y = blobs(seed=4)
    k = 8.0
    a = fit_svm(X, y, SvmParams(c=1, gamma=0.2, seed=5))
    b = fit_svm(k * X + 3.0, y, SvmParams(c=1, gamma=0.2, seed=5))
    Z = np.random.default_rng(9).normal(size=(50, X.shape[1]))
    # the two runs see inputs equal up to rounding, so they agree to the solver tolerance
    da, db = a.decision_function(Z), b.decision_function(k * Z + 3.0)
    assert np.abs(da - db).max() <= 10 * a.params.tolerance
    assert (np.sign(da) == np.sign(db)).all()


def test_training_errors_shrink_with_c():
    X, y = blobs(seed=7, n=120, sep=1.0)
    errors = []
    for c in (0.01, 1.0, 100.0):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NonConvergence)
            errors.append(int((fit_svm(X, y, SvmParams(c=c, gamma=0.5)).predict(X) != y).sum()))
    assert errors[0] >= errors[1] >= errors[2]


def test_label_flip_antisymmetry():
    X, y = blobs(seed=2)
    a = fit_svm(X, y, SvmParams(seed=1))
    b = fit_svm(X, 1 - y, SvmParams(seed=1))
    Z = np.random.default_rng(3).normal(size=(40, X.shape[1]))
    assert np.allclose(a.decision_function(Z), -b.decision_function(Z), atol=1e-6)


def test_deterministic():
    X, y = blobs(seed=8)
    Z = np.random.default_rng(0).normal(size=(30, 4))
    a = fit_svm(X, y, SvmParams(seed=4)).decision_function(Z)
    b = fit_svm(X, y, SvmParams(seed=4)).decision_function(Z)
    assert np.abs(a - b).max() <= 1e-9


def test_strong_positive_support_vector():
    X, y = blobs(seed=1, sep=4.0)
    m = fit_svm(X, y)
    far = X[y == 1].mean(axis=0) + 2.0
    assert decision_value(m, far) > 0


def test_zero_support_vectors_gives_bias():
    std = Standardizer(np.zeros(2), np.ones(2))
    m = SvmModel(np.empty((0, 2)), np.empty(0), np.empty(0), -0.25, SvmParams(), std)
    assert decision_value(m, [1.0, 2.0]) == -0.25
    assert m.predict(np.array([[0.0, 0.0]]))[0] == 0


def test_zero_decision_is_benign():
    std = Standardizer(np.zeros(1), np.ones(1))
    m = SvmModel(np.empty((0, 1)), np.empty(0), np.empty(0), 0.0, SvmParams(), std)
    assert m.predict(np.array([[3.0]]))[0] == 0


def test_dimension_mismatch():
    m = fit_svm(XOR_X, XOR_Y, SvmParams(gamma=1.0))
    with pytest.raises(DimensionMismatch):
        m.decision_function(np.zeros((1, 3)))


def test_single_class_rejected():
    with pytest.raises(EmptyDataset):
        fit_svm(XOR_X, np.zeros(4, dtype=int))


def test_non_convergence_flagged():
    X, y = blobs(seed=5, n=80, sep=0.3)
    with pytest.warns(NonConvergence):
        m = fit_svm(X, y, SvmParams(c=1000.0, gamma=5.0, max_passes=1))
    assert not m.converged


def test_constant_feature_standardizer():
    s = Standardizer.fit(np.array([[1.0, 5.0], [3.0, 5.0]]))
    assert s.stddevs.tolist() == [1.0, 1.0]
    assert s.transform(np.array([[2.0, 5.0]])).tolist() == [[0.0, 0.0]]
