import numpy as np
import pytest
from hypothesis import given, strategies as st

from phishlex.dataset import SplitConfig, curate
from phishlex.errors import EmptyInput, ExperimentError, LengthMismatch
from phishlex.evaluate import (
    ConfusionMatrix,
    build_report,
    confusion,
    expand_grid,
    format_table,
    precision_recall,
    reports_to_csv,
    run_experiment,
)
from phishlex.svm import SvmParams
from phishlex.tree import ForestParams, TreeParams
from phishlex.url_model import RawEntry, Source


def test_confusion_examples():
    assert confusion([1, 0], [1, 0]) == ConfusionMatrix(tp=1, fp=0, tn=1, fn=0)
    assert confusion([1], [0]).fp == 1
    assert confusion([0] * 4, [1] * 4).fn == 4


def test_confusion_errors():
    with pytest.raises(LengthMismatch):
        confusion([1], [1, 0])
    with pytest.raises(EmptyInput):
        confusion([], [])


@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=50))
def test_confusion_total_and_swap(pairs):
    pred, truth = zip(*pairs)
    m = confusion(pred, truth)
    assert m.total == len(pairs)
    assert m.swapped() == confusion([1 - p for p in pred], [1 - t for t in truth])


def test_precision_recall_worked_example():
    p, r = precision_recall(ConfusionMatrix(tp=5, fp=3, fn=7))
    assert p == 0.625 and abs(r - 5 / 12) <= 1e-12


def test_precision_recall_table_cells():
    p, r = precision_recall(ConfusionMatrix(tp=554, fp=11, tn=489, fn=4))
    assert p == pytest.approx(0.98053, abs=1e-5) and r == pytest.approx(0.99283, abs=1e-5)


def test_undefined_is_not_zero():
    p, r = precision_recall(ConfusionMatrix(tp=0, fp=0, tn=3, fn=2))
    assert p is None and r == 0.0


def test_report_per_class_and_macro():
    rep = build_report("forest", {}, [1, 1, 0, 0], [1, 0, 0, 1])
    assert rep.per_class["Malicious"] == (0.5, 0.5)
    assert rep.per_class["Benign"] == (0.5, 0.5)
    assert rep.macro_precision == 0.5 and rep.test_size == 4


def test_undefined_printed():
    rep = build_report("svm", {"c": 1.0}, [0, 0], [0, 1])
    assert "undefined" in format_table([rep])
    assert "undefined" in reports_to_csv([rep])
    assert rep.macro_precision is None


def test_grid_enumeration():
    grid = expand_grid(ForestParams(), n_estimators=[1, 10, 20, 50], max_depth=[None, 20, 10, 5, 3])
    assert len(grid) == 20
    assert [(g.n_estimators, g.tree.max_depth) for g in grid[:6]] == [
        (1, None), (1, 20), (1, 10), (1, 5), (1, 3), (10, None)
    ]


def _toy_dataset():
    rng = np.random.default_rng(0)
    words = ["alpha", "beta", "gamma", "delta", "echo", "kilo", "lima", "mike", "oscar", "papa"]
    benign = [f"{a}{b}.com" for a in words for b in words[:3]]
    malicious = [f"{a}-{rng.integers(1000, 99999)}-x{b}.login.xyz" for a in words for b in range(3)]
    return curate(
        [RawEntry(h, Source.ALLOWLIST) for h in benign],
        [RawEntry(h, Source.BLOCKLIST) for h in malicious],
    )


def test_run_experiment_single_and_shared_split():
    ds = _toy_dataset()
    reports = run_experiment(ds, [ForestParams(n_estimators=3), SvmParams(c=10)], SplitConfig(seed=1))
    assert [r.algorithm for r in reports] == ["forest", "svm"]
    assert reports[0].test_digest == reports[1].test_digest
    assert reports[0].test_size == len(ds) - len(ds) // 2


def test_run_experiment_parallel_matches_serial():
    ds = _toy_dataset()
    grid = expand_grid(ForestParams(n_estimators=3), max_depth=[1, 2, None])
    a = run_experiment(ds, grid, n_jobs=1)
    b = run_experiment(ds, grid, n_jobs=3)
    assert [r.as_dict() for r in a] == [r.as_dict() for r in b]


def test_run_experiment_wraps_errors(monkeypatch):
    ds = _toy_dataset()

    def boom(*a, **k):
        raise RuntimeError("boom")

    monkeypatch.setattr("phishlex.evaluate.fit_forest", boom)
    with pytest.raises(ExperimentError) as info:
        run_experiment(ds, [ForestParams(tree=TreeParams(max_depth=4))])
    assert info.value.grid_point["max_depth"] == 4
    assert isinstance(info.value.cause, RuntimeError)
    with pytest.raises(EmptyInput):
        run_experiment(ds, [])


def test_weighted_averages():
    # 3 malicious, 1 benign in truth
    rep = build_report("forest", {}, [1, 1, 0, 0], [1, 1, 1, 0])
    mal_p, mal_r = rep.per_class["Malicious"]
    ben_p, ben_r = rep.per_class["Benign"]
    assert rep.weighted_precision == pytest.approx((3 * mal_p + 1 * ben_p) / 4)
    assert rep.weighted_recall == pytest.approx((3 * mal_r + 1 * ben_r) / 4)
    assert rep.weighted_recall == pytest.approx(0.75)  # equals accuracy


def test_perfect_classifier_fixed_point():
    rep = build_report("svm", {}, [1, 0, 1], [1, 0, 1])
    assert rep.precision == rep.recall == rep.macro_precision == rep.weighted_recall == 1.0
