"""CART decision trees (Gini impurity) and a bagged random forest.

Labels are 0 (benign) / 1 (malicious). Feature ids exposed on decision nodes
are 1-based to line up with the feature table; arrays are indexed 0-based.
Every tie (leaf majority, forest vote) resolves to benign.
"""

from __future__ import annotations

import heapq
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import EmptyDataset, EmptyNode
from .features import FEATURE_NAMES

# minimum impurity decrease that counts as a real split, and the slack used
# when comparing two candidate splits for equality
_MIN_GAIN = 1e-12
_TIE_EPS = 1e-12


def gini(class_counts: Sequence[int]) -> float:
    """Gini impurity ``1 - sum(p_k**2)`` of a node's class counts."""
    total = sum(class_counts)
    if total <= 0:
        raise EmptyNode("gini of an empty node")
    return 1.0 - sum((c / total) ** 2 for c in class_counts)


@dataclass(frozen=True)
class TreeParams:
    max_depth: int | None = None
    max_features: int | None = None
    min_samples_split: int = 2
    max_leaf_nodes: int | None = None

    def __post_init__(self):
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.max_features is not None and self.max_features < 1:
            raise ValueError("max_features must be >= 1")
        if self.max_leaf_nodes is not None and self.max_leaf_nodes < 2:
            raise ValueError("max_leaf_nodes must be >= 2")


@dataclass
class Leaf:
    counts: tuple[int, int]

    @property
    def label(self) -> int:
        return 1 if self.counts[1] > self.counts[0] else 0


@dataclass
class Decision:
    feature_id: int
    threshold: float
    left: "Node"
    right: "Node"
    n_samples: int
    gain: float


Node = Union[Leaf, Decision]


def route(node: Node, x: Sequence[float]) -> Leaf:
    while isinstance(node, Decision):
        node = node.left if x[node.feature_id - 1] <= node.threshold else node.right
    return node


def predict_tree(node: Node, X: np.ndarray) -> np.ndarray:
    """Leaf labels for every row of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    out = np.zeros(len(X), dtype=np.int64)
    stack = [(node, np.arange(len(X)))]
    while stack:
        nd, idx = stack.pop()
        if isinstance(nd, Leaf):
            out[idx] = nd.label
            continue
        go_left = X[idx, nd.feature_id - 1] <= nd.threshold
        stack.append((nd.left, idx[go_left]))
        stack.append((nd.right, idx[~go_left]))
    return out


def tree_depth(node: Node) -> int:
    if isinstance(node, Leaf):
        return 0
    return 1 + max(tree_depth(node.left), tree_depth(node.right))


def iter_nodes(node: Node):
    """Pre-order traversal."""
    stack = [node]
    while stack:
        nd = stack.pop()
        yield nd
        if isinstance(nd, Decision):
            stack.append(nd.right)
            stack.append(nd.left)


# -- split search ------------------------------------------------------------


def _class_counts(y: np.ndarray) -> tuple[int, int]:
    n_mal = int(np.count_nonzero(y))
    return len(y) - n_mal, n_mal


def best_split(X: np.ndarray, y: np.ndarray, candidate_features=None):
    """Best Gini split over the candidate features (1-based feature ids).

    Returns ``(feature_id, threshold, gain)`` with a 1-based feature id, or
    ``None`` when no threshold strictly lowers impurity. Ties go to the
    lowest feature id, then the lowest threshold.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    n = len(y)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if candidate_features is None:
        candidate_features = range(1, X.shape[1] + 1)
    parent = gini(_class_counts(y))
    if parent == 0.0:
        return None

    n_mal = int(np.count_nonzero(y))
    best = None
    best_child = math.inf
    for fid in sorted(candidate_features):
        f = fid - 1
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        boundary = np.flatnonzero(xs[1:] != xs[:-1])
        if boundary.size == 0:
            continue
        mal_left = np.cumsum(y[order])[boundary].astype(float)
        n_left = (boundary + 1).astype(float)
        n_right = n - n_left
        ben_left = n_left - mal_left
        mal_right = n_mal - mal_left
        ben_right = n_right - mal_right
        # n * weighted child gini
        child = (n_left - (ben_left**2 + mal_left**2) / n_left) + (
            n_right - (ben_right**2 + mal_right**2) / n_right
        )
        child /= n
        k = int(np.flatnonzero(child <= child.min() + _TIE_EPS)[0])
        if child[k] < best_child - _TIE_EPS:
            lo, hi = xs[boundary[k]], xs[boundary[k] + 1]
            thr = (lo + hi) / 2.0
            if not lo <= thr < hi:
                thr = lo
            best_child = float(child[k])
            best = (fid, float(thr), parent - best_child)
    if best is None or best[2] <= _MIN_GAIN:
        return None
    return best


# -- tree growth ---------------------------------------------------------------


@dataclass
class _Pending:
    idx: np.ndarray
    depth: int
    counts: tuple[int, int]
    split: tuple | None = None


def fit_tree(X: np.ndarray, y: np.ndarray, params: TreeParams = TreeParams(), rng=None) -> Node:
    """Grow one CART tree.

    Depth-first growth when ``max_leaf_nodes`` is unbounded; otherwise
    best-first by weighted impurity decrease until the leaf budget is spent.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if len(y) == 0:
        raise EmptyNode("cannot fit a tree on zero samples")
    rng = np.random.default_rng(rng)
    n_features = X.shape[1]
    n_root = len(y)

    def candidates():
        k = params.max_features
        if k is None or k >= n_features:
            return range(1, n_features + 1)
        return (rng.choice(n_features, size=k, replace=False) + 1).tolist()

    def evaluate(idx: np.ndarray, depth: int) -> _Pending:
        node = _Pending(idx, depth, _class_counts(y[idx]))
        if (
            min(node.counts) == 0
            or (params.max_depth is not None and depth >= params.max_depth)
            or len(idx) < params.min_samples_split
        ):
            return node
        node.split = best_split(X[idx], y[idx], candidates())
        return node

    def grow(p: _Pending):
        fid, thr, gain = p.split
        go_left = X[p.idx, fid - 1] <= thr
        return Decision(fid, thr, None, None, len(p.idx), gain), p.idx[go_left], p.idx[~go_left]

    root = evaluate(np.arange(n_root), 0)
    if root.split is None:
        return Leaf(root.counts)

    if params.max_leaf_nodes is None:
        top, li, ri = grow(root)
        stack = [(top, "right", ri, 1), (top, "left", li, 1)]
        while stack:
            parent, side, idx, depth = stack.pop()
            p = evaluate(idx, depth)
            if p.split is None:
                setattr(parent, side, Leaf(p.counts))
                continue
            node, li, ri = grow(p)
            setattr(parent, side, node)
            stack.append((node, "right", ri, depth + 1))
            stack.append((node, "left", li, depth + 1))
        return top

    # best-first; heap entries carry a tie-breaking sequence number
    holder = Decision(0, 0.0, None, None, 0, 0.0)
    seq = 0
    heap: list = []
    leaves = 1

    def push(p: _Pending, parent, side):
        nonlocal seq
        if p.split is None:
            setattr(parent, side, Leaf(p.counts))
            return
        weighted = len(p.idx) / n_root * p.split[2]
        heapq.heappush(heap, (-weighted, seq, p, parent, side))
        seq += 1

    push(root, holder, "left")
    while heap:
        _, _, p, parent, side = heapq.heappop(heap)
        if leaves >= params.max_leaf_nodes:
            setattr(parent, side, Leaf(p.counts))
            continue
        node, li, ri = grow(p)
        setattr(parent, side, node)
        leaves += 1
        push(evaluate(li, p.depth + 1), node, "left")
        push(evaluate(ri, p.depth + 1), node, "right")
    return holder.left


# -- forest --------------------------------------------------------------------


@dataclass(frozen=True)
class ForestParams:
    n_estimators: int = 10
    tree: TreeParams = field(default_factory=TreeParams)
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")


@dataclass(frozen=True)
class ForestModel:
    trees: tuple[Node, ...]
    params: ForestParams
    n_features: int = len(FEATURE_NAMES)
    feature_names: tuple[str, ...] = FEATURE_NAMES

    def votes(self, X: np.ndarray) -> np.ndarray:
        """``(n, 2)`` array of (benign, malicious) vote counts."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        mal = np.zeros(len(X), dtype=np.int64)
        for t in self.trees:
            mal += predict_tree(t, X)
        return np.column_stack([len(self.trees) - mal, mal])

    def predict(self, X: np.ndarray) -> np.ndarray:
        v = self.votes(X)
        return (v[:, 1] > v[:, 0]).astype(np.int64)


def _tree_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def fit_forest(X: np.ndarray, y: np.ndarray, params: ForestParams = ForestParams(), n_jobs: int = 1) -> ForestModel:
    """Train ``n_estimators`` trees, each on its own seeded rng stream.

    The per-tree streams depend only on ``(seed, tree index)``, so the result
    is the same for any ``n_jobs``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if len(y) == 0 or np.all(y == y[0]):
        raise EmptyDataset("forest training needs both classes present")
    n = len(y)

    def build(t: int) -> Node:
        rng = _tree_rng(params.seed, t)
        if params.bootstrap:
            idx = rng.integers(0, n, size=n)
            return fit_tree(X[idx], y[idx], params.tree, rng)
        return fit_tree(X, y, params.tree, rng)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = tuple(pool.map(build, range(params.n_estimators)))
    else:
        trees = tuple(build(t) for t in range(params.n_estimators))
    names = FEATURE_NAMES if X.shape[1] == len(FEATURE_NAMES) else tuple(
        f"f{i + 1}" for i in range(X.shape[1])
    )
    return ForestModel(trees, params, X.shape[1], names)


def predict_forest(model: ForestModel, x: Sequence[float]) -> tuple[int, tuple[int, int]]:
    """Majority vote for one vector; returns ``(label, (benign_votes, malicious_votes))``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (model.n_features,):
        raise ValueError(f"expected {model.n_features} features, got shape {x.shape}")
    mal = sum(route(t, x).label for t in model.trees)
    ben = len(model.trees) - mal
    return (1 if mal > ben else 0), (ben, mal)


def feature_importance(model: ForestModel) -> np.ndarray:
    """Mean decrease in impurity per feature, normalized to sum to 1."""
    total = np.zeros(model.n_features)
    for root in model.trees:
        if isinstance(root, Leaf):
            continue
        n_root = root.n_samples
        for nd in iter_nodes(root):
            if isinstance(nd, Decision):
                total[nd.feature_id - 1] += nd.n_samples / n_root * nd.gain
    total /= len(model.trees)
    s = total.sum()
    return total / s if s > 0 else total
