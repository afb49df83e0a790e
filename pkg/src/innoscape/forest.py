"""Random-forest regression with a seed-averaged importance protocol.

The estimator is a bagged ensemble of CART regression trees grown on
variance impurity. Feature importance is mean decrease in impurity: each
split contributes (node_n / n) * decrease to its feature, contributions
are summed over all trees, divided by the tree count, and normalized to
sum to one. The headline protocol repeats the fit under several derived
seeds and averages the normalized vectors arithmetically.

`best_split` here is the reference implementation of the split search,
in plain Python. The compiled kernel in `_treekernel` mirrors it
expression for expression; tests hold the two together.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _treekernel, rng
from .errors import ConfigError, DimensionMismatchError, TooFewRowsError


@dataclass(frozen=True)
class ForestParams:
    """Training knobs. Defaults are the headline protocol."""

    n_trees: int = 1000
    mtry: int | None = None
    min_samples_split: int = 2
    max_depth: int | None = None
    n_seeds: int = 8

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigError("n_trees must be >= 1")
        if self.mtry is not None and self.mtry < 1:
            raise ConfigError("mtry must be >= 1 when given")
        if self.min_samples_split < 2:
            raise ConfigError("min_samples_split must be >= 2")
        if self.max_depth is not None and self.max_depth < 1:
            raise ConfigError("max_depth must be >= 1 when given")
        if self.n_seeds < 1:
            raise ConfigError("n_seeds must be >= 1")

    def resolved_mtry(self, p: int) -> int:
        """Candidate features per node: ceil(p / 3) unless pinned."""
        if self.mtry is None:
            return max(1, math.ceil(p / 3))
        if self.mtry > p:
            raise ConfigError(f"mtry={self.mtry} exceeds feature count {p}")
        return self.mtry


def best_split(
    X: np.ndarray,
    y: np.ndarray,
    sample_indices: np.ndarray,
    candidate_features: np.ndarray,
) -> tuple[int, float, float] | None:
    """Exhaustive best split over the given samples and features.

    Candidate thresholds are midpoints between consecutive distinct
    sorted values; a midpoint that rounds up to the upper value cannot
    separate the pair and is skipped. Returns (feature, threshold,
    impurity_decrease) for the strictly best candidate, preferring the
    lowest feature index and then the lowest threshold on ties, or None
    when no candidate has a positive decrease.
    """
    idx = np.asarray(sample_indices, dtype=np.int64)
    ns = idx.shape[0]
    if ns < 2:
        return None
    yv = y[idx]
    s = 0.0
    ss = 0.0
    for yi in yv:
        s += yi
        ss += yi * yi
    mean = s / ns
    imp = ss / ns - mean * mean

    best = None
    best_d = 0.0
    for f in sorted(int(f) for f in candidate_features):
        xv = X[idx, f]
        order = np.argsort(xv, kind="mergesort")
        xs = xv[order]
        ys = yv[order]
        sl = 0.0
        ssl = 0.0
        for i in range(ns - 1):
            yi = ys[i]
            sl += yi
            ssl += yi * yi
            xa = xs[i]
            xb = xs[i + 1]
            if xa == xb:
                continue
            thr = (xa + xb) / 2.0
            if thr == xb:
                continue
            nl = i + 1
            nr = ns - nl
            ml = sl / nl
            il = ssl / nl - ml * ml
            sr = s - sl
            ssr = ss - ssl
            mr = sr / nr
            ir = ssr / nr - mr * mr
            d = imp - (nl / ns) * il - (nr / ns) * ir
            if d > best_d:
                best_d = d
                best = (f, thr, d)
    return best


@dataclass(frozen=True)
class SplitNode:
    feature: int
    threshold: float
    n: int
    value: float
    weighted_decrease: float
    left: "SplitNode | LeafNode"
    right: "SplitNode | LeafNode"


@dataclass(frozen=True)
class LeafNode:
    n: int
    value: float


@dataclass
class ForestModel:
    """A fitted forest plus the ledger needed to audit it.

    Per-tree slab arrays hold the node tables; `node_counts[t]` bounds
    the defined range of slab row t. `bootstrap_indices[t]` records the
    exact resample each tree saw.
    """

    params: ForestParams
    forest_key: int
    n_samples: int
    n_features: int
    mtry: int
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    nsamp: np.ndarray
    weighted_decrease: np.ndarray
    bootstrap_indices: np.ndarray
    node_counts: np.ndarray
    # False for single-tree fits, where forest_key is the tree key itself
    keys_folded: bool = True
    _cached_importance: tuple[np.ndarray, bool] | None = field(
        default=None, repr=False, compare=False
    )

    def tree_key(self, t: int) -> int:
        """The 64-bit stream key tree t was built under."""
        if self.keys_folded:
            return rng.fold(self.forest_key, t)
        if t != 0:
            raise IndexError("single-tree model has only tree 0")
        return self.forest_key

    @property
    def n_trees(self) -> int:
        return self.params.n_trees

    def tree_nodes(self, t: int) -> SplitNode | LeafNode:
        """Materialize tree t as an immutable node graph."""

        def build(i: int) -> SplitNode | LeafNode:
            if self.feature[t, i] < 0:
                return LeafNode(int(self.nsamp[t, i]), float(self.value[t, i]))
            return SplitNode(
                int(self.feature[t, i]),
                float(self.threshold[t, i]),
                int(self.nsamp[t, i]),
                float(self.value[t, i]),
                float(self.weighted_decrease[t, i]),
                build(int(self.left[t, i])),
                build(int(self.right[t, i])),
            )

        return build(0)

    def mdi_importance(self) -> tuple[np.ndarray, bool]:
        """Normalized mean decrease in impurity.

        Returns (vector summing to one, degenerate flag). When no split
        anywhere reduced impurity the vector is all zeros and the flag
        is set.
        """
        if self._cached_importance is not None:
            return self._cached_importance
        raw = np.zeros(self.n_features, dtype=np.float64)
        _treekernel._mdi_accumulate(
            self.feature, self.weighted_decrease, self.node_counts, raw
        )
        per_tree = raw / self.params.n_trees
        total = 0.0
        for v in per_tree:
            total += v
        if total == 0.0:
            out = (np.zeros(self.n_features, dtype=np.float64), True)
        else:
            out = (per_tree / total, False)
        self._cached_importance = out
        return out

    def predict(self, Xq: np.ndarray) -> np.ndarray:
        Xq = np.asarray(Xq, dtype=np.float64)
        if Xq.ndim == 1:
            Xq = Xq.reshape(1, -1)
        if Xq.shape[1] != self.n_features:
            raise DimensionMismatchError(
                f"query has {Xq.shape[1]} columns, model expects {self.n_features}"
            )
        out = np.empty(Xq.shape[0], dtype=np.float64)
        _treekernel._predict_sum(
            np.ascontiguousarray(Xq),
            self.feature,
            self.threshold,
            self.left,
            self.right,
            self.value,
            out,
        )
        return out / self.params.n_trees


def _check_training_data(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if X.ndim != 2 or y.ndim != 1:
        raise ValueError("X must be 2-d and y 1-d")
    if X.shape[0] != y.shape[0]:
        raise DimensionMismatchError(
            f"X has {X.shape[0]} rows but y has {y.shape[0]}"
        )
    if X.shape[0] < 2:
        raise TooFewRowsError(f"need at least 2 rows, got {X.shape[0]}")
    if X.shape[1] < 1:
        raise ValueError("X must have at least one column")
    if not np.isfinite(X).all() or not np.isfinite(y).all():
        raise ValueError("training data must be finite")
    return X, y


def fit_forest(
    X: np.ndarray, y: np.ndarray, params: ForestParams, forest_key: int
) -> ForestModel:
    """Fit one forest under a single 64-bit stream key.

    Tree t draws its own key by folding t into `forest_key`; inside a
    tree, stream 0 drives the bootstrap and stream 1 the per-node
    feature subsets. Identical inputs give identical trees under any
    thread count.
    """
    X, y = _check_training_data(X, y)
    n, p = X.shape
    mtry = params.resolved_mtry(p)
    T = params.n_trees
    max_nodes = 2 * n
    feature = np.empty((T, max_nodes), dtype=np.int32)
    threshold = np.empty((T, max_nodes), dtype=np.float64)
    left = np.empty((T, max_nodes), dtype=np.int32)
    right = np.empty((T, max_nodes), dtype=np.int32)
    value = np.empty((T, max_nodes), dtype=np.float64)
    nsamp = np.empty((T, max_nodes), dtype=np.int32)
    wdecr = np.empty((T, max_nodes), dtype=np.float64)
    boot = np.empty((T, n), dtype=np.int32)
    node_counts = np.empty(T, dtype=np.int64)
    depth = -1 if params.max_depth is None else params.max_depth
    _treekernel._fit_forest(
        X,
        y,
        np.uint64(forest_key & rng.MASK64),
        T,
        mtry,
        params.min_samples_split,
        depth,
        feature,
        threshold,
        left,
        right,
        value,
        nsamp,
        wdecr,
        boot,
        node_counts,
    )
    return ForestModel(
        params=params,
        forest_key=forest_key & rng.MASK64,
        n_samples=n,
        n_features=p,
        mtry=mtry,
        feature=feature,
        threshold=threshold,
        left=left,
        right=right,
        value=value,
        nsamp=nsamp,
        weighted_decrease=wdecr,
        bootstrap_indices=boot,
        node_counts=node_counts,
    )


def fit_tree(
    X: np.ndarray, y: np.ndarray, params: ForestParams, tree_key: int
) -> ForestModel:
    """Fit a single tree under its own key (a one-tree forest).

    The key is used directly, not folded, so unit tests can address any
    tree of a larger forest by reproducing its derived key.
    """
    X, y = _check_training_data(X, y)
    n, p = X.shape
    mtry = params.resolved_mtry(p)
    max_nodes = 2 * n
    feature = np.empty((1, max_nodes), dtype=np.int32)
    threshold = np.empty((1, max_nodes), dtype=np.float64)
    left = np.empty((1, max_nodes), dtype=np.int32)
    right = np.empty((1, max_nodes), dtype=np.int32)
    value = np.empty((1, max_nodes), dtype=np.float64)
    nsamp = np.empty((1, max_nodes), dtype=np.int32)
    wdecr = np.empty((1, max_nodes), dtype=np.float64)
    boot = np.empty((1, n), dtype=np.int32)
    depth = -1 if params.max_depth is None else params.max_depth
    count = _treekernel._build_tree(
        np.ascontiguousarray(X),
        y,
        np.uint64(tree_key & rng.MASK64),
        mtry,
        params.min_samples_split,
        depth,
        feature[0],
        threshold[0],
        left[0],
        right[0],
        value[0],
        nsamp[0],
        wdecr[0],
        boot[0],
    )
    one_tree = ForestParams(
        n_trees=1,
        mtry=params.mtry,
        min_samples_split=params.min_samples_split,
        max_depth=params.max_depth,
        n_seeds=params.n_seeds,
    )
    return ForestModel(
        params=one_tree,
        forest_key=tree_key & rng.MASK64,
        n_samples=n,
        n_features=p,
        mtry=mtry,
        feature=feature,
        threshold=threshold,
        left=left,
        right=right,
        value=value,
        nsamp=nsamp,
        weighted_decrease=wdecr,
        bootstrap_indices=boot,
        node_counts=np.array([count], dtype=np.int64),
        keys_folded=False,
    )


@dataclass(frozen=True)
class ImportanceReport:
    """Seed-averaged importance for one outcome on one zone scope."""

    outcome: str
    scope: str
    feature_names: tuple[str, ...]
    master_seed: int
    params: ForestParams
    per_seed: np.ndarray
    degenerate_seeds: tuple[bool, ...]
    mean_importance: np.ndarray
    n_rows: int

    @property
    def degenerate(self) -> bool:
        """True when every seed produced an all-zero vector."""
        return all(self.degenerate_seeds)

    def ranking(self) -> list[tuple[int, str, float]]:
        """(rank, feature, mean importance), descending.

        Ties keep catalog order, i.e. the lower feature index ranks
        first.
        """
        order = sorted(
            range(len(self.feature_names)),
            key=lambda i: (-self.mean_importance[i], i),
        )
        return [
            (r + 1, self.feature_names[i], float(self.mean_importance[i]))
            for r, i in enumerate(order)
        ]

    def as_dict(self) -> dict[str, float]:
        return {
            name: float(v)
            for name, v in zip(self.feature_names, self.mean_importance)
        }


def seed_averaged_importance(
    X: np.ndarray,
    y: np.ndarray,
    feature_names: list[str] | tuple[str, ...],
    params: ForestParams,
    master_seed: int,
    outcome: str = "outcome",
    scope: str = "all",
    keep_models: bool = False,
) -> ImportanceReport | tuple[ImportanceReport, list[ForestModel]]:
    """Run the full protocol: n_seeds forests, averaged importances.

    Seed s trains under forest key fold(master_seed, s). The report mean
    is the arithmetic mean of the per-seed normalized vectors, summed in
    seed order.
    """
    X, y = _check_training_data(X, y)
    if X.shape[1] != len(feature_names):
        raise DimensionMismatchError(
            f"{len(feature_names)} feature names for {X.shape[1]} columns"
        )
    per_seed = np.zeros((params.n_seeds, X.shape[1]), dtype=np.float64)
    degenerate = []
    models = []
    for s in range(params.n_seeds):
        model = fit_forest(X, y, params, rng.fold(master_seed, s))
        vec, is_degenerate = model.mdi_importance()
        per_seed[s] = vec
        degenerate.append(is_degenerate)
        if keep_models:
            models.append(model)
    mean = np.zeros(X.shape[1], dtype=np.float64)
    for s in range(params.n_seeds):
        mean += per_seed[s]
    mean /= params.n_seeds
    report = ImportanceReport(
        outcome=outcome,
        scope=scope,
        feature_names=tuple(feature_names),
        master_seed=master_seed & rng.MASK64,
        params=params,
        per_seed=per_seed,
        degenerate_seeds=tuple(degenerate),
        mean_importance=mean,
        n_rows=X.shape[0],
    )
    if keep_models:
        return report, models
    return report


def importance_detail_text(report: ImportanceReport) -> str:
    """Tab-delimited per-seed detail, features in catalog order."""
    ranks = {name: r for r, name, _ in report.ranking()}
    cols = ["feature", "mean_importance", "rank"]
    cols += [f"seed_{s}" for s in range(report.params.n_seeds)]
    lines = ["\t".join(cols)]
    for i, name in enumerate(report.feature_names):
        row = [name, repr(float(report.mean_importance[i])), str(ranks[name])]
        row += [repr(float(report.per_seed[s, i])) for s in range(report.params.n_seeds)]
        lines.append("\t".join(row))
    return "\n".join(lines) + "\n"


def forest_to_text(model: ForestModel, max_trees: int | None = None) -> str:
    """Human-readable dump of the node tables, for audit diffing."""
    T = model.n_trees if max_trees is None else min(max_trees, model.n_trees)
    lines = [
        f"# forest trees={model.n_trees} n={model.n_samples} "
        f"p={model.n_features} mtry={model.mtry} key={model.forest_key}"
    ]
    for t in range(T):
        lines.append(f"tree {t} nodes={int(model.node_counts[t])}")
        for i in range(int(model.node_counts[t])):
            if model.feature[t, i] < 0:
                lines.append(
                    f"  node {i} leaf n={int(model.nsamp[t, i])} "
                    f"value={model.value[t, i]!r}"
                )
            else:
                lines.append(
                    f"  node {i} split feature={int(model.feature[t, i])} "
                    f"threshold={model.threshold[t, i]!r} "
                    f"left={int(model.left[t, i])} right={int(model.right[t, i])} "
                    f"n={int(model.nsamp[t, i])} "
                    f"wdecr={model.weighted_decrease[t, i]!r}"
                )
    return "\n".join(lines) + "\n"
