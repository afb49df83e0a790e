"""Slow, transparent re-derivations of the tree and forest math.

Everything here is written for auditability, not speed: exhaustive
enumeration, recursion over node graphs, and plain accumulation. Tests
compare these results against the compiled implementation; the two
sides share only the documented formulas and the stream primitives in
`rng`, which define the randomness contract.
"""

from __future__ import annotations

import numpy as np

from . import rng
from .forest import ForestModel


def impurity(values: list[float]) -> tuple[float, float]:
    """Return (mean, biased variance) via the shifted-moment formula."""
    n = len(values)
    s = 0.0
    ss = 0.0
    for v in values:
        s += v
        ss += v * v
    mean = s / n
    return mean, ss / n - mean * mean


def enumerate_splits(
    X: np.ndarray, y: np.ndarray, indices: list[int], features: list[int]
) -> list[tuple[int, float, float]]:
    """All admissible (feature, threshold, decrease) candidates.

    Thresholds are midpoints between consecutive distinct sorted values,
    dropping midpoints that round up to the upper value. Candidates are
    listed in (feature, threshold) order.
    """
    ns = len(indices)
    _, imp = impurity([float(y[i]) for i in indices])
    out = []
    for f in sorted(features):
        pairs = sorted(((float(X[i, f]), float(y[i])) for i in indices))
        for cut in range(ns - 1):
            xa = pairs[cut][0]
            xb = pairs[cut + 1][0]
            if xa == xb:
                continue
            thr = (xa + xb) / 2.0
            if thr == xb:
                continue
            left = [yv for xv, yv in pairs if xv <= thr]
            right = [yv for xv, yv in pairs if xv > thr]
            nl = len(left)
            nr = len(right)
            _, il = impurity(left)
            _, ir = impurity(right)
            d = imp - (nl / ns) * il - (nr / ns) * ir
            out.append((f, thr, d))
    return out


def oracle_best_split(
    X: np.ndarray, y: np.ndarray, indices: list[int], features: list[int]
) -> tuple[int, float, float] | None:
    """Best candidate by decrease, ties to lowest feature then threshold.

    Returns None when no candidate has a strictly positive decrease.
    """
    best = None
    for f, thr, d in enumerate_splits(X, y, indices, features):
        if d <= 0.0:
            continue
        if best is None or d > best[2]:
            best = (f, thr, d)
    return best


def replay_bootstrap(tree_key: int, n: int) -> list[int]:
    """The bootstrap index sequence the builder must have drawn."""
    bkey = rng.fold(tree_key, 0)
    return [rng.bounded(rng.draw(bkey, k), n) for k in range(n)]


def replay_candidates(tree_key: int, node_id: int, p: int, mtry: int) -> list[int]:
    """The candidate feature subset for one node of one tree."""
    nodes_key = rng.fold(tree_key, 1)
    return rng.subset_sorted(rng.fold(nodes_key, node_id), p, mtry)


def walk_tree(
    model: ForestModel, t: int, X: np.ndarray, y: np.ndarray
) -> tuple[np.ndarray, list[str]]:
    """Re-derive tree t's importance ledger from its bootstrap sample.

    Routes the recorded bootstrap indices through the recorded splits,
    recomputing node statistics and the weighted decrease at each split
    from scratch. Returns the per-feature decrease sums and a list of
    discrepancy descriptions (empty when the tree is internally
    consistent within 1e-12 on stored floats).
    """
    raw = np.zeros(model.n_features, dtype=np.float64)
    problems: list[str] = []
    n = model.n_samples

    def visit(node: int, samples: list[int]) -> None:
        ns = len(samples)
        mean, imp = impurity([float(y[i]) for i in samples])
        if ns != int(model.nsamp[t, node]):
            problems.append(
                f"tree {t} node {node}: {ns} samples, recorded "
                f"{int(model.nsamp[t, node])}"
            )
        if abs(mean - float(model.value[t, node])) > 1e-12:
            problems.append(f"tree {t} node {node}: mean mismatch")
        f = int(model.feature[t, node])
        if f < 0:
            return
        thr = float(model.threshold[t, node])
        left = [i for i in samples if X[i, f] <= thr]
        right = [i for i in samples if X[i, f] > thr]
        _, il = impurity([float(y[i]) for i in left])
        _, ir = impurity([float(y[i]) for i in right])
        d = imp - (len(left) / ns) * il - (len(right) / ns) * ir
        w = (ns / n) * d
        raw[f] += w
        if abs(w - float(model.weighted_decrease[t, node])) > 1e-12:
            problems.append(f"tree {t} node {node}: weighted decrease mismatch")
        visit(int(model.left[t, node]), left)
        visit(int(model.right[t, node]), right)

    boot = [int(i) for i in model.bootstrap_indices[t]]
    expected = replay_bootstrap(model.tree_key(t), n)
    if boot != expected:
        problems.append(f"tree {t}: bootstrap indices do not replay")
    visit(0, boot)
    return raw, problems


def oracle_forest_mdi(
    model: ForestModel, X: np.ndarray, y: np.ndarray
) -> tuple[np.ndarray, bool, list[str]]:
    """Recompute normalized MDI by walking every tree.

    Applies the documented protocol to the re-derived ledger: sum the
    weighted decreases per feature over all trees, divide by the tree
    count, normalize to unit sum. Also returns accumulated discrepancy
    notes from the walks.
    """
    raw = np.zeros(model.n_features, dtype=np.float64)
    problems: list[str] = []
    for t in range(model.n_trees):
        part, notes = walk_tree(model, t, X, y)
        raw += part
        problems.extend(notes)
    per_tree = raw / model.n_trees
    total = 0.0
    for v in per_tree:
        total += v
    if total == 0.0:
        return np.zeros(model.n_features), True, problems
    return per_tree / total, False, problems


def check_split_choices(
    model: ForestModel, t: int, X: np.ndarray, y: np.ndarray
) -> list[str]:
    """Verify every recorded split is the oracle's choice for its node.

    Replays the candidate feature subset for each node and compares the
    recorded (feature, threshold) against exhaustive enumeration over
    those candidates. Split decisions must match exactly.
    """
    problems: list[str] = []
    tree_key = model.tree_key(t)
    p = model.n_features
    min_split = model.params.min_samples_split
    max_depth = model.params.max_depth

    def visit(node: int, samples: list[int], depth: int) -> None:
        f = int(model.feature[t, node])
        if f < 0:
            # a leaf is legitimate only for one of the stopping reasons
            ys = [float(y[i]) for i in samples]
            if len(samples) < min_split or min(ys) == max(ys):
                return
            if max_depth is not None and depth >= max_depth:
                return
            cands = replay_candidates(tree_key, node, p, model.mtry)
            if oracle_best_split(X, y, samples, cands) is not None:
                problems.append(
                    f"tree {t} node {node}: leaf where oracle splits"
                )
            return
        cands = replay_candidates(tree_key, node, p, model.mtry)
        best = oracle_best_split(X, y, samples, cands)
        thr = float(model.threshold[t, node])
        if best is None:
            problems.append(f"tree {t} node {node}: oracle finds no split")
        elif best[0] != f or best[1] != thr:
            problems.append(
                f"tree {t} node {node}: oracle picks "
                f"({best[0]}, {best[1]!r}), recorded ({f}, {thr!r})"
            )
        left = [i for i in samples if X[i, f] <= thr]
        right = [i for i in samples if X[i, f] > thr]
        visit(int(model.left[t, node]), left, depth + 1)
        visit(int(model.right[t, node]), right, depth + 1)

    visit(0, [int(i) for i in model.bootstrap_indices[t]], 0)
    return problems
