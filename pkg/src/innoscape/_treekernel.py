"""Compiled regression-tree and forest builders.

Trees grow greedily on variance impurity. All randomness is counter
based: a tree key seeds the bootstrap stream and a per-node stream, so
the structure of every tree is a pure function of (forest key, tree
index) and is independent of thread count or scheduling order. The pure
Python primitives in `rng` define the reference semantics.

Numeric conventions shared with the reference oracle:
  impurity(node)   = ss/n - mean*mean          (biased variance)
  decrease(split)  = imp - (nl/n)*il - (nr/n)*ir
  threshold        = midpoint of adjacent distinct sorted values
Squares are written as explicit products, never as pow, so both sides
round identically. Ties on decrease keep the first candidate seen, which
is the lowest feature index, then the lowest threshold. A candidate
whose midpoint rounds up to the upper value cannot separate the pair
under `x <= threshold` routing and is skipped, so the realized partition
always equals the scored one.
"""

import numpy as np
from numba import njit, prange

U64 = np.uint64
GAMMA = U64(0x9E3779B97F4A7C15)
_M1 = U64(0xBF58476D1CE4E5B9)
_M2 = U64(0x94D049BB133111EB)


@njit(inline="always")
def _mix64(z):
    z = (z ^ (z >> U64(30))) * _M1
    z = (z ^ (z >> U64(27))) * _M2
    return z ^ (z >> U64(31))


@njit(inline="always")
def _fold(key, index):
    return _mix64(key ^ ((index + U64(1)) * GAMMA))


@njit(inline="always")
def _draw(key, k):
    return _mix64(key + (k + U64(1)) * GAMMA)


@njit(cache=True)
def _build_tree(
    X,
    y,
    tree_key,
    mtry,
    min_split,
    max_depth,
    feature,
    threshold,
    left,
    right,
    value,
    nsamp,
    wdecr,
    boot,
):
    """Grow one tree on a bootstrap sample; return the node count.

    Output arrays are per-tree slabs sized 2n. `feature[i] < 0` marks a
    leaf. `wdecr[i]` is (node_n / n) * decrease, the tree's importance
    ledger. Children are the stable partition under `x <= threshold`.
    """
    n = X.shape[0]
    p = X.shape[1]

    bkey = _fold(tree_key, U64(0))
    for k in range(n):
        boot[k] = np.int32(_draw(bkey, U64(k)) % U64(n))
    nodes_key = _fold(tree_key, U64(1))

    samp = np.empty(n, dtype=np.int32)
    for k in range(n):
        samp[k] = boot[k]
    tmp = np.empty(n, dtype=np.int32)
    xbuf = np.empty(n, dtype=np.float64)
    ybuf = np.empty(n, dtype=np.float64)
    feat_buf = np.empty(p, dtype=np.int64)

    # stack rows: node id, start, end, depth
    stack = np.empty((2 * n + 2, 4), dtype=np.int64)
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n
    stack[0, 3] = 0
    top = 1
    node_count = 1

    while top > 0:
        top -= 1
        node = stack[top, 0]
        start = stack[top, 1]
        end = stack[top, 2]
        depth = stack[top, 3]
        ns = end - start

        s = 0.0
        ss = 0.0
        ymin = y[samp[start]]
        ymax = ymin
        for i in range(start, end):
            yi = y[samp[i]]
            s += yi
            ss += yi * yi
            if yi < ymin:
                ymin = yi
            if yi > ymax:
                ymax = yi
        mean = s / ns
        imp = ss / ns - mean * mean

        nsamp[node] = np.int32(ns)
        value[node] = mean
        feature[node] = -1
        threshold[node] = 0.0
        left[node] = -1
        right[node] = -1
        wdecr[node] = 0.0

        if ns < min_split or ymin == ymax:
            continue
        if max_depth >= 0 and depth >= max_depth:
            continue

        node_key = _fold(nodes_key, U64(node))
        for j in range(p):
            feat_buf[j] = j
        for i in range(mtry):
            j = i + np.int64(_draw(node_key, U64(i)) % U64(p - i))
            t = feat_buf[i]
            feat_buf[i] = feat_buf[j]
            feat_buf[j] = t
        for i in range(1, mtry):
            v = feat_buf[i]
            j = i - 1
            while j >= 0 and feat_buf[j] > v:
                feat_buf[j + 1] = feat_buf[j]
                j -= 1
            feat_buf[j + 1] = v

        best_d = 0.0
        best_feat = -1
        best_thr = 0.0
        best_nl = 0

        for fi in range(mtry):
            f = feat_buf[fi]
            for i in range(ns):
                xbuf[i] = X[samp[start + i], f]
            order = np.argsort(xbuf[:ns], kind="mergesort")
            for i in range(ns):
                ybuf[i] = y[samp[start + order[i]]]

            sl = 0.0
            ssl = 0.0
            for i in range(ns - 1):
                yi = ybuf[i]
                sl += yi
                ssl += yi * yi
                xa = xbuf[order[i]]
                xb = xbuf[order[i + 1]]
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
                    best_feat = f
                    best_thr = thr
                    best_nl = nl

        if best_feat < 0:
            continue

        li = 0
        for i in range(start, end):
            if X[samp[i], best_feat] <= best_thr:
                tmp[li] = samp[i]
                li += 1
        for i in range(start, end):
            if X[samp[i], best_feat] > best_thr:
                tmp[li] = samp[i]
                li += 1
        for i in range(ns):
            samp[start + i] = tmp[i]
        mid = start + best_nl

        lchild = node_count
        rchild = node_count + 1
        node_count += 2
        feature[node] = np.int32(best_feat)
        threshold[node] = best_thr
        left[node] = np.int32(lchild)
        right[node] = np.int32(rchild)
        wdecr[node] = (ns / n) * best_d

        stack[top, 0] = rchild
        stack[top, 1] = mid
        stack[top, 2] = end
        stack[top, 3] = depth + 1
        top += 1
        stack[top, 0] = lchild
        stack[top, 1] = start
        stack[top, 2] = mid
        stack[top, 3] = depth + 1
        top += 1

    return node_count


@njit(cache=True, parallel=True)
def _fit_forest(
    X,
    y,
    forest_key,
    n_trees,
    mtry,
    min_split,
    max_depth,
    feature,
    threshold,
    left,
    right,
    value,
    nsamp,
    wdecr,
    boot,
    node_counts,
):
    """Grow all trees of one forest into preallocated per-tree slabs.

    Each loop iteration touches only its own slab row, so the result is
    identical under any thread count.
    """
    for t in prange(n_trees):
        tree_key = _fold(forest_key, U64(t))
        node_counts[t] = _build_tree(
            X,
            y,
            tree_key,
            mtry,
            min_split,
            max_depth,
            feature[t],
            threshold[t],
            left[t],
            right[t],
            value[t],
            nsamp[t],
            wdecr[t],
            boot[t],
        )


@njit(cache=True)
def _mdi_accumulate(feature, wdecr, node_counts, out):
    """Sum weighted impurity decreases per feature across all trees."""
    n_trees = feature.shape[0]
    for t in range(n_trees):
        for i in range(node_counts[t]):
            f = feature[t, i]
            if f >= 0:
                out[f] += wdecr[t, i]


@njit(cache=True)
def _predict_sum(Xq, feature, threshold, left, right, value, out):
    """Accumulate per-tree leaf values for each query row into `out`."""
    n_trees = feature.shape[0]
    for q in range(Xq.shape[0]):
        acc = 0.0
        for t in range(n_trees):
            node = 0
            while feature[t, node] >= 0:
                if Xq[q, feature[t, node]] <= threshold[t, node]:
                    node = left[t, node]
                else:
                    node = right[t, node]
            acc += value[t, node]
        out[q] = acc
