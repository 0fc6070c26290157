"""
Pure-Python versions of the hot loops in :mod:`mmcoal._ckernels`.

Both modules perform the same floating point operations in the same order
and consume the same pre-drawn random numbers, so they return identical
results. The compiled module is preferred at import time (see
:mod:`mmcoal._backend`).
"""
import math

import numpy as np

KINGMAN = 0
BETA = 1
DIRAC = 2


def coalescent_events(n, family, a, bb, p, p2, logm2, uks, usub, ks_out, children_out):
    """
    Runs the jump chain of a Lambda-n-coalescent from ``n`` singleton
    blocks to the root.

    Block sizes of each merger are drawn by inverting the transition CDF
    with ``uks``; the merged blocks are a uniform subset chosen by a partial
    Fisher-Yates shuffle driven by ``usub``. Node ids ``0..n-1`` are the
    leaves, event ``e`` creates node ``n + e``. Fills ``ks_out`` (merger
    sizes) and ``children_out`` (merged node ids, concatenated) and returns
    the number of events.
    """
    active = list(range(n))
    b = n
    e = 0
    pos = 0
    out = 0
    lpq = math.log(p / (1.0 - p)) if family == DIRAC else 0.0
    while b > 1:
        u = uks[e]
        k = 2
        if family != KINGMAN:
            c = p2[b]
            if family == BETA:
                m = p2[b]
            else:
                lm = logm2[b]
            while u >= c and k < b:
                if family == BETA:
                    m *= (b - k) * (k - 2 + a) / ((k + 1) * (b - k - 1 + bb))
                else:
                    lm += math.log((b - k) / (k + 1.0)) + lpq
                    m = math.exp(lm)
                k += 1
                c += m
        for j in range(k):
            r = j + int(usub[pos] * (b - j))
            pos += 1
            if r >= b:
                r = b - 1
            active[j], active[r] = active[r], active[j]
            children_out[out] = active[j]
            out += 1
        ks_out[e] = k
        nb = b - k + 1
        active[0] = n + e
        src = b - 1
        for j in range(1, min(k, nb)):
            active[j] = active[src]
            src -= 1
        b = nb
        e += 1
    return e


def _best_split(X, y, idx, feats, n_classes, xlogx):
    best_imp = math.inf
    best_f = -1
    best_t = 0.0
    n = len(idx)
    nf = float(n)
    for f in feats:
        xs = X[idx, f]
        order = np.argsort(xs, kind="stable")
        xs = xs[order]
        valid = xs[:-1] < xs[1:]
        if not valid.any():
            continue
        onehot = np.zeros((n, n_classes))
        onehot[np.arange(n), y[idx][order]] = 1.0
        cl = np.cumsum(onehot, axis=0)[:-1]
        cr = cl[-1] + onehot[-1] - cl
        nl = np.arange(1, n, dtype=float)
        nr = nf - nl
        if xlogx is None:
            sl = cl[:, 0] * cl[:, 0]
            sr = cr[:, 0] * cr[:, 0]
            for k in range(1, n_classes):
                sl = sl + cl[:, k] * cl[:, k]
                sr = sr + cr[:, k] * cr[:, k]
            imp = (nl - sl / nl) + (nr - sr / nr)
        else:
            cli, cri = cl.astype(np.int64), cr.astype(np.int64)
            sl = xlogx[cli[:, 0]]
            sr = xlogx[cri[:, 0]]
            for k in range(1, n_classes):
                sl = sl + xlogx[cli[:, k]]
                sr = sr + xlogx[cri[:, k]]
            imp = (xlogx[1:n] - sl) + (xlogx[n - 1 : 0 : -1] - sr)
        imp[~valid] = math.inf
        i = int(np.argmin(imp))
        if imp[i] < best_imp:
            best_imp = float(imp[i])
            best_f = int(f)
            # the largest value sent left, so splits depend only on order
            best_t = float(xs[i])
    return best_f, best_t, best_imp


def xlogx_table(n: int) -> np.ndarray:
    """``c * log(c)`` for ``c = 0..n``, with ``0 log 0 = 0``."""
    c = np.arange(n + 1, dtype=np.float64)
    out = np.zeros(n + 1)
    out[1:] = c[1:] * np.log(c[1:])
    return out


def grow_tree(X, y, rows, perms, mtry, min_node_size, n_classes, criterion=0):
    """
    Grows one classification tree on the (bootstrap) row multiset ``rows``
    by best threshold splits, depth first. ``criterion`` 0 scores splits by
    row-weighted Gini impurity, 1 by row-weighted entropy.

    Node ``i`` draws its candidate features from ``perms[i]``: the first
    ``mtry`` entries, or all remaining ones if none of those admits a split.
    Returns ``(feature, threshold, left, right, value, n_samples,
    impurity_decrease)`` with ``feature == -1`` marking leaves.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    idx_all = np.array(rows, dtype=np.int64)
    n_features = X.shape[1]
    max_nodes = 2 * len(idx_all)
    feature = np.full(max_nodes, -1, dtype=np.int64)
    threshold = np.zeros(max_nodes)
    left = np.full(max_nodes, -1, dtype=np.int64)
    right = np.full(max_nodes, -1, dtype=np.int64)
    value = np.zeros(max_nodes, dtype=np.int64)
    n_samples = np.zeros(max_nodes, dtype=np.int64)
    decrease = np.zeros(max_nodes)
    xlogx = xlogx_table(len(idx_all)) if criterion == 1 else None
    stack = [(0, len(idx_all), 0)]
    n_nodes = 1
    while stack:
        start, end, node = stack.pop()
        idx = idx_all[start:end]
        n = end - start
        counts = np.bincount(y[idx], minlength=n_classes).astype(float)
        n_samples[node] = n
        value[node] = int(np.argmax(counts))
        if n < min_node_size or np.count_nonzero(counts) <= 1:
            continue
        perm = perms[node]
        f, t, imp = _best_split(X, y, idx, np.sort(perm[:mtry]), n_classes, xlogx)
        if f < 0 and mtry < n_features:
            f, t, imp = _best_split(X, y, idx, np.sort(perm[mtry:]), n_classes, xlogx)
        if f < 0:
            continue
        if xlogx is None:
            ssq = 0.0
            for k in range(n_classes):
                ssq += counts[k] * counts[k]
            decrease[node] = (n - ssq / n) - imp
        else:
            ssq = xlogx[int(counts[0])]
            for k in range(1, n_classes):
                ssq = ssq + xlogx[int(counts[k])]
            decrease[node] = (xlogx[n] - ssq) - imp
        goes_left = X[idx, f] <= t
        nl = int(goes_left.sum())
        idx_all[start:end] = np.concatenate([idx[goes_left], idx[~goes_left]])
        feature[node] = f
        threshold[node] = t
        left[node] = n_nodes
        right[node] = n_nodes + 1
        stack.append((start + nl, end, n_nodes + 1))
        stack.append((start, start + nl, n_nodes))
        n_nodes += 2
    return (
        feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes],
        value[:n_nodes], n_samples[:n_nodes], decrease[:n_nodes],
    )
