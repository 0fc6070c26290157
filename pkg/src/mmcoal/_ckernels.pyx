# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""
Compiled hot loops: the coalescent jump chain and random forest tree growth.

Arithmetic mirrors :mod:`mmcoal._pykernels` operation by operation so that
both backends give bit-identical output.
"""
import numpy as np
cimport numpy as cnp

from . import _pykernels
from libc.math cimport log, exp, INFINITY
from libc.stdlib cimport malloc, free, qsort

cnp.import_array()

cdef enum:
    KINGMAN = 0
    BETA = 1
    DIRAC = 2


def coalescent_events(long n, int family, double a, double bb, double p,
                      const double[::1] p2, const double[::1] logm2,
                      const double[::1] uks, const double[::1] usub,
                      long[::1] ks_out, long[::1] children_out):
    cdef long *active = <long *> malloc(n * sizeof(long))
    cdef long b = n, e = 0, pos = 0, out = 0, k, j, r, nb, src, tmp, stop
    cdef double u, c, m = 0.0, lm = 0.0, lpq = 0.0
    if active == NULL:
        raise MemoryError()
    if family == DIRAC:
        lpq = log(p / (1.0 - p))
    try:
        for j in range(n):
            active[j] = j
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
                        lm += log((<double> (b - k)) / (k + 1.0)) + lpq
                        m = exp(lm)
                    k += 1
                    c += m
            for j in range(k):
                r = j + <long> (usub[pos] * (b - j))
                pos += 1
                if r >= b:
                    r = b - 1
                tmp = active[j]
                active[j] = active[r]
                active[r] = tmp
                children_out[out] = active[j]
                out += 1
            ks_out[e] = k
            nb = b - k + 1
            active[0] = n + e
            src = b - 1
            stop = k if k < nb else nb
            for j in range(1, stop):
                active[j] = active[src]
                src -= 1
            b = nb
            e += 1
    finally:
        free(active)
    return e


cdef struct Pair:
    double v
    long y


cdef int _cmp_pair(const void *pa, const void *pb) noexcept nogil:
    cdef double x = (<Pair *> pa).v
    cdef double z = (<Pair *> pb).v
    if x < z:
        return -1
    if x > z:
        return 1
    return 0


cdef void _sort_long(long *arr, long n) noexcept nogil:
    cdef long i, j, key
    for i in range(1, n):
        key = arr[i]
        j = i - 1
        while j >= 0 and arr[j] > key:
            arr[j + 1] = arr[j]
            j -= 1
        arr[j + 1] = key


cdef double _best_split(const double[:, ::1] X, const long[::1] y,
                        long *idx, long n, long *feats, long nf, long n_classes,
                        Pair *pairs, double *cl, double *tot, const double *xlogx,
                        long *best_f, double *best_t) noexcept nogil:
    cdef double best_imp = INFINITY, imp, nl, nr, sl, sr, crk, t
    cdef double dn = <double> n
    cdef long fi, f, i, k
    best_f[0] = -1
    for fi in range(nf):
        f = feats[fi]
        for i in range(n):
            pairs[i].v = X[idx[i], f]
            pairs[i].y = y[idx[i]]
        qsort(pairs, n, sizeof(Pair), _cmp_pair)
        for k in range(n_classes):
            cl[k] = 0.0
            tot[k] = 0.0
        for i in range(n):
            tot[pairs[i].y] += 1.0
        for i in range(n - 1):
            cl[pairs[i].y] += 1.0
            if not (pairs[i].v < pairs[i + 1].v):
                continue
            nl = <double> (i + 1)
            nr = dn - nl
            if xlogx == NULL:
                sl = cl[0] * cl[0]
                crk = tot[0] - cl[0]
                sr = crk * crk
                for k in range(1, n_classes):
                    sl = sl + cl[k] * cl[k]
                    crk = tot[k] - cl[k]
                    sr = sr + crk * crk
                imp = (nl - sl / nl) + (nr - sr / nr)
            else:
                sl = xlogx[<long> cl[0]]
                sr = xlogx[<long> (tot[0] - cl[0])]
                for k in range(1, n_classes):
                    sl = sl + xlogx[<long> cl[k]]
                    sr = sr + xlogx[<long> (tot[k] - cl[k])]
                imp = (xlogx[i + 1] - sl) + (xlogx[n - i - 1] - sr)
            if imp < best_imp:
                best_imp = imp
                best_f[0] = f
                # the largest value sent left, so splits depend only on order
                best_t[0] = pairs[i].v
    return best_imp


def grow_tree(X, y, rows, perms, long mtry, long min_node_size, long n_classes, int criterion=0):
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const long[::1] yv = np.ascontiguousarray(y, dtype=np.int64)
    cdef long[::1] idx_all = np.array(rows, dtype=np.int64)
    cdef const long[:, ::1] pv = np.ascontiguousarray(perms, dtype=np.int64)
    cdef long n_rows = idx_all.shape[0]
    cdef long n_features = Xv.shape[1]
    cdef long max_nodes = 2 * n_rows
    feature_a = np.full(max_nodes, -1, dtype=np.int64)
    threshold_a = np.zeros(max_nodes)
    left_a = np.full(max_nodes, -1, dtype=np.int64)
    right_a = np.full(max_nodes, -1, dtype=np.int64)
    value_a = np.zeros(max_nodes, dtype=np.int64)
    nsamp_a = np.zeros(max_nodes, dtype=np.int64)
    decrease_a = np.zeros(max_nodes)
    cdef long[::1] feature = feature_a
    cdef double[::1] threshold = threshold_a
    cdef long[::1] left = left_a
    cdef long[::1] right = right_a
    cdef long[::1] value = value_a
    cdef long[::1] nsamp = nsamp_a
    cdef double[::1] decrease = decrease_a
    cdef const double[::1] table
    cdef const double *xlogx = NULL
    if criterion == 1:
        table = _pykernels.xlogx_table(n_rows)
        xlogx = &table[0]

    cdef long *stack = <long *> malloc(3 * (max_nodes + 1) * sizeof(long))
    cdef Pair *pairs = <Pair *> malloc((n_rows + 1) * sizeof(Pair))
    cdef double *cl = <double *> malloc(n_classes * sizeof(double))
    cdef double *tot = <double *> malloc(n_classes * sizeof(double))
    cdef double *counts = <double *> malloc(n_classes * sizeof(double))
    cdef long *feats = <long *> malloc((n_features + 1) * sizeof(long))
    cdef long *scratch = <long *> malloc((n_rows + 1) * sizeof(long))
    cdef long sp = 0, n_nodes = 1, start, end, node, n, i, k, nz, bestk
    cdef long f, nl, nr_, w
    cdef double t, imp, ssq, dn
    if (stack == NULL or pairs == NULL or cl == NULL or tot == NULL
            or counts == NULL or feats == NULL or scratch == NULL):
        free(stack); free(pairs); free(cl); free(tot); free(counts)
        free(feats); free(scratch)
        raise MemoryError()
    try:
        with nogil:
            stack[0] = 0
            stack[1] = n_rows
            stack[2] = 0
            sp = 1
            while sp > 0:
                sp -= 1
                start = stack[3 * sp]
                end = stack[3 * sp + 1]
                node = stack[3 * sp + 2]
                n = end - start
                for k in range(n_classes):
                    counts[k] = 0.0
                for i in range(start, end):
                    counts[yv[idx_all[i]]] += 1.0
                nz = 0
                bestk = 0
                for k in range(n_classes):
                    if counts[k] > 0:
                        nz += 1
                    if counts[k] > counts[bestk]:
                        bestk = k
                nsamp[node] = n
                value[node] = bestk
                if n < min_node_size or nz <= 1:
                    continue
                for i in range(mtry):
                    feats[i] = pv[node, i]
                _sort_long(feats, mtry)
                imp = _best_split(Xv, yv, &idx_all[start], n, feats, mtry, n_classes,
                                  pairs, cl, tot, xlogx, &f, &t)
                if f < 0 and mtry < n_features:
                    for i in range(n_features - mtry):
                        feats[i] = pv[node, mtry + i]
                    _sort_long(feats, n_features - mtry)
                    imp = _best_split(Xv, yv, &idx_all[start], n, feats,
                                      n_features - mtry, n_classes,
                                      pairs, cl, tot, xlogx, &f, &t)
                if f < 0:
                    continue
                dn = <double> n
                if xlogx == NULL:
                    ssq = 0.0
                    for k in range(n_classes):
                        ssq += counts[k] * counts[k]
                    decrease[node] = (dn - ssq / dn) - imp
                else:
                    ssq = xlogx[<long> counts[0]]
                    for k in range(1, n_classes):
                        ssq = ssq + xlogx[<long> counts[k]]
                    decrease[node] = (xlogx[n] - ssq) - imp
                # stable partition
                nl = 0
                nr_ = 0
                for i in range(start, end):
                    w = idx_all[i]
                    if Xv[w, f] <= t:
                        idx_all[start + nl] = w
                        nl += 1
                    else:
                        scratch[nr_] = w
                        nr_ += 1
                for i in range(nr_):
                    idx_all[start + nl + i] = scratch[i]
                feature[node] = f
                threshold[node] = t
                left[node] = n_nodes
                right[node] = n_nodes + 1
                stack[3 * sp] = start + nl
                stack[3 * sp + 1] = end
                stack[3 * sp + 2] = n_nodes + 1
                sp += 1
                stack[3 * sp] = start
                stack[3 * sp + 1] = start + nl
                stack[3 * sp + 2] = n_nodes
                sp += 1
                n_nodes += 2
    finally:
        free(stack); free(pairs); free(cl); free(tot); free(counts)
        free(feats); free(scratch)
    return (
        feature_a[:n_nodes], threshold_a[:n_nodes], left_a[:n_nodes],
        right_a[:n_nodes], value_a[:n_nodes], nsamp_a[:n_nodes],
        decrease_a[:n_nodes],
    )
