"""Compiled best-improvement local search for 0/1 allocations."""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def improve_kernel(y, w, cost, lower, upper, max_rounds, tol):
    """Apply the best single move or pairwise swap until none saves more than ``tol``.

    ``y`` is modified in place. Ties follow row-major order over the
    assigned (AP, server) pairs, with moves preferred over swaps.
    """
    m, k = y.shape
    load = np.zeros(k)
    for i in range(m):
        for j in range(k):
            if y[i, j] > 0:
                load[j] += w[i]
    rows = np.empty(m * k, np.int64)
    cols = np.empty(m * k, np.int64)
    for _ in range(max_rounds):
        nnz = 0
        for i in range(m):
            for j in range(k):
                if y[i, j] > 0:
                    rows[nnz] = i
                    cols[nnz] = j
                    nnz += 1
        if nnz == 0:
            return
        best_move = np.inf
        mv_r, mv_j = -1, -1
        for r in range(nnz):
            i, j = rows[r], cols[r]
            if load[j] - w[i] < lower - 1e-9:
                continue
            for j2 in range(k):
                if y[i, j2] != 0 or load[j2] + w[i] > upper + 1e-9:
                    continue
                dc = cost[i, j2] - cost[i, j]
                if dc < best_move:
                    best_move, mv_r, mv_j = dc, r, j2
        best_swap = np.inf
        s1, s2 = -1, -1
        for a in range(nnz):
            ia, ja = rows[a], cols[a]
            for b in range(nnz):
                ib, jb = rows[b], cols[b]
                if ja == jb or y[ia, jb] != 0 or y[ib, ja] != 0:
                    continue
                delta = w[ib] - w[ia]
                la = load[ja] + delta
                lb = load[jb] - delta
                if la < lower - 1e-9 or la > upper + 1e-9:
                    continue
                if lb < lower - 1e-9 or lb > upper + 1e-9:
                    continue
                sc = (cost[ia, jb] + cost[ib, ja]) - (cost[ia, ja] + cost[ib, jb])
                if sc < best_swap:
                    best_swap, s1, s2 = sc, a, b
        if min(best_move, best_swap) >= -tol:
            return
        if best_move <= best_swap:
            i, j = rows[mv_r], cols[mv_r]
            y[i, j] = 0.0
            y[i, mv_j] = 1.0
            load[j] -= w[i]
            load[mv_j] += w[i]
        else:
            i1, j1, i2, j2 = rows[s1], cols[s1], rows[s2], cols[s2]
            y[i1, j1] = 0.0
            y[i1, j2] = 1.0
            y[i2, j2] = 0.0
            y[i2, j1] = 1.0
            load[j1] += w[i2] - w[i1]
            load[j2] += w[i1] - w[i2]
