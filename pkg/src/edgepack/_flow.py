"""Min-cost flow on the AP -> server -> sink transportation network.

Node layout: APs ``0..n-1``, servers ``n..n+k-1``, sink ``n+k``. Arc
``i -> j`` carries ``F[i, j]`` in ``[0, cap[i]]`` at unit cost
``cost[i, j]``. Server ``j`` must receive between ``lower[j]`` and
``upper[j]``; the lower part is modelled as a node demand and
``ft[j]`` is the flow on ``j -> sink`` above it.

Solved by successive shortest paths with Johnson potentials ``h``
(reduced cost ``c(u, v) + h[u] - h[v] >= 0`` on every residual arc).
Any ``(F, ft, h)`` is accepted as a warm start: arcs whose reduced cost is
negative are saturated first, which restores the invariant at the price of
new node imbalances.
"""

from __future__ import annotations

import numpy as np
from numba import njit

OPTIMAL = 0
INFEASIBLE = 1


@njit(cache=True)
def _push(keys, vals, size, key, val):
    i = size
    keys[i] = key
    vals[i] = val
    while i > 0:
        p = (i - 1) >> 1
        if keys[p] > keys[i] or (keys[p] == keys[i] and vals[p] > vals[i]):
            keys[p], keys[i] = keys[i], keys[p]
            vals[p], vals[i] = vals[i], vals[p]
            i = p
        else:
            break
    return size + 1


@njit(cache=True)
def _pop(keys, vals, size):
    key = keys[0]
    val = vals[0]
    size -= 1
    keys[0] = keys[size]
    vals[0] = vals[size]
    i = 0
    while True:
        left = 2 * i + 1
        if left >= size:
            break
        c = left
        right = left + 1
        if right < size and (
            keys[right] < keys[left] or (keys[right] == keys[left] and vals[right] < vals[left])
        ):
            c = right
        if keys[c] < keys[i] or (keys[c] == keys[i] and vals[c] < vals[i]):
            keys[c], keys[i] = keys[i], keys[c]
            vals[c], vals[i] = vals[i], vals[c]
            i = c
        else:
            break
    return key, val, size


@njit(cache=True)
def _sink_caps(supply, lower, upper):
    k = lower.shape[0]
    big = supply.sum() + 1.0
    capt = np.empty(k)
    for j in range(k):
        if np.isfinite(upper[j]):
            capt[j] = upper[j] - lower[j]
        else:
            capt[j] = big
    return capt


@njit(cache=True)
def cold_start(cost, cap, supply, allowed, lower, upper, F, ft, h, eps):
    """Send every AP's supply to its cheapest allowed servers.

    This is the unconstrained optimum; potentials are chosen so all its
    residual arcs have non-negative reduced cost.
    """
    n, k = cost.shape
    capt = _sink_caps(supply, lower, upper)
    masked = np.empty(k)
    for i in range(n):
        for j in range(k):
            F[i, j] = 0.0
            masked[j] = cost[i, j] if allowed[i, j] else np.inf
        order = np.argsort(masked, kind="mergesort")
        rem = supply[i]
        last = np.inf
        for t in range(k):
            j = order[t]
            if not allowed[i, j]:
                break
            if rem <= eps:
                if last == np.inf:
                    last = cost[i, j]
                break
            amt = min(cap[i], rem)
            F[i, j] = amt
            rem -= amt
            last = cost[i, j]
        h[i] = -last if last != np.inf else 0.0
    for j in range(k):
        x = 0.0
        for i in range(n):
            x += F[i, j]
        v = x - lower[j]
        if v < 0.0:
            v = 0.0
        if v > capt[j]:
            v = capt[j]
        ft[j] = v
        h[n + j] = 0.0
    h[n + k] = 0.0


@njit(cache=True)
def solve(cost, cap, supply, allowed, lower, upper, F, ft, h, eps):
    """Run successive shortest paths in place. Returns OPTIMAL or INFEASIBLE."""
    n, k = cost.shape
    T = n + k
    V = n + k + 1
    S = supply.sum()
    capt = _sink_caps(supply, lower, upper)
    for j in range(k):
        if capt[j] < -eps:
            return INFEASIBLE
        if capt[j] < 0.0:
            capt[j] = 0.0

    # clamp to bounds and saturate arcs that violate reduced-cost optimality
    for i in range(n):
        for j in range(k):
            if not allowed[i, j]:
                F[i, j] = 0.0
                continue
            f = F[i, j]
            if f > cap[i]:
                f = cap[i]
            if f < 0.0:
                f = 0.0
            rc = cost[i, j] + h[i] - h[n + j]
            if rc < 0.0 and f < cap[i]:
                f = cap[i]
            elif rc > 0.0 and f > 0.0:
                f = 0.0
            F[i, j] = f
    for j in range(k):
        f = ft[j]
        if f > capt[j]:
            f = capt[j]
        if f < 0.0:
            f = 0.0
        rc = h[n + j] - h[T]
        if rc < 0.0:
            f = capt[j]
        elif rc > 0.0:
            f = 0.0
        ft[j] = f

    e = np.zeros(V)
    sum_lower = 0.0
    sum_ft = 0.0
    for j in range(k):
        sum_lower += lower[j]
        sum_ft += ft[j]
    for i in range(n):
        out = 0.0
        for j in range(k):
            out += F[i, j]
        e[i] = supply[i] - out
    for j in range(k):
        x = 0.0
        for i in range(n):
            x += F[i, j]
        e[n + j] = x - lower[j] - ft[j]
    e[T] = sum_ft - (S - sum_lower)

    dist = np.empty(V)
    pred = np.empty(V, dtype=np.int64)
    visited = np.empty(V, dtype=np.bool_)
    hsize = n * k + 2 * n + 4 * k + 8
    keys = np.empty(hsize)
    vals = np.empty(hsize, dtype=np.int64)

    while True:
        hs = -np.inf
        for v in range(V):
            if e[v] > eps and h[v] > hs:
                hs = h[v]
        if hs == -np.inf:
            break
        for v in range(V):
            dist[v] = np.inf
            pred[v] = -1
            visited[v] = False
        size = 0
        for v in range(V):
            if e[v] > eps:
                dist[v] = hs - h[v]
                size = _push(keys, vals, size, dist[v], v)

        sink = -1
        D = 0.0
        while size > 0:
            d, u, size = _pop(keys, vals, size)
            if visited[u] or d > dist[u]:
                continue
            visited[u] = True
            if e[u] < -eps:
                sink = u
                D = d
                break
            if u < n:
                for j in range(k):
                    v = n + j
                    if allowed[u, j] and F[u, j] < cap[u] - eps and not visited[v]:
                        rc = cost[u, j] + h[u] - h[v]
                        nd = d + (rc if rc > 0.0 else 0.0)
                        if nd < dist[v]:
                            dist[v] = nd
                            pred[v] = u
                            size = _push(keys, vals, size, nd, v)
            elif u < T:
                j = u - n
                for i in range(n):
                    if F[i, j] > eps and not visited[i]:
                        rc = -cost[i, j] + h[u] - h[i]
                        nd = d + (rc if rc > 0.0 else 0.0)
                        if nd < dist[i]:
                            dist[i] = nd
                            pred[i] = u
                            size = _push(keys, vals, size, nd, i)
                if ft[j] < capt[j] - eps and not visited[T]:
                    rc = h[u] - h[T]
                    nd = d + (rc if rc > 0.0 else 0.0)
                    if nd < dist[T]:
                        dist[T] = nd
                        pred[T] = u
                        size = _push(keys, vals, size, nd, T)
            else:
                for j in range(k):
                    v = n + j
                    if ft[j] > eps and not visited[v]:
                        rc = h[T] - h[v]
                        nd = d + (rc if rc > 0.0 else 0.0)
                        if nd < dist[v]:
                            dist[v] = nd
                            pred[v] = T
                            size = _push(keys, vals, size, nd, v)
        if sink < 0:
            return INFEASIBLE

        for v in range(V):
            dv = dist[v]
            h[v] += dv if dv < D else D

        delta = -e[sink]
        v = sink
        while pred[v] >= 0:
            u = pred[v]
            if u < n:
                r = cap[u] - F[u, v - n]
            elif u < T:
                r = F[v, u - n] if v < n else capt[u - n] - ft[u - n]
            else:
                r = ft[v - n]
            if r < delta:
                delta = r
            v = u
        if e[v] < delta:
            delta = e[v]
        src = v

        v = sink
        while pred[v] >= 0:
            u = pred[v]
            if u < n:
                j = v - n
                F[u, j] += delta
                if cap[u] - F[u, j] <= eps:
                    F[u, j] = cap[u]
            elif u < T:
                j = u - n
                if v < n:
                    F[v, j] -= delta
                    if F[v, j] <= eps:
                        F[v, j] = 0.0
                else:
                    ft[j] += delta
                    if capt[j] - ft[j] <= eps:
                        ft[j] = capt[j]
            else:
                j = v - n
                ft[j] -= delta
                if ft[j] <= eps:
                    ft[j] = 0.0
            v = u
        e[src] -= delta
        e[sink] += delta
    return OPTIMAL
