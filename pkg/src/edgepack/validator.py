"""Post-hoc constraint checker.

Deliberately self-contained: distances and the objective are recomputed
here from the raw problem data without touching the solver modules.
"""

from __future__ import annotations

import math

import numpy as np

from .model import MembershipMode, Metric, ProblemSpec, Solution

SUM_TOL = 1e-9
OBJ_RTOL = 1e-6


def _site_distance(spec: ProblemSpec, i: int, site: int) -> float:
    if spec.metric is Metric.CUSTOM:
        return float(spec.distances[i][site])
    a, b = spec.aps[i], spec.aps[site]
    sq = (a.x - b.x) ** 2 + (a.y - b.y) ** 2
    return sq if spec.metric is Metric.SQUARED_EUCLIDEAN else math.sqrt(sq)


def check(
    spec: ProblemSpec,
    solution: Solution,
    check_objective: bool = True,
    check_capacity: bool = True,
) -> list[str]:
    """Return every violated constraint; an empty list means the solution is valid."""
    out = []
    n = spec.n
    y = np.asarray(solution.membership.y, dtype=float)
    servers = list(solution.servers)
    k = len(servers)

    if k != spec.k:
        out.append(f"expected {spec.k} servers, found {k}")
    if y.shape != (n, k):
        out.append(f"membership has shape {y.shape}, expected {(n, k)}")
        return out

    sites_ok = True
    for j, c in enumerate(servers):
        if not (isinstance(c, (int, np.integer)) and 0 <= c < n):
            out.append(f"site out of range: server {j} at {c}")
            sites_ok = False

    if np.any(~np.isfinite(y)):
        out.append("membership has non-finite entries")
        return out
    if np.any(y < 0) or np.any(y > 1):
        out.append("y range: entries outside [0, 1]")
    if spec.membership is MembershipMode.HARD:
        if np.any((y != 0) & (y != 1)):
            out.append("y range: hard membership has fractional entries")

    for i, ap in enumerate(spec.aps):
        s = float(y[i].sum())
        if abs(s - ap.replication) > SUM_TOL:
            out.append(f"row sum: AP {ap.id} sums to {s:.12g}, expected {ap.replication:g}")

    if check_capacity:
        w = np.array([ap.workload for ap in spec.aps], dtype=float)
        for j in range(k):
            load = float(np.dot(w, y[:, j]))
            if load < spec.lower - SUM_TOL:
                out.append(f"capacity: server {j} load {load:.12g} below L={spec.lower:g}")
            if spec.upper is not None and load > spec.upper + SUM_TOL:
                out.append(f"capacity: server {j} load {load:.12g} above U={spec.upper:g}")

    if check_objective and sites_ok:
        total = 0.0
        for i, ap in enumerate(spec.aps):
            a = ap.workload + ap.preference
            for j, c in enumerate(servers):
                if y[i, j] != 0:
                    total += a * _site_distance(spec, i, int(c)) * y[i, j]
        if not math.isclose(total, solution.objective, rel_tol=OBJ_RTOL, abs_tol=1e-9):
            out.append(f"objective: reported {solution.objective:.12g}, recomputed {total:.12g}")
    return out
