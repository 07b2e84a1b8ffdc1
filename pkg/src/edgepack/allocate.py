"""Allocation step: optimal membership for a fixed set of server sites.

Fractional membership is a transportation problem and is solved exactly as
a min-cost flow. Hard membership is a generalized assignment problem solved
by depth-first branch-and-bound over that same flow relaxation.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _flow
from ._local import improve_kernel
from .model import AccessPoint, Infeasible, Membership, TimeLimitNoIncumbent

INTEGRAL_TOL = 1e-9


@dataclass(frozen=True)
class AllocationResult:
    membership: Membership
    cost: float
    optimal: bool
    gap: Optional[float] = None
    nodes: int = 0


def objective(dist, weights, servers, y) -> float:
    """``sum_i sum_j a_i * d(i, c_j) * y_ij``, summed in a fixed order."""
    d = np.asarray(dist)[:, list(servers)]
    return float(np.sum(np.asarray(weights)[:, None] * d * np.asarray(y)))


class _Problem:
    """Arrays shared by both allocation modes for one set of servers."""

    def __init__(self, dist, aps: Sequence[AccessPoint], servers, lower, upper):
        d = np.asarray(getattr(dist, "values", dist), dtype=float)
        self.servers = [int(s) for s in servers]
        self.n = len(aps)
        self.k = len(self.servers)
        self.w = np.array([ap.workload for ap in aps], dtype=float)
        self.a = np.array([ap.workload + ap.preference for ap in aps], dtype=float)
        self.q = np.array([ap.replication for ap in aps], dtype=float)
        self.lower = float(lower or 0.0)
        self.upper = math.inf if upper is None else float(upper)
        self.d = d[:, self.servers]
        self.pos = np.flatnonzero(self.w > 0)
        self.zero = np.flatnonzero(self.w <= 0)
        wp = self.w[self.pos]
        # unit cost per unit of flow; flow on (i, j) is w_i * y_ij
        self.unit = (self.a[self.pos, None] * self.d[self.pos]) / wp[:, None]
        self.wp = wp
        self.supply = wp * self.q[self.pos]
        self.eps = 1e-12 * max(1.0, float(wp.max()) if len(wp) else 1.0)

    def check_aggregate(self):
        total = float(np.sum(self.w * self.q))
        if self.k * self.lower > total + 1e-9:
            raise Infeasible(
                f"total replicated workload {total:g} is below k*L = {self.k * self.lower:g}"
            )
        if total > self.k * self.upper + 1e-9:
            raise Infeasible(
                f"total replicated workload {total:g} exceeds k*U = {self.k * self.upper:g}"
            )

    def zero_weight_rows(self) -> np.ndarray:
        """Rows for workload-free APs: their q_i nearest servers, no capacity use."""
        y = np.zeros((len(self.zero), self.k))
        for r, i in enumerate(self.zero):
            order = np.argsort(self.d[i], kind="stable")
            rem = self.q[i]
            for j in order:
                if rem <= 0:
                    break
                y[r, j] = min(1.0, rem)
                rem -= y[r, j]
        return y

    def assemble(self, y_pos: np.ndarray) -> np.ndarray:
        y = np.zeros((self.n, self.k))
        y[self.pos] = y_pos
        if len(self.zero):
            y[self.zero] = self.zero_weight_rows()
        return y

    def cost(self, y: np.ndarray) -> float:
        return float(np.sum(self.a[:, None] * self.d * y))


def _flow_to_y(F, wp):
    y = F / wp[:, None]
    np.clip(y, 0.0, 1.0, out=y)
    y[np.abs(y - 1.0) <= 1e-12] = 1.0
    y[y <= 1e-12] = 0.0
    return y


def allocate_fractional(dist, aps, servers, lower=0.0, upper=None) -> AllocationResult:
    """Globally optimal fractional allocation for fixed servers.

    Raises
    ------
    Infeasible
        If no fractional allocation meets the capacity window.
    """
    p = _Problem(dist, aps, servers, lower, upper)
    p.check_aggregate()
    m, k = len(p.pos), p.k
    F = np.zeros((m, k))
    ft = np.zeros(k)
    h = np.zeros(m + k + 1)
    allowed = np.ones((m, k), dtype=np.bool_)
    lo = np.full(k, p.lower)
    up = np.full(k, p.upper)
    _flow.cold_start(p.unit, p.wp, p.supply, allowed, lo, up, F, ft, h, p.eps)
    status = _flow.solve(p.unit, p.wp, p.supply, allowed, lo, up, F, ft, h, p.eps)
    if status != _flow.OPTIMAL:
        raise Infeasible("no flow satisfies the per-server capacity window")
    y = p.assemble(_flow_to_y(F, p.wp))
    return AllocationResult(Membership(y), p.cost(y), optimal=True, gap=0.0)


# ---------------------------------------------------------------------------
# hard membership


@dataclass
class _Node:
    bound: float
    fix: np.ndarray  # int8, -1 free / 0 / 1, over positive-weight APs
    F: np.ndarray
    ft: np.ndarray
    h: np.ndarray
    depth: int


class _BranchAndBound:
    def __init__(self, p: _Problem, time_limit, node_limit, mip_gap):
        self.p = p
        self.deadline = None if time_limit is None else time.perf_counter() + time_limit
        self.node_limit = node_limit
        self.mip_gap = mip_gap
        self.nodes = 0
        self.best_cost = math.inf
        self.best_y = None  # over positive-weight APs
        self.zero_cost = 0.0
        if len(p.zero):
            self.zero_cost = float(
                np.sum(p.a[p.zero, None] * p.d[p.zero] * p.zero_weight_rows())
            )
        self.cap_flat = p.wp[:, None] * p.unit  # cost of a full copy of AP i at j

    def out_of_budget(self) -> bool:
        if self.node_limit is not None and self.nodes >= self.node_limit:
            return True
        return self.deadline is not None and time.perf_counter() > self.deadline

    def relax(self, fix, F, ft, h):
        """Solve the node relaxation in place; returns bound or None if infeasible."""
        p = self.p
        self.nodes += 1
        ones = fix == 1
        allowed = fix == -1
        n_ones = ones.sum(axis=1)
        supply = p.wp * (p.q[p.pos] - n_ones)
        if np.any(supply < -p.eps):
            return None
        supply = np.maximum(supply, 0.0)
        fixed_load = p.wp @ ones
        up = p.upper - fixed_load
        if np.any(up < -1e-9):
            return None
        lo = np.maximum(p.lower - fixed_load, 0.0)
        up = np.maximum(up, 0.0)
        status = _flow.solve(p.unit, p.wp, supply, allowed, lo, up, F, ft, h, p.eps)
        if status != _flow.OPTIMAL:
            return None
        return float(np.sum(self.cap_flat[ones]) + np.sum(p.unit * F)) + self.zero_cost

    def node_y(self, node: _Node) -> np.ndarray:
        y = _flow_to_y(node.F, self.p.wp)
        y[node.fix == 1] = 1.0
        y[node.fix == 0] = 0.0
        return y

    def offer(self, y_pos: np.ndarray):
        """Accept a 0/1 candidate if it is feasible and improves the incumbent."""
        p = self.p
        if np.any(np.abs(y_pos - np.round(y_pos)) > INTEGRAL_TOL):
            return
        y_pos = np.round(y_pos)
        if np.any(np.abs(y_pos.sum(axis=1) - p.q[p.pos]) > INTEGRAL_TOL):
            return
        load = p.wp @ y_pos
        if np.any(load < p.lower - 1e-9) or np.any(load > p.upper + 1e-9):
            return
        cost = float(np.sum(self.cap_flat * y_pos)) + self.zero_cost
        if cost < self.best_cost:
            self.best_cost = cost
            self.best_y = y_pos

    def prune_level(self) -> float:
        if self.best_y is None:
            return math.inf
        slack = max(1e-9 * max(1.0, abs(self.best_cost)), self.mip_gap * abs(self.best_cost))
        return self.best_cost - slack

    def run(self, root: _Node):
        stack = [root]
        while stack:
            if self.out_of_budget():
                return stack
            node = stack.pop()
            if node.bound >= self.prune_level():
                continue
            y = self.node_y(node)
            frac = np.abs(y - 0.5)
            frac[(y <= INTEGRAL_TOL) | (y >= 1 - INTEGRAL_TOL)] = np.inf
            frac[node.fix != -1] = np.inf
            flat = int(np.argmin(frac))
            if not np.isfinite(frac.flat[flat]):
                self.offer(y)
                continue
            i, j = divmod(flat, self.p.k)
            children = []
            for val in (1, 0):
                fix = node.fix.copy()
                fix[i, j] = val
                F, ft, h = node.F.copy(), node.ft.copy(), node.h.copy()
                bound = self.relax(fix, F, ft, h)
                if bound is not None and bound < self.prune_level():
                    children.append(_Node(bound, fix, F, ft, h, node.depth + 1))
            # better bound is explored first; ties keep the y=1 branch first
            children.sort(key=lambda c: -c.bound)
            stack.extend(children)
        return []


def _violation(load, lower, upper):
    return np.maximum(lower - load, 0.0) + np.maximum(load - upper, 0.0)


def round_and_repair(y_frac, w, q, copy_cost, lower, upper, max_rounds=None):
    """Greedy rounding of a fractional allocation followed by local repair.

    Fractional APs are placed in decreasing-workload order on their cheapest
    servers that stay under ``upper``; remaining window violations are then
    removed with single moves and pairwise swaps. Returns a 0/1 matrix or
    ``None`` when repair stalls.
    """
    m, k = y_frac.shape
    y = (y_frac >= 1 - INTEGRAL_TOL).astype(float)
    load = w @ y
    need = np.round(q - y.sum(axis=1)).astype(int)
    order = sorted(np.flatnonzero(need > 0), key=lambda i: (-w[i], i))
    for i in order:
        for _ in range(need[i]):
            cand = np.where(y[i] > 0, np.inf, copy_cost[i])
            fits = load + w[i] <= upper + 1e-9
            pick = np.where(fits, cand, np.inf)
            j = int(np.argmin(pick)) if np.isfinite(pick).any() else int(np.argmin(cand))
            y[i, j] = 1.0
            load[j] += w[i]

    max_rounds = max_rounds or 4 * (m + k)
    for _ in range(max_rounds):
        viol = _violation(load, lower, upper)
        if viol.sum() <= 1e-9:
            return y
        if not (_best_move(y, w, load, copy_cost, lower, upper, viol)
                or _best_swap(y, w, load, copy_cost, lower, upper, viol)):
            return None
    return None


def _best_move(y, w, load, copy_cost, lower, upper, viol):
    rows, cols = np.nonzero(y)
    bad = viol[cols] > 0
    rows, cols = rows[bad], cols[bad]
    if not len(rows):
        return False
    wi = w[rows][:, None]
    src_after = _violation(load[cols] - w[rows], lower, upper)
    dst_after = _violation(load[None, :] + wi, lower, upper)
    gain = (viol[cols] - src_after)[:, None] + (viol[None, :] - dst_after)
    gain[y[rows] > 0] = -np.inf
    best = gain.max()
    if best <= 1e-9:
        return False
    dcost = copy_cost[rows] - copy_cost[rows, cols][:, None]
    score = np.where(gain >= best - 1e-9, dcost, np.inf)
    r, j2 = np.unravel_index(int(np.argmin(score)), score.shape)
    i, j = rows[r], cols[r]
    y[i, j], y[i, j2] = 0.0, 1.0
    load[j] -= w[i]
    load[j2] += w[i]
    return True


def _best_swap(y, w, load, copy_cost, lower, upper, viol):
    rows, cols = np.nonzero(y)
    a_idx = np.flatnonzero(viol[cols] > 0)
    if not len(a_idx):
        return False
    ia, ja = rows[a_idx][:, None], cols[a_idx][:, None]
    ib, jb = rows[None, :], cols[None, :]
    delta = w[ib] - w[ia]  # change of load at ja
    after_a = _violation(load[ja] + delta, lower, upper)
    after_b = _violation(load[jb] - delta, lower, upper)
    gain = viol[ja] - after_a + viol[jb] - after_b
    valid = (ja != jb) & (y[ia, jb] == 0) & (y[ib, ja] == 0)
    gain = np.where(valid, gain, -np.inf)
    best = gain.max()
    if best <= 1e-9:
        return False
    dcost = (copy_cost[ia, jb] + copy_cost[ib, ja]) - (copy_cost[ia, ja] + copy_cost[ib, jb])
    score = np.where(gain >= best - 1e-9, dcost, np.inf)
    r, c = np.unravel_index(int(np.argmin(score)), score.shape)
    i1, j1 = int(rows[a_idx[r]]), int(cols[a_idx[r]])
    i2, j2 = int(rows[c]), int(cols[c])
    y[i1, j1], y[i1, j2] = 0.0, 1.0
    y[i2, j2], y[i2, j1] = 0.0, 1.0
    load[j1] += w[i2] - w[i1]
    load[j2] += w[i1] - w[i2]
    return True


def improve(y, w, copy_cost, lower, upper, max_rounds=200):
    """Feasibility-preserving descent with single moves and pairwise swaps."""
    y = np.ascontiguousarray(y, dtype=float)
    tol = 1e-12 * max(1.0, float(np.abs(copy_cost).max())) if copy_cost.size else 0.0
    improve_kernel(y, np.asarray(w, dtype=float), np.ascontiguousarray(copy_cost, dtype=float),
                   float(lower), float(upper), max_rounds, tol)
    return y


def allocate_hard(
    dist,
    aps,
    servers,
    lower=0.0,
    upper=None,
    time_limit: Optional[float] = 60.0,
    node_limit: Optional[int] = None,
    incumbent: Optional[np.ndarray] = None,
    mip_gap: float = 0.0,
) -> AllocationResult:
    """Optimal 0/1 allocation for fixed servers by branch-and-bound.

    Parameters
    ----------
    time_limit, node_limit
        Budget for this call. When exhausted the best incumbent is returned
        with ``optimal=False`` and a relative gap to the best open bound.
    incumbent
        Optional n x k 0/1 membership used as a starting incumbent (for
        example the previous iteration's allocation, which stays feasible
        when only the server sites move).
    mip_gap
        Relative gap at which a node is considered not worth exploring.

    Raises
    ------
    Infeasible
        If the relaxation, and therefore the integer problem, is infeasible
        or the search tree is exhausted without a feasible point.
    TimeLimitNoIncumbent
        If the budget ran out before any 0/1 allocation was found.
    """
    p = _Problem(dist, aps, servers, lower, upper)
    if np.any(p.q != np.round(p.q)):
        raise ValueError("hard membership needs integer replication counts")
    p.check_aggregate()
    over = np.flatnonzero(p.w > p.upper + 1e-9)
    if len(over):
        raise Infeasible(f"AP workload exceeds U at index {int(over[0])}")
    if np.any(p.q > p.k):
        raise Infeasible("replication exceeds the number of servers")

    m, k = len(p.pos), p.k
    bb = _BranchAndBound(p, time_limit, node_limit, mip_gap)
    fix = np.full((m, k), -1, dtype=np.int8)
    F = np.zeros((m, k))
    ft = np.zeros(k)
    h = np.zeros(m + k + 1)
    lo = np.full(k, p.lower)
    up = np.full(k, p.upper)
    _flow.cold_start(p.unit, p.wp, p.supply, fix == -1, lo, up, F, ft, h, p.eps)
    bound = bb.relax(fix, F, ft, h)
    if bound is None:
        raise Infeasible("capacity window cannot be met even fractionally")
    root = _Node(bound, fix, F, ft, h, 0)
    root_y = bb.node_y(root)

    if incumbent is not None:
        bb.offer(np.asarray(incumbent, dtype=float)[p.pos])
    rounded = round_and_repair(root_y, p.wp, p.q[p.pos], bb.cap_flat, p.lower, p.upper)
    if rounded is not None:
        bb.offer(improve(rounded, p.wp, bb.cap_flat, p.lower, p.upper))
    if bb.best_y is not None and len(bb.best_y):
        bb.offer(improve(bb.best_y.copy(), p.wp, bb.cap_flat, p.lower, p.upper))

    open_nodes = bb.run(root)
    if bb.best_y is None:
        if open_nodes:
            raise TimeLimitNoIncumbent("no 0/1 allocation found within the budget")
        raise Infeasible("no 0/1 allocation meets the capacity window")

    y = p.assemble(bb.best_y)
    cost = p.cost(y)
    if open_nodes:
        lb = min(cost, min(n.bound for n in open_nodes))
        gap = (cost - lb) / max(abs(cost), 1e-12)
        return AllocationResult(Membership(y), cost, optimal=False, gap=gap, nodes=bb.nodes)
    return AllocationResult(Membership(y), cost, optimal=True, gap=0.0, nodes=bb.nodes)
