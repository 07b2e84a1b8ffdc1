"""Alternating allocation/location descent with k-means++ restarts."""

from __future__ import annotations

import logging
import math
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from typing import Optional

import numpy as np

from .allocate import allocate_fractional, allocate_hard, objective
from .distance import build_matrix
from .locate import relocate_all
from .model import (
    Infeasible,
    Membership,
    MembershipMode,
    PlacementError,
    ProblemSpec,
    Solution,
    TimeLimitNoIncumbent,
    validate,
)
from .seeding import kmeanspp_init, restart_rng

log = logging.getLogger(__name__)

DECREASE_TOL = 1e-9
STALL_LIMIT = 2


class _Context:
    """Immutable per-solve data shared by all restarts."""

    def __init__(self, spec: ProblemSpec):
        self.spec = spec
        self.d = build_matrix(spec.aps, spec.metric, spec.distances).values
        self.a = spec.weights()
        self.w = spec.workloads()

    def allocate(self, servers, incumbent=None):
        s = self.spec
        if s.membership is MembershipMode.FRACTIONAL:
            return allocate_fractional(self.d, s.aps, servers, s.lower, s.upper)
        return allocate_hard(
            self.d,
            s.aps,
            servers,
            s.lower,
            s.upper,
            time_limit=s.hard_alloc_time_limit,
            node_limit=s.hard_alloc_node_limit,
            incumbent=incumbent,
        )


def _reseed_empty(ctx: _Context, servers: list[int], y: np.ndarray) -> tuple[list[int], int]:
    """Move servers with no workload to the APs costing the most where they are."""
    loads = ctx.w @ y
    empty = [j for j in range(len(servers)) if loads[j] <= 0]
    if not empty:
        return servers, 0
    servers = list(servers)
    contrib = ctx.a * np.sum(ctx.d[:, servers] * y, axis=1)
    contrib[servers] = -np.inf
    for j in empty:
        i = int(np.argmax(contrib))
        if not np.isfinite(contrib[i]):
            break
        servers[j] = i
        contrib[i] = -np.inf
    return servers, len(empty)


def run_restart(ctx: _Context, r: int) -> Solution:
    """One descent from a k-means++ start. Raises on an infeasible first allocation."""
    spec = ctx.spec
    seeding = kmeanspp_init(ctx.d, ctx.a, spec.k, restart_rng(spec.seed, r), spec.weighted_seeding)
    servers = list(seeding.indices)
    notes = []
    if seeding.uniform_fallbacks:
        notes.append(f"k-means++ fell back to uniform draws {seeding.uniform_fallbacks} time(s)")

    history = []
    y_prev = None
    prev_S = math.inf
    stall = 0
    converged = False
    gap = None
    it = 0
    while True:
        it += 1
        res = ctx.allocate(servers, y_prev)
        y = res.membership.y
        gap = None if res.optimal else res.gap
        sites = servers
        if spec.lower <= 0:
            sites, n_empty = _reseed_empty(ctx, servers, y)
            if n_empty:
                notes.append(f"iteration {it}: re-seeded {n_empty} empty server(s)")
        new = relocate_all(ctx.d, ctx.a, res.membership, current=sites, warn=False)
        S = objective(ctx.d, ctx.a, new, y)
        history.append((res.cost, S))
        if new == servers:
            converged = True
            break
        stall = 0 if S < prev_S - DECREASE_TOL else stall + 1
        prev_S = S
        servers, y_prev = new, y
        if stall >= STALL_LIMIT or it >= spec.max_iterations:
            break
    if len(set(new)) < len(new):
        notes.append("several servers share one site")
    if gap is not None:
        notes.append(f"last hard allocation stopped at relative gap {gap:.3g}")
    return Solution(
        servers=tuple(new),
        membership=Membership(y),
        objective=S,
        converged=converged,
        iterations=it,
        restart_index=r,
        gap=gap,
        history=tuple(history),
        warnings=tuple(notes),
    )


_WORKER_CTX: Optional[_Context] = None


def _init_worker(ctx):
    global _WORKER_CTX
    _WORKER_CTX = ctx


def _worker(r: int):
    return _guarded(_WORKER_CTX, r)


def _guarded(ctx, r):
    try:
        return run_restart(ctx, r)
    except PlacementError as exc:
        return exc


def run_restarts(spec: ProblemSpec, workers: Optional[int] = None) -> list:
    """Every restart's :class:`Solution`, or the exception it raised, by index."""
    problems = validate(spec)
    if problems:
        raise Infeasible("; ".join(problems))
    ctx = _Context(spec)
    workers = spec.workers if workers is None else workers
    idx = range(spec.restarts)
    if workers <= 1:
        return [_guarded(ctx, r) for r in idx]
    mp = multiprocessing.get_context("fork")
    with ProcessPoolExecutor(workers, mp_context=mp, initializer=_init_worker, initargs=(ctx,)) as ex:
        chunk = max(1, spec.restarts // (4 * workers))
        return list(ex.map(_worker, idx, chunksize=chunk))


def best_of(results: list) -> Solution:
    sols = [s for s in results if isinstance(s, Solution)]
    if not sols:
        errors = [e for e in results if isinstance(e, Exception)]
        # capacity feasibility does not depend on the sites, so one cause is enough
        if any(isinstance(e, TimeLimitNoIncumbent) for e in errors):
            raise TimeLimitNoIncumbent(str(errors[0]))
        raise Infeasible(str(errors[0]) if errors else "no restarts were run")
    return min(sols, key=lambda s: (s.objective, s.restart_index))


def solve(spec: ProblemSpec, workers: Optional[int] = None) -> Solution:
    """Best solution over ``spec.restarts`` seeded descents.

    Raises
    ------
    Infeasible
        When the instance fails :func:`edgepack.model.validate` or every
        restart's first allocation is infeasible.
    TimeLimitNoIncumbent
        When no restart found a 0/1 allocation within its budget.
    """
    best = best_of(run_restarts(spec, workers))
    log.debug("best restart %d objective %.6g", best.restart_index, best.objective)
    return best
