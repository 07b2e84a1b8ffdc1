"""Acceptance checks; a PASS/FAIL line per criterion is printed at the end of the run.

Run alone with ``python3 -m pytest tests/test_acceptance.py`` or
``python3 tests/test_acceptance.py``.
"""

import math
import time

import numpy as np
import pytest

from edgepack.allocate import allocate_fractional, allocate_hard
from edgepack.locate import relocate_all
from edgepack.metrics import weighted_mean_distance, weighted_quantile, workload_stats
from edgepack.model import AccessPoint, Infeasible, Membership, ProblemSpec, Solution
from edgepack.scenario_io import bundled_city, default_designated, run_spec, scenario_spec
from edgepack.solver import solve
from edgepack.validator import check
from instances import fractional_instance, hard_instance, site_instance
from oracles import brute_force_sites, enumerate_hard, fractional_lp, nearest_cost, pairwise

criterion = pytest.mark.criterion


def as_solution(servers, res, r=0):
    return Solution(tuple(servers), res.membership, res.cost, True, 1, r)


def spec_for(inst, k, mode, **kw):
    return ProblemSpec(inst.aps, k=k, lower=inst.lower, upper=inst.upper, membership=mode, **kw)


@pytest.fixture(scope="module")
def hard_runs():
    runs, t0 = [], time.perf_counter()
    for seed in range(200):
        inst = hard_instance(seed)
        res = allocate_hard(inst.d, inst.aps, inst.servers, inst.lower, inst.upper)
        best, _ = enumerate_hard(inst.d, inst.w, inst.a, inst.servers, inst.lower, inst.upper, inst.q)
        runs.append((inst, res, best))
    return runs, time.perf_counter() - t0


@pytest.fixture(scope="module")
def frac_runs():
    runs, t0 = [], time.perf_counter()
    for seed in range(100):
        inst = fractional_instance(seed)
        res = allocate_fractional(inst.d, inst.aps, inst.servers, inst.lower, inst.upper)
        status, value, _ = fractional_lp(inst.d, inst.w, inst.a, inst.servers, inst.lower, inst.upper)
        runs.append((inst, res, status, value))
    return runs, time.perf_counter() - t0


@pytest.fixture(scope="module")
def site_runs():
    runs = []
    for seed in range(50):
        inst = site_instance(seed)
        spec = ProblemSpec(inst.aps, k=2, lower=inst.lower, upper=inst.upper, restarts=100, seed=seed)
        best = brute_force_sites(inst.d, inst.w, inst.a, 2, inst.lower, inst.upper)
        runs.append((inst, spec, solve(spec), best))
    return runs


@pytest.fixture(scope="module")
def city_runs():
    """The three k=20 setups on the bundled city, 100 restarts each."""
    aps = bundled_city()
    mean = sum(ap.workload for ap in aps) / 20
    setups = {"none": (0.0, None), "upper": (0.0, 1.12 * mean), "both": (0.88 * mean, 1.12 * mean)}
    t0 = time.perf_counter()
    out = {}
    for name, (lo, up) in setups.items():
        spec = scenario_spec("M1", aps).replace(lower=lo, upper=up, restarts=100, seed=0)
        out[name] = run_spec(spec)
    return out, time.perf_counter() - t0


@criterion(1, "hard allocation equals exhaustive enumeration on 200 instances")
def test_hard_allocation_oracle(hard_runs):
    runs, elapsed = hard_runs
    assert all(math.isfinite(best) for _, _, best in runs)
    # integer coordinates and weights make every cost an exactly representable integer
    mismatches = [i for i, (_, res, best) in enumerate(runs) if res.cost != best]
    assert mismatches == []
    assert all(res.optimal for _, res, _ in runs)
    assert elapsed < 30


@criterion(2, "fractional allocation equals a dense LP oracle within 1e-9")
def test_fractional_allocation_oracle(frac_runs):
    runs, elapsed = frac_runs
    assert all(status == "optimal" for _, _, status, _ in runs)
    worst = max(abs(res.cost - value) for _, res, _, value in runs)
    assert worst <= 1e-9
    assert elapsed < 30


@criterion(3, "nearest <= fractional <= hard on every instance of 1 and 2")
def test_relaxation_ordering(hard_runs, frac_runs):
    for inst, hard, _ in hard_runs[0]:
        frac = allocate_fractional(inst.d, inst.aps, inst.servers, inst.lower, inst.upper)
        near = nearest_cost(inst.d, inst.a, inst.servers, inst.q)
        assert near <= frac.cost + 1e-9 and frac.cost <= hard.cost + 1e-9
    for inst, frac, _, _ in frac_runs[0]:
        try:
            hard = allocate_hard(inst.d, inst.aps, inst.servers, inst.lower, inst.upper).cost
        except Infeasible:
            hard = math.inf
        near = nearest_cost(inst.d, inst.a, inst.servers, inst.q)
        assert near <= frac.cost + 1e-9 and frac.cost <= hard + 1e-9


@criterion(4, "solve matches brute force on >= 48/50 instances, misses locally optimal")
def test_end_to_end_brute_force(site_runs):
    hits = 0
    for inst, spec, sol, best in site_runs:
        if abs(sol.objective - best) <= 1e-9 * max(1.0, best):
            hits += 1
            continue
        servers = list(sol.servers)
        res = allocate_hard(inst.d, inst.aps, servers, inst.lower, inst.upper)
        assert res.cost == pytest.approx(sol.objective, abs=1e-9)
        assert relocate_all(inst.d, inst.a, res.membership, current=servers, warn=False) == servers
    assert hits >= 48


@criterion(5, "validator is clean on every solution from criteria 1-4 and 7")
def test_validator_clean(hard_runs, frac_runs, site_runs, city_runs):
    for inst, res, _ in hard_runs[0]:
        spec = spec_for(inst, len(inst.servers), "hard")
        assert check(spec, as_solution(inst.servers, res)) == []
    for inst, res, _, _ in frac_runs[0]:
        spec = spec_for(inst, len(inst.servers), "fractional")
        assert check(spec, as_solution(inst.servers, res)) == []
    for _, spec, sol, _ in site_runs:
        assert check(spec, sol) == []
    for result in city_runs[0].values():
        assert check(result.spec, result.solution) == []
        for r in result.restarts:
            assert check(result.spec, r) == []


@criterion(6, "fixed seed gives bit-identical solutions over 3 runs and 1 or 4 workers")
def test_determinism():
    spec = scenario_spec("M1", bundled_city(), restarts=8, seed=42)
    first = solve(spec, workers=1)
    for _ in range(2):
        assert solve(spec, workers=1).same_as(first)
    assert solve(spec, workers=4).same_as(first)


@criterion(7, "bundled city: S.D. none > upper > both, mean none < upper, < 5 min")
def test_table_direction(city_runs):
    runs, elapsed = city_runs
    sd = {name: r.report.workload_sd for name, r in runs.items()}
    mean = {name: r.report.mean for name, r in runs.items()}
    print(f"S.D. {sd}  mean {mean}  elapsed {elapsed:.1f}s")
    assert sd["none"] > sd["upper"] > sd["both"]
    assert mean["none"] < mean["upper"]
    assert elapsed < 300


@criterion(8, "q=2 on 5 APs gives two full memberships counted in both servers")
def test_replication_semantics():
    aps = bundled_city()
    result = run_spec(scenario_spec("M6", aps, restarts=10))
    spec, sol = result.spec, result.solution
    y = sol.membership.y
    w = spec.workloads()
    loads = w @ y
    chosen = default_designated(aps)
    for i, ap in enumerate(spec.aps):
        cols = np.flatnonzero(y[i] > 0)
        if ap.id in chosen:
            assert len(cols) == 2 and np.all(y[i, cols] == 1)
            for j in cols:
                others = sum(w[l] for l in range(spec.n) if y[l, j] == 1 and l != i)
                assert loads[j] == others + ap.workload
        else:
            assert len(cols) == 1
    assert check(spec, sol) == []


@criterion(9, "metric hand checks: mean 3.5, quantile 2, sd sqrt(2)")
def test_metric_hand_checks():
    aps = [AccessPoint(f"p{i}", float(x), 0.0, float(w)) for i, (x, w) in enumerate([(0, 1), (10, 3), (2, 0), (14, 0)])]
    s = Solution((2, 3), Membership(np.array([[1, 0], [0, 1], [1, 0], [0, 1]], dtype=float)), 0, True, 1, 0)
    assert weighted_mean_distance(pairwise([(a.x, a.y) for a in aps]), aps, s) == 3.5

    rep = [AccessPoint("a", 0, 0, 2, replication=2), AccessPoint("b", 1, 0, 2), AccessPoint("c", -3, 0, 0)]
    s = Solution((1, 2), Membership(np.array([[1, 1], [1, 0], [0, 1]], dtype=float)), 0, True, 1, 0)
    assert weighted_mean_distance(pairwise([(a.x, a.y) for a in rep]), rep, s) == 2

    q = [AccessPoint(f"q{i}", float(i), 0, float(w)) for i, w in enumerate([0, 1, 1, 2])]
    s = Solution((0,), Membership(np.ones((4, 1))), 0, True, 1, 0)
    assert weighted_quantile(pairwise([(a.x, a.y) for a in q]), q, s, 0.5) == 2

    two = [AccessPoint("x", 0, 0, 1), AccessPoint("y", 1, 0, 3)]
    sd = workload_stats(two, Solution((0, 1), Membership(np.eye(2)), 0, True, 1, 0))[0]
    assert abs(sd - math.sqrt(2)) <= 1e-12


@criterion(10, "allocation-step objective never rises within a restart")
def test_allocation_monotonicity(city_runs):
    steps = 0
    for result in city_runs[0].values():
        for r in result.restarts:
            allocs = [a for a, _ in r.history]
            steps += len(allocs)
            for prev, cur in zip(allocs, allocs[1:]):
                assert cur <= prev + 1e-9
    assert steps > 0


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
