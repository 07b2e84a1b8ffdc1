import numpy as np
import pytest

from edgepack.model import AccessPoint, Infeasible, MembershipMode, ProblemSpec
from edgepack.scenario_io import bundled_city, default_designated, solve_scenario
from edgepack.solver import _Context, _reseed_empty, run_restarts, solve
from edgepack.validator import check


def square_spec(**kw):
    aps = [AccessPoint(f"s{i}", x, y, 1) for i, (x, y) in enumerate([(0, 0), (0, 1), (10, 0), (10, 1)])]
    return ProblemSpec(aps, k=2, lower=2, upper=2, restarts=10, **kw)


def test_square_corners():
    sol = solve(square_spec())
    assert sol.objective == 2
    assert sol.converged
    assert check(square_spec(), sol) == []
    pairs = {frozenset(np.flatnonzero(sol.membership.y[:, j])) for j in range(2)}
    assert pairs == {frozenset({0, 1}), frozenset({2, 3})}


def test_every_ap_its_own_server():
    rng = np.random.default_rng(4)
    w = rng.integers(1, 9, 9).astype(float)
    aps = [AccessPoint(f"a{i}", *rng.uniform(0, 5, 2), w[i]) for i in range(9)]
    spec = ProblemSpec(aps, k=9, lower=w.min(), upper=w.max(), restarts=3)
    sol = solve(spec)
    assert sol.objective == 0
    assert sorted(sol.servers) == list(range(9))


def random_spec(seed=0, n=40, k=4, mode="hard", restarts=8):
    rng = np.random.default_rng(seed)
    w = rng.integers(1, 20, n).astype(float)
    aps = [AccessPoint(f"a{i}", *rng.uniform(0, 10, 2), w[i]) for i in range(n)]
    m = w.sum() / k
    return ProblemSpec(aps, k=k, lower=0.8 * m, upper=1.2 * m, membership=mode,
                       restarts=restarts, seed=seed, hard_alloc_node_limit=50)


@pytest.mark.parametrize("mode", ["hard", "fractional"])
def test_best_of_restarts_and_descent(mode):
    spec = random_spec(mode=mode)
    results = run_restarts(spec)
    best = solve(spec)
    assert all(best.objective <= r.objective for r in results)
    assert check(spec, best) == []
    for r in results:
        allocs = [h[0] for h in r.history]
        assert all(b <= a + 1e-9 for a, b in zip(allocs, allocs[1:]))
        # each location step keeps the allocation cost or lowers it
        assert all(s <= c + 1e-9 for c, s in r.history)
        assert r.iterations == len(r.history) <= spec.max_iterations


def test_same_seed_same_solution_across_workers():
    spec = random_spec(seed=3, restarts=8)
    one = solve(spec, workers=1)
    assert one.same_as(solve(spec, workers=1))
    assert one.same_as(solve(spec, workers=4))
    other = solve(spec.replace(seed=4), workers=1)
    assert other.restart_index >= 0


def test_infeasible_instance_is_reported():
    aps = [AccessPoint(f"a{i}", i, 0, 5) for i in range(4)]
    with pytest.raises(Infeasible, match="aggregate"):
        solve(ProblemSpec(aps, k=2, upper=8))
    # passes the aggregate checks but no 0/1 split of 25 fits [12, 13]
    aps.append(AccessPoint("a4", 4, 0, 5))
    with pytest.raises(Infeasible):
        solve(ProblemSpec(aps, k=2, lower=12, upper=13, restarts=2))


def test_reseed_moves_empty_servers():
    aps = [AccessPoint(f"a{i}", float(i), 0, 1) for i in range(5)]
    ctx = _Context(ProblemSpec(aps, k=2))
    y = np.zeros((5, 2))
    y[:, 0] = 1
    sites, moved = _reseed_empty(ctx, [0, 1], y)
    assert moved == 1
    assert sites == [0, 4]  # the AP farthest from its server


def test_unbounded_run_has_no_empty_servers():
    spec = random_spec(seed=5, k=6).replace(lower=0, upper=None)
    sol = solve(spec)
    assert np.all(sol.membership.loads(spec.workloads()) > 0)


def test_fog_preset_respects_window():
    res = solve_scenario("F1", bundled_city(), restarts=2)
    assert res.spec.membership is MembershipMode.FRACTIONAL
    assert res.report.workload_min >= 10 - 1e-9
    assert res.report.workload_max <= 80 + 1e-9
    assert check(res.spec, res.solution) == []


def test_replication_preset():
    aps = bundled_city()
    res = solve_scenario("M6", aps, restarts=2)
    for ap_id in default_designated(aps):
        i = next(i for i, ap in enumerate(aps) if ap.id == ap_id)
        assert res.solution.membership.y[i].sum() == 2
    assert check(res.spec, res.solution) == []


def test_unconstrained_preset_has_no_bounds():
    res = solve_scenario("M2", bundled_city(), restarts=2)
    assert res.spec.lower == 0 and res.spec.upper is None
    assert check(res.spec, res.solution) == []
