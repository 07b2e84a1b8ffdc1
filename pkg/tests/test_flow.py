import numpy as np
import pytest

from edgepack import _flow


def run(cost, cap, supply, allowed, lo, up, state=None):
    m, k = cost.shape
    if state is None:
        F, ft, h = np.zeros((m, k)), np.zeros(k), np.zeros(m + k + 1)
        _flow.cold_start(cost, cap, supply, allowed, lo, up, F, ft, h, 1e-12)
    else:
        F, ft, h = (s.copy() for s in state)
    status = _flow.solve(cost, cap, supply, allowed, lo, up, F, ft, h, 1e-12)
    return status, F, ft, h


def random_problem(seed, m=12, k=3):
    rng = np.random.default_rng(seed)
    cap = rng.integers(1, 10, m).astype(float)
    cost = rng.uniform(0, 5, (m, k))
    mean = cap.sum() / k
    lo = np.full(k, np.floor(0.8 * mean))
    up = np.full(k, np.ceil(1.2 * mean))
    return cost, cap, cap.copy(), np.ones((m, k), dtype=np.bool_), lo, up


@pytest.mark.parametrize("seed", range(20))
def test_solution_meets_bounds(seed):
    cost, cap, supply, allowed, lo, up = random_problem(seed)
    status, F, _, _ = run(cost, cap, supply, allowed, lo, up)
    assert status == _flow.OPTIMAL
    np.testing.assert_allclose(F.sum(axis=1), supply, atol=1e-9)
    assert np.all(F >= -1e-12) and np.all(F <= cap[:, None] + 1e-9)
    col = F.sum(axis=0)
    assert np.all(col >= lo - 1e-9) and np.all(col <= up + 1e-9)


@pytest.mark.parametrize("seed", range(20))
def test_warm_start_matches_cold_start(seed):
    cost, cap, supply, allowed, lo, up = random_problem(seed)
    _, F, ft, h = run(cost, cap, supply, allowed, lo, up)
    # forbid the busiest arc and tighten one server, as a branching step would
    allowed2 = allowed.copy()
    i, j = np.unravel_index(np.argmax(F), F.shape)
    allowed2[i, j] = False
    up2 = up.copy()
    up2[0] = max(lo[0], up[0] - 2)
    cold = run(cost, cap, supply, allowed2, lo, up2)
    warm = run(cost, cap, supply, allowed2, lo, up2, state=(F, ft, h))
    assert cold[0] == warm[0]
    if cold[0] == _flow.OPTIMAL:
        assert np.sum(cost * cold[1]) == pytest.approx(np.sum(cost * warm[1]), abs=1e-9)
        assert warm[1][i, j] == 0


def test_reports_infeasible_window():
    cost = np.array([[1.0, 2.0], [2.0, 1.0]])
    cap = np.array([3.0, 3.0])
    allowed = np.ones((2, 2), dtype=np.bool_)
    status, *_ = run(cost, cap, cap.copy(), allowed, np.array([4.0, 4.0]), np.array([5.0, 5.0]))
    assert status == _flow.INFEASIBLE
