import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgepack.locate import ColocatedServersWarning, EmptyClusterError, relocate_all, weighted_medoid
from edgepack.model import Membership
from oracles import pairwise


def cluster_cost(d, a, y, j, site):
    return float(np.sum(a * y[:, j] * d[:, site]))


def test_single_member():
    d = pairwise([(0, 0), (5, 5)])
    assert weighted_medoid(d, [1, 1], [(1, 1.0)]) == 1


def test_heavy_end_of_a_line():
    d = pairwise([(0, 0), (1, 0), (2, 0)], squared=True)
    members = [(0, 1.0), (1, 1.0), (2, 1.0)]
    costs = [sum(w * d[i, m] for i, w in zip(range(3), [1, 1, 10])) for m in range(3)]
    assert costs == [41, 11, 5]
    assert weighted_medoid(d, [1, 1, 10], members) == 2


def test_dominant_member_wins_under_euclidean():
    rng = np.random.default_rng(1)
    pts = rng.uniform(0, 10, (8, 2))
    a = rng.uniform(0, 1, 8)
    a[5] = a.sum()
    d = pairwise(pts)
    members = [(i, 1.0) for i in range(8)]
    m = weighted_medoid(d, a, members)
    cost = lambda c: sum(a[i] * d[i, c] for i in range(8))
    assert cost(5) <= cost(m) + 1e-12


def test_fractional_members_pull_less():
    d = pairwise([(0, 0), (1, 0)], squared=True)
    assert weighted_medoid(d, [2, 1], [(0, 0.25), (1, 1.0)]) == 1


def test_empty_member_list():
    with pytest.raises(ValueError):
        weighted_medoid(np.zeros((1, 1)), [1], [])


def test_identity_membership_is_a_fixed_point():
    d = pairwise([(0, 0), (3, 1), (7, 2)], squared=True)
    assert relocate_all(d, [1, 2, 3], Membership(np.eye(3))) == [0, 1, 2]


def test_symmetric_pairs_use_lowest_index():
    d = pairwise([(0, 0), (0, 1), (10, 0), (10, 1)], squared=True)
    y = np.array([[1, 0], [1, 0], [0, 1], [0, 1]], dtype=float)
    new = relocate_all(d, [3, 3, 3, 3], Membership(y))
    assert new == [0, 2]
    a = np.full(4, 3.0)
    assert sum(cluster_cost(d, a, y, j, c) for j, c in enumerate(new)) == 6


def test_empty_cluster_handling():
    d = pairwise([(0, 0), (1, 0)])
    y = np.array([[1.0, 0.0], [1.0, 0.0]])
    with pytest.raises(EmptyClusterError) as info:
        relocate_all(d, [1, 1], Membership(y))
    assert info.value.server == 1
    assert relocate_all(d, [1, 1], Membership(y), current=[0, 1]) == [0, 1]


def test_colocated_warning():
    d = pairwise([(0, 0), (1, 0)])
    y = np.array([[0.5, 0.5], [0.5, 0.5]])
    with pytest.warns(ColocatedServersWarning):
        relocate_all(d, [1, 1], Membership(y))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        relocate_all(d, [1, 1], Membership(y), warn=False)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 12), st.integers(1, 4))
def test_never_increases_cluster_cost(seed, n, k):
    rng = np.random.default_rng(seed)
    d = pairwise(rng.uniform(0, 10, (n, 2)), squared=True)
    a = rng.uniform(0, 5, n)
    y = np.zeros((n, k))
    y[np.arange(n), rng.integers(0, k, n)] = 1.0
    current = rng.integers(0, n, k).tolist()  # not necessarily members
    new = relocate_all(d, a, Membership(y), current=current, warn=False)
    for j in range(k):
        assert cluster_cost(d, a, y, j, new[j]) <= cluster_cost(d, a, y, j, current[j]) + 1e-12
        if y[:, j].any():
            assert y[new[j], j] > 0 or new[j] == current[j]
