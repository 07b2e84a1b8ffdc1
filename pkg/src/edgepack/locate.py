"""Location step: move each server to the weighted medoid of its cluster."""

from __future__ import annotations

import warnings
from typing import Optional, Sequence

import numpy as np

from .model import Membership


class EmptyClusterError(ValueError):
    def __init__(self, server: int):
        super().__init__(f"server {server} has no assigned access points")
        self.server = server


class ColocatedServersWarning(UserWarning):
    pass


def _cluster_costs(d, weights, members, candidates):
    idx = np.array([i for i, _ in members], dtype=int)
    mass = np.array([weights[i] * y for i, y in members], dtype=float)
    # cost[c] = sum_i mass_i * d(i, candidate_c), summed in member order
    return mass @ d[np.ix_(idx, candidates)]


def weighted_medoid(dist, weights, members: Sequence[tuple[int, float]]) -> int:
    """Member AP minimizing ``sum_i a_i * y_ij * d(i, m)``; ties go to the lowest index."""
    if not members:
        raise ValueError("empty member list")
    d = np.asarray(getattr(dist, "values", dist))
    candidates = sorted({i for i, _ in members})
    costs = _cluster_costs(d, np.asarray(weights, dtype=float), members, candidates)
    return int(candidates[int(np.argmin(costs))])


def relocate_all(
    dist,
    weights,
    membership: Membership,
    k: Optional[int] = None,
    current: Optional[Sequence[int]] = None,
    warn: bool = True,
) -> list[int]:
    """Apply the medoid update to every server column.

    When ``current`` is given, each server's present site is also a
    candidate, so a cluster's cost never goes up even if every AP at that
    site was allocated elsewhere. Servers without members keep ``current``
    (and raise :class:`EmptyClusterError` when there is no current site).
    """
    d = np.asarray(getattr(dist, "values", dist))
    w = np.asarray(weights, dtype=float)
    k = membership.server_count if k is None else k
    out = []
    for j in range(k):
        members = membership.members(j)
        if not members:
            if current is None:
                raise EmptyClusterError(j)
            out.append(int(current[j]))
            continue
        candidates = {i for i, _ in members}
        if current is not None:
            candidates.add(int(current[j]))
        candidates = sorted(candidates)
        costs = _cluster_costs(d, w, members, candidates)
        out.append(int(candidates[int(np.argmin(costs))]))
    if warn and len(set(out)) < len(out):
        warnings.warn("several servers share one site", ColocatedServersWarning, stacklevel=2)
    return out
