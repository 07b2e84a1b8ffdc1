"""Pairwise AP distances under a pluggable metric."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .model import AccessPoint, Metric


def euclidean(p, q) -> float:
    return math.hypot(p[0] - q[0], p[1] - q[1])


def squared_euclidean(p, q) -> float:
    dx = p[0] - q[0]
    dy = p[1] - q[1]
    return dx * dx + dy * dy


@dataclass(frozen=True)
class DistanceMatrix:
    """Dense ``n x n`` matrix; ``values[i, m]`` is the cost of serving AP i from site m."""

    values: np.ndarray
    metric: Metric

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def __getitem__(self, idx):
        return self.values[idx]


def _pairwise_sq(coords: np.ndarray) -> np.ndarray:
    diff = coords[:, None, :] - coords[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def build_matrix(
    aps: Sequence[AccessPoint],
    metric: Metric | str = Metric.SQUARED_EUCLIDEAN,
    custom: Optional[np.ndarray] = None,
) -> DistanceMatrix:
    """Precompute all AP-to-AP distances.

    Custom matrices are passed through unchanged after checking shape,
    sign, finiteness and a zero diagonal; they may be asymmetric.
    """
    metric = Metric(metric)
    n = len(aps)
    if n < 1:
        raise ValueError("need at least one access point")
    if metric is Metric.CUSTOM:
        if custom is None:
            raise ValueError("custom metric requires a matrix")
        m = np.asarray(custom, dtype=float)
        if m.shape != (n, n):
            raise ValueError(f"custom matrix has shape {m.shape}, expected {(n, n)}")
        bad = np.argwhere(~np.isfinite(m) | (m < 0))
        if len(bad):
            i, j = bad[0]
            raise ValueError(f"invalid custom distance {m[i, j]} at ({i}, {j})")
        diag = np.flatnonzero(np.diag(m) != 0)
        if len(diag):
            raise ValueError(f"non-zero diagonal at ({diag[0]}, {diag[0]})")
        return DistanceMatrix(m, metric)

    coords = np.array([[ap.x, ap.y] for ap in aps], dtype=float)
    sq = _pairwise_sq(coords)
    np.fill_diagonal(sq, 0.0)
    if metric is Metric.EUCLIDEAN:
        return DistanceMatrix(np.sqrt(sq), metric)
    return DistanceMatrix(sq, metric)
