"""Domain types for capacitated edge-server placement."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np


class PlacementError(Exception):
    """Base class for solver errors."""


class Infeasible(PlacementError):
    """No allocation satisfies the capacity window for the given servers."""


class TimeLimitNoIncumbent(PlacementError):
    """The hard allocation ran out of budget before finding any 0/1 point."""


class MembershipMode(str, enum.Enum):
    HARD = "hard"
    FRACTIONAL = "fractional"


class Metric(str, enum.Enum):
    EUCLIDEAN = "euclidean"
    SQUARED_EUCLIDEAN = "squared_euclidean"
    CUSTOM = "custom"


@dataclass(frozen=True)
class AccessPoint:
    """A candidate site carrying workload.

    ``preference`` is extra weight in the objective only; it never consumes
    server capacity. ``replication`` is the number of servers the full
    workload is copied to.
    """

    id: str
    x: float
    y: float
    workload: float
    preference: float = 0.0
    replication: float = 1.0

    def __post_init__(self):
        if self.workload < 0 or not math.isfinite(self.workload):
            raise ValueError(f"negative workload at {self.id}")
        if self.preference < 0 or not math.isfinite(self.preference):
            raise ValueError(f"negative preference at {self.id}")
        if not self.replication >= 1:
            raise ValueError(f"replication < 1 at {self.id}")

    @property
    def coords(self) -> tuple[float, float]:
        return (self.x, self.y)


def effective_weight(ap: AccessPoint) -> float:
    """Objective weight ``workload + preference``."""
    return ap.workload + ap.preference


@dataclass(frozen=True)
class ProblemSpec:
    """A full placement instance plus solver settings.

    ``upper=None`` means no upper capacity bound. ``distances`` is required
    for ``Metric.CUSTOM`` and ignored otherwise. Node limits and the time
    limit apply per hard-allocation call.
    """

    aps: tuple[AccessPoint, ...]
    k: int
    lower: float = 0.0
    upper: Optional[float] = None
    membership: MembershipMode = MembershipMode.HARD
    metric: Metric = Metric.SQUARED_EUCLIDEAN
    distances: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    restarts: int = 100
    seed: int = 0
    max_iterations: int = 50
    hard_alloc_time_limit: float = 60.0
    hard_alloc_node_limit: Optional[int] = None
    weighted_seeding: bool = True
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "aps", tuple(self.aps))
        object.__setattr__(self, "membership", MembershipMode(self.membership))
        object.__setattr__(self, "metric", Metric(self.metric))
        if self.upper is not None and math.isinf(self.upper):
            object.__setattr__(self, "upper", None)
        if self.k < 1:
            raise ValueError("k must be positive")
        if self.restarts < 1 or self.max_iterations < 1:
            raise ValueError("restarts and max_iterations must be positive")
        if self.distances is not None:
            m = np.array(self.distances, dtype=float)
            m.setflags(write=False)
            object.__setattr__(self, "distances", m)

    @property
    def n(self) -> int:
        return len(self.aps)

    @property
    def upper_or_inf(self) -> float:
        return math.inf if self.upper is None else self.upper

    def coords(self) -> np.ndarray:
        return np.array([[ap.x, ap.y] for ap in self.aps], dtype=float).reshape(-1, 2)

    def workloads(self) -> np.ndarray:
        return np.array([ap.workload for ap in self.aps], dtype=float)

    def weights(self) -> np.ndarray:
        return np.array([effective_weight(ap) for ap in self.aps], dtype=float)

    def replication(self) -> np.ndarray:
        return np.array([ap.replication for ap in self.aps], dtype=float)

    def replace(self, **changes) -> "ProblemSpec":
        from dataclasses import replace

        if "distances" not in changes:
            changes["distances"] = self.distances
        return replace(self, **changes)


def validate(spec: ProblemSpec) -> list[str]:
    """Necessary feasibility conditions; an empty list means none failed."""
    out = []
    n = spec.n
    if n == 0:
        return ["no access points"]
    if spec.k > n:
        out.append(f"k={spec.k} exceeds the number of access points ({n})")
    if spec.lower < 0:
        out.append("lower capacity is negative")
    if spec.upper is not None and spec.upper < spec.lower:
        out.append("lower capacity exceeds upper capacity")

    ids = [ap.id for ap in spec.aps]
    if len(set(ids)) != n:
        seen, dup = set(), []
        for i in ids:
            if i in seen:
                dup.append(i)
            seen.add(i)
        out.append(f"duplicate AP ids: {sorted(set(dup))}")
    for ap in spec.aps:
        if not (math.isfinite(ap.x) and math.isfinite(ap.y)):
            out.append(f"non-finite coordinates at {ap.id}")
        if ap.replication > spec.k:
            out.append(f"replication {ap.replication:g} exceeds k at {ap.id}")
        if spec.membership is MembershipMode.HARD and ap.replication != int(ap.replication):
            out.append(f"non-integer replication under hard membership at {ap.id}")

    total = float(sum(ap.workload * ap.replication for ap in spec.aps))
    if spec.k * spec.lower > total + 1e-9:
        out.append(
            f"total replicated workload {total:g} is below aggregate lower capacity "
            f"{spec.k * spec.lower:g}"
        )
    if spec.upper is not None:
        if total > spec.k * spec.upper + 1e-9:
            out.append(
                f"total replicated workload {total:g} exceeds aggregate capacity "
                f"{spec.k * spec.upper:g}"
            )
        if spec.membership is MembershipMode.HARD:
            for ap in spec.aps:
                if ap.workload > spec.upper + 1e-9:
                    out.append(f"AP workload exceeds U at {ap.id}")

    if spec.metric is Metric.CUSTOM:
        if spec.distances is None:
            out.append("custom metric requires a distance matrix")
        else:
            m = spec.distances
            if m.shape != (n, n):
                out.append(f"custom matrix has shape {m.shape}, expected {(n, n)}")
            elif not np.all(np.isfinite(m)) or np.any(m < 0):
                out.append("custom matrix has negative or non-finite entries")
            elif np.any(np.diag(m) != 0):
                out.append("custom matrix has a non-zero diagonal")
    return out


@dataclass(frozen=True)
class Membership:
    """Allocation ``y[i, j]`` of AP ``i`` to server slot ``j``.

    Stored densely (n x k); :meth:`items` gives the sparse view.
    """

    y: np.ndarray

    def __post_init__(self):
        y = np.array(self.y, dtype=float)
        y.setflags(write=False)
        object.__setattr__(self, "y", y)

    @property
    def server_count(self) -> int:
        return self.y.shape[1]

    def items(self) -> Iterator[tuple[int, int, float]]:
        rows, cols = np.nonzero(self.y)
        for i, j in zip(rows.tolist(), cols.tolist()):
            yield i, j, float(self.y[i, j])

    def members(self, j: int) -> list[tuple[int, float]]:
        rows = np.flatnonzero(self.y[:, j] > 0)
        return [(int(i), float(self.y[i, j])) for i in rows]

    def loads(self, workloads: Sequence[float]) -> np.ndarray:
        return np.asarray(workloads, dtype=float) @ self.y

    def __eq__(self, other):
        return isinstance(other, Membership) and np.array_equal(self.y, other.y)

    __hash__ = None


@dataclass(frozen=True)
class Solution:
    """Best placement found, with provenance of the restart that produced it.

    ``history`` holds ``(allocation_objective, objective_after_location)`` per
    iteration of the winning restart.
    """

    servers: tuple[int, ...]
    membership: Membership
    objective: float
    converged: bool
    iterations: int
    restart_index: int
    gap: Optional[float] = None
    history: tuple[tuple[float, float], ...] = ()
    warnings: tuple[str, ...] = ()

    def loads(self, workloads) -> np.ndarray:
        return self.membership.loads(workloads)

    def same_as(self, other: "Solution") -> bool:
        """Bit-level equality of everything the solver decides."""
        return (
            self.servers == other.servers
            and np.array_equal(self.membership.y, other.membership.y)
            and self.objective == other.objective
            and self.converged == other.converged
            and self.iterations == other.iterations
            and self.restart_index == other.restart_index
            and self.history == other.history
        )
