"""Latency and workload-balance figures for a finished placement."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .model import AccessPoint, Metric, Solution

DEFAULT_QUANTILES = (0.25, 0.5, 0.75, 0.95)


@dataclass(frozen=True)
class EvaluationReport:
    mean: float
    quantiles: dict[float, float]
    workload_sd: float
    workload_min: float
    workload_max: float
    per_server_workloads: list[float]
    eval_metric_tag: str = Metric.EUCLIDEAN.value
    scale: float = 1.0
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["quantiles"] = {f"{a:g}": v for a, v in self.quantiles.items()}
        out["sd_kind"] = "sample (k-1)"
        return out

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def euclidean_matrix(aps: Sequence[AccessPoint]) -> np.ndarray:
    xy = np.array([[ap.x, ap.y] for ap in aps], dtype=float)
    diff = xy[:, None, :] - xy[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def _assigned(dist_eval, solution):
    d = np.asarray(getattr(dist_eval, "values", dist_eval))[:, list(solution.servers)]
    return d, solution.membership.y


def weighted_mean_distance(dist_eval, aps, solution: Solution) -> float:
    """``(1/W) sum_ij w_i d(i, c_j) y_ij`` with ``W = sum_i w_i``.

    Replicated APs add one distance term per copy to the numerator while
    counting once in ``W``.
    """
    w = np.array([ap.workload for ap in aps], dtype=float)
    total = w.sum()
    if total <= 0:
        raise ValueError("total workload is zero")
    d, y = _assigned(dist_eval, solution)
    return float(np.sum(w[:, None] * d * y) / total)


def weighted_quantile(dist_eval, aps, solution: Solution, alpha: float) -> float:
    """Smallest assigned distance covering at least ``alpha`` of the workload mass."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    w = np.array([ap.workload for ap in aps], dtype=float)
    d, y = _assigned(dist_eval, solution)
    mass = w[:, None] * y
    sel = mass > 0
    dd, mm = d[sel], mass[sel]
    total = mm.sum()
    if total <= 0:
        raise ValueError("total workload mass is zero")
    order = np.argsort(dd, kind="stable")
    dd, cum = dd[order], np.cumsum(mm[order]) / total
    # guard the last step against cumulative round-off
    cum[-1] = 1.0
    pos = int(np.searchsorted(cum, alpha - 1e-12, side="left"))
    return float(dd[min(pos, len(dd) - 1)])


def per_ap_distances(dist_eval, aps, solution: Solution, ids=None) -> list[dict]:
    """Assigned servers and distances for the chosen APs (all when ``ids`` is None)."""
    d, y = _assigned(dist_eval, solution)
    wanted = None if ids is None else set(ids)
    rows = []
    for i, ap in enumerate(aps):
        if wanted is not None and ap.id not in wanted:
            continue
        cols = np.flatnonzero(y[i] > 0)
        rows.append({
            "id": ap.id,
            "w": ap.workload,
            "servers": [int(j) for j in cols],
            "y": [float(y[i, j]) for j in cols],
            "distance": [float(d[i, j]) for j in cols],
        })
    if wanted is not None:
        missing = wanted - {r["id"] for r in rows}
        if missing:
            raise ValueError(f"unknown AP id(s): {sorted(missing)}")
    return rows


def workload_stats(aps, solution: Solution):
    """``(sd, min, max, per_server)`` of raw server workloads; sd uses k-1.

    With a single server the sd is reported as 0.
    """
    w = np.array([ap.workload for ap in aps], dtype=float)
    loads = w @ solution.membership.y
    sd = float(np.std(loads, ddof=1)) if len(loads) > 1 else 0.0
    return sd, float(loads.min()), float(loads.max()), loads.tolist()


def evaluate(
    aps,
    solution: Solution,
    dist_eval=None,
    quantiles: Sequence[float] = DEFAULT_QUANTILES,
    scale: float = 1.0,
    metric_tag: Optional[str] = None,
) -> EvaluationReport:
    """Full report; distances default to Euclidean from the AP coordinates."""
    if dist_eval is None:
        dist_eval = euclidean_matrix(aps)
        metric_tag = metric_tag or Metric.EUCLIDEAN.value
    sd, lo, hi, per = workload_stats(aps, solution)
    notes = []
    if len(per) == 1:
        notes.append("single server: sd reported as 0")
    qs = {float(a): scale * weighted_quantile(dist_eval, aps, solution, a) for a in quantiles}
    return EvaluationReport(
        mean=scale * weighted_mean_distance(dist_eval, aps, solution),
        quantiles=qs,
        workload_sd=sd,
        workload_min=lo,
        workload_max=hi,
        per_server_workloads=per,
        eval_metric_tag=metric_tag or "custom",
        scale=scale,
        notes=notes,
    )


TABLE_HEADER = ("Setup", "Mean", "25%", "50%", "75%", "95%", "S.D.", "Min", "Max")


def table_row(name: str, report: EvaluationReport) -> list[str]:
    q = report.quantiles

    def qv(a):
        v = q.get(a)
        return "" if v is None else f"{v:.3g}"

    return [
        name,
        f"{report.mean:.3g}",
        qv(0.25),
        qv(0.5),
        qv(0.75),
        qv(0.95),
        f"{report.workload_sd:.3g}",
        f"{report.workload_min:g}",
        f"{report.workload_max:g}",
    ]


def format_table(rows: Sequence[Sequence[str]], header=TABLE_HEADER) -> str:
    """Aligned text table, first column left-aligned, the rest right-aligned."""
    body = [list(header)] + [list(r) for r in rows]
    widths = [max(len(r[c]) for r in body) for c in range(len(header))]
    lines = []
    for r in body:
        cells = [r[0].ljust(widths[0])] + [v.rjust(wd) for v, wd in zip(r[1:], widths[1:])]
        lines.append(" | ".join(cells))
    lines.insert(1, "-+-".join("-" * wd for wd in widths))
    return "\n".join(lines)

