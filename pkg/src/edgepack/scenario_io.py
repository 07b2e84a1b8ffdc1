"""AP tables, synthetic cities, scenario presets and result export."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .metrics import DEFAULT_QUANTILES, EvaluationReport, evaluate
from .model import AccessPoint, Membership, MembershipMode, Metric, ProblemSpec, Solution
from .solver import best_of, run_restarts


class InputError(ValueError):
    """Malformed or invalid input file."""


# ---------------------------------------------------------------------------
# AP tables

AP_COLUMNS = ("id", "x", "y", "w", "gamma", "q")


def _number(text: str, default: Optional[float], what: str, line: int) -> float:
    text = (text or "").strip()
    if not text:
        if default is None:
            raise InputError(f"line {line}: missing {what}")
        return default
    try:
        return float(text)
    except ValueError:
        raise InputError(f"line {line}: cannot parse {what} {text!r}") from None


def load_aps(path) -> list[AccessPoint]:
    """Read ``id,x,y,w[,gamma][,q]`` rows; gamma defaults to 0 and q to 1."""
    aps = []
    seen = set()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        missing = [c for c in AP_COLUMNS[:4] if c not in header]
        if missing:
            raise InputError(f"line 1: missing column(s) {missing}")
        col = {name: header.index(name) for name in AP_COLUMNS if name in header}
        for line, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < len(header):
                row = row + [""] * (len(header) - len(row))
            ap_id = row[col["id"]].strip()
            if not ap_id:
                raise InputError(f"line {line}: empty id")
            if ap_id in seen:
                raise InputError(f"line {line}: duplicate id {ap_id}")
            seen.add(ap_id)
            x = _number(row[col["x"]], None, "x", line)
            y = _number(row[col["y"]], None, "y", line)
            w = _number(row[col["w"]], None, "w", line)
            g = _number(row[col["gamma"]], 0.0, "gamma", line) if "gamma" in col else 0.0
            q = _number(row[col["q"]], 1.0, "q", line) if "q" in col else 1.0
            if w < 0:
                raise InputError(f"negative workload at {ap_id}")
            if g < 0:
                raise InputError(f"negative gamma at {ap_id}")
            if q < 1:
                raise InputError(f"q < 1 at {ap_id}")
            if not (math.isfinite(x) and math.isfinite(y)):
                raise InputError(f"non-finite coordinates at {ap_id}")
            try:
                aps.append(AccessPoint(ap_id, x, y, w, g, q))
            except ValueError as exc:
                raise InputError(f"line {line}: {exc}") from None
    return aps


def write_aps(aps: Sequence[AccessPoint], path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(AP_COLUMNS)
        for ap in aps:
            out.writerow([ap.id, repr(ap.x), repr(ap.y), repr(ap.workload),
                          repr(ap.preference), repr(ap.replication)])


def load_matrix(path) -> np.ndarray:
    """Plain numeric CSV, one row per AP, no header."""
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# synthetic cities


@dataclass(frozen=True)
class SyntheticCitySpec:
    """Dense hotspots plus uniform suburbs, with log-normal workloads."""

    n_aps: int = 450
    n_hotspots: int = 3
    hotspot_fraction: float = 0.7
    log_mean: float = 2.3
    log_sd: float = 1.1
    extent: tuple[float, float, float, float] = (0.0, 0.0, 10.0, 10.0)
    hotspot_spread: float = 0.05  # Gaussian sd as a fraction of the extent width
    seed: int = 1

    def __post_init__(self):
        if self.n_hotspots < 1:
            raise ValueError("need at least one hotspot")
        if not 0 <= self.hotspot_fraction <= 1:
            raise ValueError("hotspot_fraction must lie in [0, 1]")


def generate_synthetic(spec: SyntheticCitySpec) -> list[AccessPoint]:
    rng = np.random.default_rng(spec.seed)
    x0, y0, x1, y1 = spec.extent
    width, height = x1 - x0, y1 - y0
    n_hot = int(round(spec.n_aps * spec.hotspot_fraction))
    centers = np.column_stack([
        rng.uniform(x0 + 0.2 * width, x1 - 0.2 * width, spec.n_hotspots),
        rng.uniform(y0 + 0.2 * height, y1 - 0.2 * height, spec.n_hotspots),
    ])
    which = rng.integers(0, spec.n_hotspots, n_hot)
    hot = centers[which] + rng.normal(0.0, spec.hotspot_spread * width, (n_hot, 2))
    hot[:, 0] = np.clip(hot[:, 0], x0, x1)
    hot[:, 1] = np.clip(hot[:, 1], y0, y1)
    n_cold = spec.n_aps - n_hot
    cold = np.column_stack([rng.uniform(x0, x1, n_cold), rng.uniform(y0, y1, n_cold)])
    xy = np.vstack([hot, cold])
    w = np.maximum(np.ceil(rng.lognormal(spec.log_mean, spec.log_sd, spec.n_aps)), 1.0)
    width_id = len(str(spec.n_aps))
    return [
        AccessPoint(f"ap{i:0{width_id}d}", float(xy[i, 0]), float(xy[i, 1]), float(w[i]))
        for i in range(spec.n_aps)
    ]


BUNDLED_CITY = SyntheticCitySpec()


def bundled_city() -> list[AccessPoint]:
    """The packaged 450-AP synthetic city (``generate_synthetic(BUNDLED_CITY)``)."""
    ref = resources.files("edgepack").joinpath("data/synthetic_city.csv")
    with resources.as_file(ref) as path:
        return load_aps(path)


# ---------------------------------------------------------------------------
# scenario presets

HARD_NODE_LIMIT = 10  # per hard allocation in the 20-server presets
N_DESIGNATED = 5


@dataclass(frozen=True)
class Scenario:
    name: str
    k: int
    lower: float = 0.0
    upper: Optional[float] = None
    membership: MembershipMode = MembershipMode.HARD
    preference: float = 0.0  # gamma applied to the designated APs
    replication: int = 1  # q applied to the designated APs


SCENARIOS = {
    "M1": Scenario("M1", 20, 327, 526),
    "M2": Scenario("M2", 20),
    "M3": Scenario("M3", 20, 0, 526),
    "M4": Scenario("M4", 20, 327, 526, MembershipMode.FRACTIONAL),
    "M5": Scenario("M5", 20, 327, 526, preference=100.0),
    "M6": Scenario("M6", 20, 327, 526, replication=2),
    "F1": Scenario("F1", 150, 10, 80, MembershipMode.FRACTIONAL),
    "F2": Scenario("F2", 150, 0, None, MembershipMode.FRACTIONAL),
    "F3": Scenario("F3", 150, 0, 80, MembershipMode.FRACTIONAL),
    "TIGHT": Scenario("TIGHT", 20, 377, 476),
}


def default_designated(aps: Sequence[AccessPoint], count: int = N_DESIGNATED) -> list[str]:
    """Evenly spaced APs in table order, used when no ids are given."""
    idx = np.unique(np.linspace(0, len(aps) - 1, count).round().astype(int))
    return [aps[i].id for i in idx]


@dataclass
class ScenarioResult:
    spec: ProblemSpec
    solution: Solution
    report: EvaluationReport
    restarts: list = field(default_factory=list, repr=False)


def scenario_spec(
    name: str,
    aps: Sequence[AccessPoint],
    k_override: Optional[int] = None,
    preferred: Optional[Sequence[str]] = None,
    replicated: Optional[Sequence[str]] = None,
    **settings,
) -> ProblemSpec:
    """Build the :class:`ProblemSpec` for a named setup.

    ``settings`` are forwarded to :class:`ProblemSpec` (restarts, seed,
    workers, node limits, ...).
    """
    try:
        sc = SCENARIOS[name.upper()]
    except KeyError:
        raise InputError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}") from None
    aps = list(aps)
    ids = {ap.id for ap in aps}
    if sc.preference:
        chosen = set(preferred or default_designated(aps))
        unknown = chosen - ids
        if unknown:
            raise InputError(f"unknown preferred AP id(s): {sorted(unknown)}")
        aps = [replace(ap, preference=sc.preference) if ap.id in chosen else ap for ap in aps]
    if sc.replication > 1:
        chosen = set(replicated or default_designated(aps))
        unknown = chosen - ids
        if unknown:
            raise InputError(f"unknown replicated AP id(s): {sorted(unknown)}")
        aps = [replace(ap, replication=float(sc.replication)) if ap.id in chosen else ap
               for ap in aps]
    settings.setdefault("metric", Metric.SQUARED_EUCLIDEAN)
    if sc.membership is MembershipMode.HARD:
        settings.setdefault("hard_alloc_node_limit", HARD_NODE_LIMIT)
    return ProblemSpec(
        aps=tuple(aps),
        k=k_override or sc.k,
        lower=sc.lower,
        upper=sc.upper,
        membership=sc.membership,
        **settings,
    )


def solve_scenario(
    name: str,
    aps: Sequence[AccessPoint],
    k_override: Optional[int] = None,
    preferred: Optional[Sequence[str]] = None,
    replicated: Optional[Sequence[str]] = None,
    quantiles: Sequence[float] = DEFAULT_QUANTILES,
    **settings,
) -> ScenarioResult:
    spec = scenario_spec(name, aps, k_override, preferred, replicated, **settings)
    return run_spec(spec, quantiles)


def run_spec(spec: ProblemSpec, quantiles: Sequence[float] = DEFAULT_QUANTILES) -> ScenarioResult:
    results = run_restarts(spec)
    best = best_of(results)
    report = evaluate(spec.aps, best, quantiles=quantiles)
    return ScenarioResult(spec, best, report, results)


# ---------------------------------------------------------------------------
# run configuration


CONFIG_KEYS = {
    "k", "lower", "upper", "membership", "metric", "restarts", "seed", "max_iterations",
    "time_limit", "node_limit", "eval_quantiles", "workers", "distances", "weighted_seeding",
    "name",
}


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise InputError(f"{path}: expected a JSON object")
    unknown = set(cfg) - CONFIG_KEYS
    if unknown:
        raise InputError(f"{path}: unknown key(s) {sorted(unknown)}")
    if "k" not in cfg:
        raise InputError(f"{path}: missing 'k'")
    return cfg


def spec_from_config(cfg: dict, aps: Sequence[AccessPoint], base_dir=".") -> ProblemSpec:
    matrix = None
    if cfg.get("metric") == Metric.CUSTOM.value:
        if "distances" not in cfg:
            raise InputError("custom metric requires a 'distances' CSV path")
        matrix = load_matrix(Path(base_dir) / cfg["distances"])
    kwargs = dict(
        aps=tuple(aps),
        k=int(cfg["k"]),
        lower=float(cfg.get("lower") or 0.0),
        upper=None if cfg.get("upper") is None else float(cfg["upper"]),
        membership=cfg.get("membership", "hard"),
        metric=cfg.get("metric", Metric.SQUARED_EUCLIDEAN.value),
        distances=matrix,
        restarts=int(cfg.get("restarts", 100)),
        seed=int(cfg.get("seed", 0)),
        max_iterations=int(cfg.get("max_iterations", 50)),
        hard_alloc_time_limit=float(cfg.get("time_limit", 60.0)),
        hard_alloc_node_limit=cfg.get("node_limit"),
        weighted_seeding=bool(cfg.get("weighted_seeding", True)),
        workers=int(cfg.get("workers", 1)),
    )
    try:
        return ProblemSpec(**kwargs)
    except ValueError as exc:
        raise InputError(str(exc)) from None


# ---------------------------------------------------------------------------
# export


def export_solution(solution: Solution, aps: Sequence[AccessPoint], path_prefix,
                    spec: Optional[ProblemSpec] = None) -> list[Path]:
    """Write ``<prefix>_servers.csv``, ``<prefix>_assign.csv`` and ``<prefix>.geojson``.

    With ``spec`` a ``<prefix>_meta.json`` is written too, so the solution can
    be re-validated later without the original config.
    """
    prefix = Path(path_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    w = np.array([ap.workload for ap in aps], dtype=float)
    y = solution.membership.y
    loads = w @ y
    paths = []

    p = prefix.with_name(prefix.name + "_servers.csv")
    with open(p, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["server_index", "ap_id", "x", "y", "workload"])
        for j, c in enumerate(solution.servers):
            ap = aps[c]
            out.writerow([j, ap.id, repr(ap.x), repr(ap.y), repr(float(loads[j]))])
    paths.append(p)

    p = prefix.with_name(prefix.name + "_assign.csv")
    with open(p, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["ap_id", "server_index", "y"])
        for i, j, v in solution.membership.items():
            out.writerow([aps[i].id, j, repr(v)])
    paths.append(p)

    features = []
    for i, ap in enumerate(aps):
        cols = np.flatnonzero(y[i] > 0)
        features.append({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [ap.x, ap.y]},
            "properties": {
                "kind": "access_point",
                "id": ap.id,
                "w": ap.workload,
                "servers": [int(j) for j in cols],
                "y": [float(y[i, j]) for j in cols],
            },
        })
    for j, c in enumerate(solution.servers):
        ap = aps[c]
        features.append({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [ap.x, ap.y]},
            "properties": {"kind": "server", "server_index": j, "site": ap.id,
                           "workload": float(loads[j])},
        })
    p = prefix.with_name(prefix.name + ".geojson")
    with open(p, "w") as fh:
        json.dump({"type": "FeatureCollection", "features": features}, fh)
    paths.append(p)

    if spec is not None:
        meta = {
            "k": spec.k,
            "lower": spec.lower,
            "upper": spec.upper,
            "membership": spec.membership.value,
            "metric": spec.metric.value,
            "objective": solution.objective,
            "converged": solution.converged,
            "iterations": solution.iterations,
            "restart_index": solution.restart_index,
            "gap": solution.gap,
            # per-AP settings that scenarios apply on top of the AP table
            "replication": {ap.id: ap.replication for ap in spec.aps if ap.replication != 1},
            "preference": {ap.id: ap.preference for ap in spec.aps if ap.preference != 0},
        }
        p = prefix.with_name(prefix.name + "_meta.json")
        with open(p, "w") as fh:
            json.dump(meta, fh, indent=2)
        paths.append(p)
    return paths


def load_solution(path_prefix, aps: Sequence[AccessPoint]) -> tuple[Solution, Optional[dict]]:
    """Read back files written by :func:`export_solution`."""
    prefix = Path(path_prefix)
    index = {ap.id: i for i, ap in enumerate(aps)}
    servers = []
    try:
        with open(prefix.with_name(prefix.name + "_servers.csv"), newline="") as fh:
            for line, row in enumerate(csv.DictReader(fh), start=2):
                if row["ap_id"] not in index:
                    raise InputError(f"servers line {line}: unknown AP id {row['ap_id']}")
                servers.append((int(row["server_index"]), index[row["ap_id"]]))
        servers = [c for _, c in sorted(servers)]
        y = np.zeros((len(aps), len(servers)))
        with open(prefix.with_name(prefix.name + "_assign.csv"), newline="") as fh:
            for line, row in enumerate(csv.DictReader(fh), start=2):
                if row["ap_id"] not in index:
                    raise InputError(f"assign line {line}: unknown AP id {row['ap_id']}")
                y[index[row["ap_id"]], int(row["server_index"])] = float(row["y"])
    except (KeyError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"{prefix}: malformed solution file ({exc})") from None

    meta = None
    meta_path = prefix.with_name(prefix.name + "_meta.json")
    if meta_path.exists():
        with open(meta_path) as fh:
            meta = json.load(fh)
    objective = float("nan") if meta is None else float(meta["objective"])
    sol = Solution(
        servers=tuple(servers),
        membership=Membership(y),
        objective=objective,
        converged=bool(meta and meta.get("converged")),
        iterations=int(meta.get("iterations", 0)) if meta else 0,
        restart_index=int(meta.get("restart_index", 0)) if meta else 0,
        gap=meta.get("gap") if meta else None,
    )
    return sol, meta


def spec_from_meta(meta: dict, aps: Sequence[AccessPoint]) -> ProblemSpec:
    """Rebuild the constraint side of a problem from an exported ``_meta.json``."""
    q = meta.get("replication", {})
    g = meta.get("preference", {})
    aps = [replace(ap, replication=float(q.get(ap.id, ap.replication)),
                   preference=float(g.get(ap.id, ap.preference))) for ap in aps]
    return ProblemSpec(
        aps=tuple(aps),
        k=int(meta["k"]),
        lower=float(meta["lower"]),
        upper=meta["upper"],
        membership=meta["membership"],
        metric=meta["metric"],
    )
