"""Command-line entry point: ``edgepack solve|scenario|eval|synth|sweep``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import scenario_io as sio
from .metrics import (
    DEFAULT_QUANTILES,
    TABLE_HEADER,
    euclidean_matrix,
    evaluate,
    format_table,
    per_ap_distances,
    table_row,
)
from .model import Infeasible, TimeLimitNoIncumbent
from .validator import check

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_INPUT = 3
EXIT_LIMIT = 4

log = logging.getLogger("edgepack")


def _ids(text):
    return [s.strip() for s in text.split(",") if s.strip()] if text else None


def _quantiles(text):
    try:
        qs = tuple(float(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad quantile list {text!r}") from None
    if not qs or any(not 0 < a <= 1 for a in qs):
        raise argparse.ArgumentTypeError("quantiles must lie in (0, 1]")
    return qs


def _read_aps(path):
    return sio.bundled_city() if path is None else sio.load_aps(path)


def _emit(result, out, as_json):
    sol, report = result.solution, result.report
    if out:
        paths = sio.export_solution(sol, result.spec.aps, out, spec=result.spec)
        for p in paths:
            log.info("wrote %s", p)
    if as_json:
        payload = {
            "objective": sol.objective,
            "servers": [result.spec.aps[c].id for c in sol.servers],
            "restart_index": sol.restart_index,
            "converged": sol.converged,
            "iterations": sol.iterations,
            "gap": sol.gap,
            "warnings": list(sol.warnings),
            "report": report.to_dict(),
        }
        print(json.dumps(payload, indent=2))
    else:
        print(f"objective {sol.objective:.6g} (restart {sol.restart_index}, "
              f"{sol.iterations} iterations, converged={sol.converged})")
        print(format_table([table_row("result", report)]))
        for w in sol.warnings:
            print(f"note: {w}")


def cmd_solve(args):
    aps = sio.load_aps(args.aps)
    cfg = sio.load_config(args.config)
    if args.workers is not None:
        cfg["workers"] = args.workers
    spec = sio.spec_from_config(cfg, aps, base_dir=Path(args.config).parent)
    qs = tuple(cfg.get("eval_quantiles", DEFAULT_QUANTILES))
    _emit(sio.run_spec(spec, qs), args.out, args.json)
    return EXIT_OK


def cmd_scenario(args):
    aps = _read_aps(args.aps)
    settings = {"restarts": args.restarts, "seed": args.seed, "workers": args.workers}
    if args.node_limit is not None:
        settings["hard_alloc_node_limit"] = args.node_limit
    result = sio.solve_scenario(
        args.name,
        aps,
        k_override=args.k,
        preferred=_ids(args.preferred),
        replicated=_ids(args.replicated),
        quantiles=args.quantiles,
        **settings,
    )
    _emit(result, args.out, args.json)
    return EXIT_OK


def cmd_eval(args):
    aps = sio.load_aps(args.aps)
    sol, meta = sio.load_solution(args.solution, aps)
    dist = euclidean_matrix(aps)
    report = evaluate(aps, sol, dist_eval=dist, quantiles=args.quantiles)
    per_ap = per_ap_distances(dist, aps, sol, _ids(args.ap_filter)) if args.ap_filter else []
    problems = []
    if meta is not None:
        spec = sio.spec_from_meta(meta, aps)
        # custom distances are not stored alongside the solution
        problems = check(spec, sol, check_objective=meta["metric"] != "custom")
    elif args.strict:
        print("error: --strict needs the _meta.json written by solve", file=sys.stderr)
        return EXIT_INPUT
    if args.json:
        payload = {"report": report.to_dict(), "violations": problems}
        if per_ap:
            payload["aps"] = per_ap
        print(json.dumps(payload, indent=2))
    else:
        print(format_table([table_row(Path(args.solution).name, report)]))
        for row in per_ap:
            dists = ", ".join(f"{v:.4g}" for v in row["distance"])
            print(f"{row['id']}: w={row['w']:g} servers={row['servers']} distance=[{dists}]")
        for p in problems:
            print(f"violation: {p}")
    if problems and args.strict:
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_synth(args):
    spec = sio.SyntheticCitySpec(
        n_aps=args.n,
        n_hotspots=args.hotspots,
        hotspot_fraction=args.fraction,
        log_mean=args.log_mean,
        log_sd=args.log_sd,
        seed=args.seed,
    )
    aps = sio.generate_synthetic(spec)
    sio.write_aps(aps, args.out)
    total = sum(ap.workload for ap in aps)
    print(f"wrote {len(aps)} APs to {args.out} (total workload {total:g})")
    return EXIT_OK


def cmd_sweep(args):
    aps = sio.load_aps(args.aps)
    configs = sorted(Path(args.configs).glob("*.json"))
    if not configs:
        raise sio.InputError(f"no *.json configs in {args.configs}")
    rows = []
    for path in configs:
        cfg = sio.load_config(path)
        if args.workers is not None:
            cfg["workers"] = args.workers
        spec = sio.spec_from_config(cfg, aps, base_dir=path.parent)
        result = sio.run_spec(spec, tuple(cfg.get("eval_quantiles", DEFAULT_QUANTILES)))
        rows.append(table_row(cfg.get("name", path.stem), result.report))
        log.info("%s: objective %.6g", path.stem, result.solution.objective)
    with open(args.out, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(TABLE_HEADER)
        out.writerows(rows)
    print(format_table(rows))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="edgepack", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve an AP table with a JSON config")
    p.add_argument("--aps", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--workers", type=int)
    p.add_argument("--json", action="store_true", help="print a JSON summary")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("scenario", help="run a named preset (M1-M6, F1-F3, TIGHT)")
    p.add_argument("--name", required=True, type=str.upper, choices=sorted(sio.SCENARIOS))
    p.add_argument("--aps", help="AP table; defaults to the bundled synthetic city")
    p.add_argument("--preferred", help="comma-separated AP ids given the location preference")
    p.add_argument("--replicated", help="comma-separated AP ids served twice")
    p.add_argument("--k", type=int, help="override the preset server count")
    p.add_argument("--restarts", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--node-limit", type=int)
    p.add_argument("--quantiles", type=_quantiles, default=DEFAULT_QUANTILES)
    p.add_argument("--out")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("eval", help="report metrics for an exported solution")
    p.add_argument("--aps", required=True)
    p.add_argument("--solution", required=True, help="path prefix used by --out")
    p.add_argument("--quantiles", type=_quantiles, default=DEFAULT_QUANTILES)
    p.add_argument("--strict", action="store_true", help="exit 2 on constraint violations")
    p.add_argument("--ap-filter", help="comma-separated AP ids to list with their distances")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic city AP table")
    p.add_argument("--n", type=int, default=450)
    p.add_argument("--hotspots", type=int, default=3)
    p.add_argument("--fraction", type=float, default=0.7)
    p.add_argument("--log-mean", type=float, default=sio.BUNDLED_CITY.log_mean)
    p.add_argument("--log-sd", type=float, default=sio.BUNDLED_CITY.log_sd)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("sweep", help="solve every config in a directory into one table")
    p.add_argument("--aps", required=True)
    p.add_argument("--configs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except TimeLimitNoIncumbent as exc:
        print(f"no incumbent: {exc}", file=sys.stderr)
        return EXIT_LIMIT
    except (sio.InputError, ValueError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
