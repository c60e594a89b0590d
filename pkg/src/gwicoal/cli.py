"""Command line interface.

Five subcommands: `simulate` runs finite-n experiments, `limit` evaluates the
limiting quantities on their own, `exact` tabulates closed-form references,
`compare` joins a simulation report with a limit table, and `sweep` scans
horizons.  Every report path writes canonical JSON, plot-ready CSV and PNG
figures into the output directory.

Exit codes: 0 success, 1 at least one comparison failed, 2 bad configuration
or domain error, 3 resource budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import figures
from .config import ExperimentConfig, load_config
from .errors import ExplosionError, GwicoalError, ResourceLimit, SchemaError
from .exact import enumerate_tiny, sole_survivor_curve, survival_probabilities
from .harness import (
    ExperimentReport,
    compare,
    model_hash,
    run_finite_n,
    run_plain_gw_study,
    run_population_study,
    run_sweep,
    write_report_json,
    write_rows_csv,
)
from .limits import limit_pairwise_window, oldest_clan_tail_limit
from .seeding import LIMIT_STREAM, substream
from .stats import EstimateWithCI

EXIT_OK = 0
EXIT_COMPARISON_FAILED = 1
EXIT_CONFIG = 2
EXIT_RESOURCE = 3


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", type=int, help="master seed (beats config and env)")
    parser.add_argument("--out", help="output directory (default from config)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gwicoal",
        description="coalescence statistics for critical branching with immigration",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a finite-n experiment")
    _common_flags(p)
    p.add_argument("--n", type=int, help="horizon")
    p.add_argument("--replicates", type=int, help="number of forests")
    p.add_argument("--u", type=float, action="append", dest="u_grid",
                   help="window fraction; repeat for a grid")
    p.add_argument("--epsilon", type=float, help="limit-measure truncation point")
    p.add_argument("--slack", type=float, help="extra comparison allowance")
    p.add_argument("--draws", type=int, dest="limit_draws",
                   help="Monte Carlo draws per limit reference")
    p.add_argument("--threads", type=int, help="worker processes")
    p.add_argument("--population-only", action="store_true",
                   help="skip genealogies; population, clan and founder statistics only")
    p.add_argument("--baseline", action="store_true",
                   help="single-ancestor model without immigration")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")

    p = sub.add_parser("limit", help="evaluate the limiting quantities")
    _common_flags(p)
    p.add_argument("--u", type=float, action="append", dest="u_grid")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--draws", type=int, dest="limit_draws")
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("exact", help="tabulate closed-form references")
    _common_flags(p)
    p.add_argument("--n", type=int, help="horizon for the survival curves")
    p.add_argument("--exact-n", type=int, dest="exact_n",
                   help="horizon for full history enumeration")
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("compare", help="join a simulation report with a limit table")
    p.add_argument("--report", required=True, help="finite-n report JSON")
    p.add_argument("--limits", required=True, help="limit report JSON")
    p.add_argument("--slack", type=float, help="extra comparison allowance")
    p.add_argument("--out", help="output directory (default: alongside the report)")
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("sweep", help="scan horizons at a fixed window fraction")
    _common_flags(p)
    p.add_argument("--n-grid", type=int, nargs="+", dest="n_grid")
    p.add_argument("--u", type=float, help="window fraction (default 0.5)")
    p.add_argument("--replicates", type=int)
    p.add_argument("--slack", type=float)
    p.add_argument("--no-figures", action="store_true")

    return parser


def _print_targets(report: ExperimentReport) -> None:
    for t in report.targets:
        mark = t.verdict or "----"
        ref = "" if t.reference_value is None else f" ref={t.reference_value:.6f}"
        print(f"[{mark:4}] {t.name}: {t.estimate.value:.6f} "
              f"(stderr {t.estimate.stderr:.2e}){ref}")


def _exit_for(report: ExperimentReport) -> int:
    return EXIT_COMPARISON_FAILED if report.failed_targets() else EXIT_OK


def _out_dir(cfg: ExperimentConfig, args) -> str:
    out = args.out if getattr(args, "out", None) else cfg.output_dir
    os.makedirs(out, exist_ok=True)
    return out


def _cmd_simulate(args) -> int:
    cfg = load_config(
        args.config, n=args.n, replicates=args.replicates,
        u_grid=tuple(args.u_grid) if args.u_grid else None,
        epsilon=args.epsilon, slack=args.slack, limit_draws=args.limit_draws,
        threads=args.threads,
    )
    seed = cfg.resolved_seed(args.seed)
    out = _out_dir(cfg, args)
    if args.baseline:
        offspring = cfg.params().offspring
        report = run_plain_gw_study(
            offspring, cfg.n, cfg.u_grid, cfg.replicates, seed,
            slack=cfg.slack, limit_draws=cfg.limit_draws, threads=cfg.threads,
            particle_cap=cfg.particle_cap,
        )
        stem, render = "plain", figures.render_plain_report
    elif args.population_only:
        report = run_population_study(
            cfg.params(), cfg.n, cfg.u_grid, cfg.replicates, seed,
            slack=cfg.slack, particle_cap=cfg.particle_cap,
        )
        stem, render = "population", figures.render_population_report
    else:
        report = run_finite_n(
            cfg.params(), cfg.n, cfg.u_grid, cfg.replicates, seed,
            epsilon=cfg.epsilon, slack=cfg.slack, limit_draws=cfg.limit_draws,
            threads=cfg.threads, particle_cap=cfg.particle_cap,
        )
        stem, render = "finite", figures.render_finite_report
    write_report_json(report, os.path.join(out, f"{stem}_report.json"))
    write_rows_csv(os.path.join(out, f"{stem}_windows.csv"), report.tables["by_u"])
    if not args.no_figures:
        render(report, out)
    _print_targets(report)
    print(f"wrote {stem}_report.json, {stem}_windows.csv in {out}")
    return _exit_for(report)


def _cmd_limit(args) -> int:
    cfg = load_config(
        args.config,
        u_grid=tuple(args.u_grid) if args.u_grid else None,
        epsilon=args.epsilon, limit_draws=args.limit_draws,
    )
    seed = cfg.resolved_seed(args.seed)
    out = _out_dir(cfg, args)
    params = cfg.params()
    report = ExperimentReport(
        kind="limit",
        seed=seed,
        params_hash=model_hash(params.offspring.pmf, params.immigration.pmf),
        config={
            "offspring": params.offspring.pmf.tolist(),
            "immigration": params.immigration.pmf.tolist(),
            "u_grid": list(cfg.u_grid), "epsilon": cfg.epsilon,
            "limit_draws": cfg.limit_draws,
        },
    )
    rows = []
    for i, u in enumerate(cfg.u_grid):
        value = limit_pairwise_window(
            u, params, cfg.limit_draws, substream(seed, LIMIT_STREAM, i),
            epsilon=cfg.epsilon,
        )
        rows.append({
            "u": u, "value": value.value, "stderr": value.stderr,
            "draws": value.draws, "bias_bound": value.bias_bound,
            "tau_limit": oldest_clan_tail_limit(u, params.gamma),
        })
    report.tables["by_u"] = rows
    report.notes["epsilon"] = cfg.epsilon
    write_report_json(report, os.path.join(out, "limit_report.json"))
    write_rows_csv(os.path.join(out, "limit_values.csv"), rows)
    if not args.no_figures:
        figures.render_limit_table(rows, out)
    for r in rows:
        print(f"u={r['u']:g}: {r['value']:.6f} (stderr {r['stderr']:.2e})")
    print(f"wrote limit_report.json, limit_values.csv in {out}")
    return EXIT_OK


def _cmd_exact(args) -> int:
    cfg = load_config(args.config, n=args.n, exact_n=args.exact_n)
    out = _out_dir(cfg, args)
    params = cfg.params()
    q = survival_probabilities(params.offspring, cfg.n)
    curve = sole_survivor_curve(params, cfg.n)
    rows = [
        {"m": m, "survival": float(q[m]), "single_clan": float(curve[m])}
        for m in range(cfg.n + 1)
    ]
    table = enumerate_tiny(params, cfg.exact_n, history_cap=cfg.history_cap)
    report = ExperimentReport(
        kind="exact",
        seed=0,
        params_hash=model_hash(params.offspring.pmf, params.immigration.pmf),
        config={
            "offspring": params.offspring.pmf.tolist(),
            "immigration": params.immigration.pmf.tolist(),
            "n": cfg.n, "exact_n": cfg.exact_n,
        },
        tables={"survival": rows, "enumeration": table.to_jsonable()},
        notes={"history_count": table.history_count},
    )
    write_report_json(report, os.path.join(out, "exact_report.json"))
    write_rows_csv(os.path.join(out, "exact_survival.csv"), rows)
    if not args.no_figures:
        figures.render_exact_report(rows, out)
    print(f"survival P(alive at n={cfg.n}) = {q[cfg.n]:.6g}")
    print(f"single surviving clan at n={cfg.n}: {curve[cfg.n]:.6g}")
    print(f"enumerated {table.history_count} histories at n={cfg.exact_n}")
    print(f"wrote exact_report.json, exact_survival.csv in {out}")
    return EXIT_OK


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise SchemaError(f"{path} must hold a JSON object")
    return data


def _cmd_compare(args) -> int:
    report_doc = _load_json(args.report)
    limit_doc = _load_json(args.limits)
    for doc, path, kind in ((report_doc, args.report, "finite_n"),
                            (limit_doc, args.limits, "limit")):
        if doc.get("kind") != kind:
            raise SchemaError(f"{path}: expected a {kind!r} report, got {doc.get('kind')!r}")
        if "tables" not in doc or "by_u" not in doc["tables"]:
            raise SchemaError(f"{path}: missing the by_u table")
    if report_doc.get("params_hash") != limit_doc.get("params_hash"):
        raise SchemaError(
            "the two files describe different models: "
            f"{report_doc.get('params_hash')} vs {limit_doc.get('params_hash')}"
        )
    slack = args.slack if args.slack is not None else report_doc["config"].get("slack", 0.0)
    limits_by_u = {round(r["u"], 12): r for r in limit_doc["tables"]["by_u"]}
    rows = []
    for r in report_doc["tables"]["by_u"]:
        key = round(r["u"], 12)
        if key not in limits_by_u:
            raise SchemaError(f"limit table has no entry for u={r['u']:g}")
        lim = limits_by_u[key]
        est = EstimateWithCI(r["ratio_estimate"], r["ratio_stderr"], 0)
        verdict = compare(est, EstimateWithCI(lim["value"], lim["stderr"], 0), slack)
        rows.append({
            "u": r["u"], "k": r["k"],
            "estimate": est.value, "estimate_stderr": est.stderr,
            "limit_value": lim["value"], "limit_stderr": lim["stderr"],
            "difference": verdict.difference, "allowance": verdict.allowance,
            "verdict": verdict.label,
        })
    out = args.out or os.path.dirname(os.path.abspath(args.report))
    os.makedirs(out, exist_ok=True)
    doc = {
        "kind": "compare",
        "params_hash": report_doc["params_hash"],
        "report": os.path.basename(args.report),
        "limits": os.path.basename(args.limits),
        "slack": slack,
        "rows": rows,
    }
    with open(os.path.join(out, "compare_report.json"), "w") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")
    write_rows_csv(os.path.join(out, "compare_windows.csv"), rows)
    if not args.no_figures:
        figures.render_compare_report(rows, out)
    for r in rows:
        print(f"[{r['verdict']:4}] u={r['u']:g}: estimate {r['estimate']:.6f} "
              f"vs limit {r['limit_value']:.6f} "
              f"(diff {r['difference']:.2e}, allowed {r['allowance']:.2e})")
    failed = [r for r in rows if r["verdict"] == "FAIL"]
    print(f"wrote compare_report.json, compare_windows.csv in {out}")
    return EXIT_COMPARISON_FAILED if failed else EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = load_config(
        args.config,
        n_grid=tuple(args.n_grid) if args.n_grid else None,
        replicates=args.replicates, slack=args.slack,
    )
    seed = cfg.resolved_seed(args.seed)
    out = _out_dir(cfg, args)
    u = args.u if args.u is not None else 0.5
    report = run_sweep(
        cfg.params(), cfg.n_grid, u, cfg.replicates, seed,
        slack=cfg.slack, particle_cap=cfg.particle_cap,
    )
    write_report_json(report, os.path.join(out, "sweep_report.json"))
    write_rows_csv(os.path.join(out, "sweep_by_n.csv"), report.tables["by_n"])
    if not args.no_figures:
        figures.render_sweep_report(report, out)
    _print_targets(report)
    print(f"wrote sweep_report.json, sweep_by_n.csv in {out}")
    return _exit_for(report)


_COMMANDS = {
    "simulate": _cmd_simulate,
    "limit": _cmd_limit,
    "exact": _cmd_exact,
    "compare": _cmd_compare,
    "sweep": _cmd_sweep,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ResourceLimit, ExplosionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except GwicoalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
