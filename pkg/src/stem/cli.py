"""Command-line entry point.

Subcommands: ``validate``, ``solve``, ``clear`` and the experiment harness
(``sweep-misreport``, ``sweep-payments``, ``compare-baseline``). Every run
writes its CSVs plus a manifest.json to ``--out`` and touches no other paths.
Exit codes: 0 success, 1 validation failure, 2 solver or input error.

The seed used for a run is, in order of precedence: ``--seed``, the
``STEM_SEED`` environment variable, the config file's ``seed``.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, load_config
from .experiments import (
    FIG2_HEADER,
    FIG3_HEADER,
    TABLE1_HEADER,
    CaseStudy,
    baseline_compare,
    misreport_sweep,
    payment_sweep,
)
from .model import MarketConfig, TypeDistribution, validate_config
from .payments import build_counterfactuals, settle
from .runio import calibration_hash, write_csv, write_manifest
from .sampling import load_scenarios_csv
from .stage1 import solve_first_stage
from .stage2 import solve_second_stage
from .config import config_to_dict

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_ERROR = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stem",
        description="Two-stage stochastic electricity market clearing engine",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, out=True):
        p.add_argument("config", help="market configuration file (JSON)")
        p.add_argument("--seed", type=int, default=None, help="override the run seed")
        p.add_argument(
            "--scenarios", type=int, default=None, help="override the SAA scenario count"
        )
        p.add_argument(
            "--threads",
            type=int,
            default=os.cpu_count() or 1,
            help="worker threads (never changes results)",
        )
        if out:
            p.add_argument("--out", default="out", help="output directory")

    p_val = sub.add_parser("validate", help="check a configuration file")
    p_val.add_argument("config")

    p_solve = sub.add_parser("solve", help="first-stage market clearing")
    add_common(p_solve)

    p_clear = sub.add_parser(
        "clear", help="second stage plus settlement for realized types"
    )
    add_common(p_clear)
    p_clear.add_argument(
        "--realization",
        required=True,
        help="realized-types CSV (scenario dump schema, exactly one scenario)",
    )

    p_mis = sub.add_parser("sweep-misreport", help="utility vs reported variance")
    add_common(p_mis)
    p_mis.add_argument("--samples", type=int, default=2000)

    p_pay = sub.add_parser("sweep-payments", help="payments vs one producer's parameter")
    add_common(p_pay)
    p_pay.add_argument("--axis", choices=("variance", "downcost"), required=True)
    p_pay.add_argument("--samples", type=int, default=2000)

    p_base = sub.add_parser(
        "compare-baseline", help="proposed vs deterministic market emulation"
    )
    add_common(p_base)
    p_base.add_argument("--samples", type=int, default=2000)
    p_base.add_argument(
        "--assumed-variance",
        type=float,
        nargs="+",
        default=[100.0, 4.0],
        help="operator-imposed baseline variances for the deterministic columns",
    )

    return parser


def _load(args) -> tuple[MarketConfig, list[TypeDistribution]]:
    cfg, dists = load_config(args.config)
    seed = args.seed
    if seed is None and os.environ.get("STEM_SEED"):
        seed = int(os.environ["STEM_SEED"])
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    if getattr(args, "scenarios", None) is not None:
        cfg = replace(cfg, scenario_count=args.scenarios)
    return cfg, dists


def _validated(cfg, dists) -> list[str]:
    violations = validate_config(cfg, dists)
    for v in violations:
        print(f"violation: {v}", file=sys.stderr)
    return violations


def _case(cfg, dists) -> CaseStudy:
    return CaseStudy(
        config=cfg,
        distributions=tuple(dists),
        true_variances=tuple(d.cov[1][1] for d in dists),
    )


def cmd_validate(args) -> int:
    try:
        cfg, dists = load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID if isinstance(exc, ConfigError) else EXIT_ERROR
    if _validated(cfg, dists):
        return EXIT_INVALID
    print("ok")
    return EXIT_OK


def cmd_solve(args) -> int:
    started = time.perf_counter()
    cfg, dists = _load(args)
    if _validated(cfg, dists):
        return EXIT_INVALID
    sol = solve_first_stage(dists, cfg, threads=args.threads)
    out = Path(args.out)
    write_csv(
        out / "solution.csv",
        ["bitmask", "reserve", "dispatchable", "expected_cost"],
        [
            (
                sol.decision.bitmask_str(),
                sol.decision.reserve_capacity,
                sol.decision.dispatchable,
                sol.expected_cost,
            )
        ],
    )
    write_csv(
        out / "diagnostics.csv",
        ["bitmask", "reserve", "dispatchable", "value"],
        [
            ("".join("1" if b else "0" for b in mask), r, d, v)
            for mask, (r, d, v) in sorted(sol.per_bitmask_values.items())
        ],
    )
    write_manifest(
        out, "solve", args.config, cfg.seed, cfg.scenario_count, None,
        calibration_hash(config_to_dict(cfg, dists)), time.perf_counter() - started,
    )
    return EXIT_OK


def cmd_clear(args) -> int:
    started = time.perf_counter()
    cfg, dists = _load(args)
    if _validated(cfg, dists):
        return EXIT_INVALID
    try:
        scenarios = load_scenarios_csv(args.realization)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if len(scenarios) != 1:
        print(
            f"error: realization CSV must contain exactly one scenario, got {len(scenarios)}",
            file=sys.stderr,
        )
        return EXIT_ERROR
    realized = scenarios[0]
    if len(realized) != cfg.n:
        print(
            f"error: realization has {len(realized)} producers, config has {cfg.n}",
            file=sys.stderr,
        )
        return EXIT_ERROR
    cache = build_counterfactuals(dists, cfg, threads=args.threads)
    records = settle(cache, realized, cfg)
    stage2 = solve_second_stage(cache.full.decision, realized, cfg)
    out = Path(args.out)
    write_csv(
        out / "settlement.csv",
        ["producer", "t1", "t2", "cost", "utility"],
        [(r.producer_id, r.t1, r.t2, r.cost, r.utility) for r in records],
    )
    write_csv(
        out / "volumes.csv",
        ["producer", "volume"],
        list(enumerate(stage2.decision.volumes)),
    )
    write_csv(
        out / "decision.csv",
        ["field", "value"],
        [
            ("bitmask", cache.full.decision.bitmask_str()),
            ("reserve_capacity", cache.full.decision.reserve_capacity),
            ("dispatchable", cache.full.decision.dispatchable),
            ("activation", stage2.decision.activation),
            ("shedding", stage2.decision.shedding),
            ("stage2_value", stage2.value),
        ],
    )
    write_manifest(
        out, "clear", args.config, cfg.seed, cfg.scenario_count, None,
        calibration_hash(config_to_dict(cfg, dists)), time.perf_counter() - started,
    )
    return EXIT_OK


def cmd_sweep_misreport(args) -> int:
    started = time.perf_counter()
    cfg, dists = _load(args)
    if _validated(cfg, dists):
        return EXIT_INVALID
    rows = misreport_sweep(
        _case(cfg, dists), samples=args.samples, threads=args.threads
    )
    out = Path(args.out)
    write_csv(out / "fig2.csv", FIG2_HEADER, rows)
    write_manifest(
        out, "sweep-misreport", args.config, cfg.seed, cfg.scenario_count,
        args.samples, calibration_hash(config_to_dict(cfg, dists)),
        time.perf_counter() - started,
    )
    return EXIT_OK


def cmd_sweep_payments(args) -> int:
    started = time.perf_counter()
    cfg, dists = _load(args)
    if _validated(cfg, dists):
        return EXIT_INVALID
    rows = payment_sweep(
        _case(cfg, dists), axis=args.axis, samples=args.samples, threads=args.threads
    )
    out = Path(args.out)
    name = "fig3_variance.csv" if args.axis == "variance" else "fig3_downcost.csv"
    write_csv(out / name, FIG3_HEADER, rows)
    write_manifest(
        out, f"sweep-payments --axis {args.axis}", args.config, cfg.seed,
        cfg.scenario_count, args.samples,
        calibration_hash(config_to_dict(cfg, dists)), time.perf_counter() - started,
    )
    return EXIT_OK


def cmd_compare_baseline(args) -> int:
    started = time.perf_counter()
    cfg, dists = _load(args)
    if _validated(cfg, dists):
        return EXIT_INVALID
    rows = baseline_compare(
        _case(cfg, dists),
        assumed_variances=tuple(args.assumed_variance),
        samples=args.samples,
        threads=args.threads,
    )
    out = Path(args.out)
    write_csv(out / "table1.csv", TABLE1_HEADER, rows)
    write_manifest(
        out, "compare-baseline", args.config, cfg.seed, cfg.scenario_count,
        args.samples, calibration_hash(config_to_dict(cfg, dists)),
        time.perf_counter() - started,
    )
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "validate": cmd_validate,
        "solve": cmd_solve,
        "clear": cmd_clear,
        "sweep-misreport": cmd_sweep_misreport,
        "sweep-payments": cmd_sweep_payments,
        "compare-baseline": cmd_compare_baseline,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR if isinstance(exc, FileNotFoundError) else EXIT_INVALID
    except Exception as exc:  # solver and IO failures
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
