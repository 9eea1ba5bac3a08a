"""Command line interface: run sweeps, verify identities, inspect one trial.

Exit codes: 0 all checks passed, 2 at least one check failed, 3 bad
configuration or flags, 4 runtime/numerical/output failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from pathlib import Path

from .bounds import BoundSheet, check_trial
from .checks import run_config_checks, verify_suite
from .config import ConfigError, load_run_config
from .experiments import SweepSpec, run_sweep, run_trial
from .linalg import ConsistencyError, RngStream, SolverError
from .model import ModelConfig
from .plots import render_sweep_figure
from .reporting import write_aggregates_csv, write_records_csv, write_summary_json

EXIT_OK = 0
EXIT_CHECK_FAILED = 2
EXIT_CONFIG = 3
EXIT_RUNTIME = 4

THREADS_ENV = "LINFORGET_THREADS"

PREMISE_TEXT = ("bound premises: n >= d, p >= 20 n, gamma >= 1/sqrt(n d); "
                "the forgetting bound additionally needs p >= max(17 n, 1/gamma)")


def _default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="linforget",
        description=("Two-task overparameterized linear regression laboratory: "
                     "sequential minimum-norm fits, exact risks, forgetting "
                     "metrics, and high-probability bound verification."))
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a sweep and write records, aggregates, "
                                     "summary, and the sweep figure")
    run.add_argument("--config", required=True, help="JSON run configuration")
    run.add_argument("--out", required=True, help="output directory (created if missing)")
    run.add_argument("--seed", type=int, default=None, help="override the root seed")
    run.add_argument("--trials", type=int, default=None, help="override trials per point")
    run.add_argument("--threads", type=int, default=None,
                     help=f"worker threads (default ${THREADS_ENV} or 1)")

    verify = sub.add_parser("verify", help="run the identity and oracle-equivalence suite")
    verify.add_argument("--config", default=None, help="optional run configuration; its "
                                                       "check settings are honored")
    verify.add_argument("--negative-control", action="store_true",
                        help="diagnostic: shrink tolerances so the suite must fail")

    single = sub.add_parser("single", help="run one trial and print every quantity")
    single.add_argument("--d", type=int, required=True)
    single.add_argument("--n", type=int, required=True)
    single.add_argument("--p", type=int, required=True)
    single.add_argument("--gamma", type=float, required=True)
    single.add_argument("--seed", type=int, default=0)
    single.add_argument("--theta-norm", type=float, default=1.0)
    single.add_argument("--w-mode", default="axis-aligned",
                        choices=("axis-aligned", "random-rotation"))
    single.add_argument("--n-test", type=int, default=20000)
    single.add_argument("--variant", default="latent", choices=("latent", "surrogate"))
    return parser


def _apply_overrides(spec: SweepSpec, seed, trials) -> SweepSpec:
    if seed is not None:
        spec = dataclasses.replace(spec, root_seed=seed)
    if trials is not None:
        if trials < 1:
            raise ConfigError(f"--trials must be >= 1, got {trials}")
        spec = dataclasses.replace(spec, trials_per_point=trials)
    return spec


def cmd_run(args) -> int:
    try:
        cfg = load_run_config(args.config)
        spec = _apply_overrides(cfg.spec, args.seed, args.trials)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        if ">=" in str(exc):  # dimension-ordering violation: cite the premises
            print(PREMISE_TEXT, file=sys.stderr)
        return EXIT_CONFIG
    threads = args.threads if args.threads is not None else _default_threads()

    try:
        result = run_sweep(spec, workers=threads)
        checks = run_config_checks(result, cfg.checks)
    except (SolverError, ConsistencyError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        write_records_csv(result.records, out_dir / "records.csv")
        write_aggregates_csv(result.aggregates, out_dir / "aggregate.csv")
        write_summary_json(checks, out_dir / "summary.json")
        if cfg.figure:
            render_sweep_figure(result.aggregates, out_dir / "sweep.svg")
    except OSError as exc:
        print(f"output failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    failed_trials = sum(r.failed for r in result.records)
    if cfg.verbosity >= 1:
        print(f"ran {len(result.records)} trials over {len(spec.grid)} grid point(s); "
              f"{failed_trials} failed")
        for check in checks:
            print(_check_line(check))
        print(f"outputs in {out_dir}")
    all_ok = all(c["passed"] for c in checks if c["passed"] is not None)
    return EXIT_OK if all_ok else EXIT_CHECK_FAILED


def _check_line(check: dict) -> str:
    status = {True: "PASS", False: "FAIL", None: "N/A "}[check["passed"]]
    extras = {k: v for k, v in check.items() if k not in ("name", "passed")
              and not isinstance(v, (dict, list))}
    detail = ", ".join(f"{k}={_short(v)}" for k, v in extras.items())
    return f"[{status}] {check['name']}" + (f"  ({detail})" if detail else "")


def _short(v) -> str:
    if isinstance(v, float):
        return format(v, ".4g")
    return str(v)


def cmd_verify(args) -> int:
    tol_scale = 1e-12 if args.negative_control else 1.0
    gd = None
    try:
        if args.config is not None:
            gd = load_run_config(args.config).checks["gd_oracle"]
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        checks = verify_suite(tol_scale=tol_scale, gd=gd)
    except (SolverError, ConsistencyError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for check in checks:
        print(_check_line(check))
    all_ok = all(c["passed"] for c in checks if c["passed"] is not None)
    if args.negative_control and all_ok:
        print("negative control failed to fail; check harness is broken", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK if all_ok else EXIT_CHECK_FAILED


def cmd_single(args) -> int:
    try:
        cfg = ModelConfig.standard(args.d, args.n, args.p, args.gamma,
                                   theta_norm=args.theta_norm, w_mode=args.w_mode,
                                   seed=args.seed)
    except ValueError as exc:
        print(f"invalid instance: {exc}", file=sys.stderr)
        print(PREMISE_TEXT, file=sys.stderr)
        return EXIT_CONFIG
    try:
        rec = run_trial(cfg, RngStream(cfg.seed, 0), args.n_test, variant=args.variant)
    except (SolverError, ConsistencyError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if rec.failed:
        print("trial failed: solver could not complete", file=sys.stderr)
        return EXIT_RUNTIME

    sheet = BoundSheet.evaluate(cfg.d, cfg.n, cfg.p, cfg.gamma, cfg.theta_sq)
    checks = check_trial(sheet, r_a=rec.r_a, r_ba=rec.r_ba, forgetting=rec.forgetting,
                         ratio=rec.ratio, proj_energy=rec.proj_energy)

    def fmt(x):
        return "undefined" if x is None else format(x, ".6g")

    def flag(x):
        return "n/a" if x is None else ("ok" if x else "VIOLATED")

    print(f"instance      d={cfg.d} n={cfg.n} p={cfg.p} gamma={cfg.gamma:g} "
          f"seed={cfg.seed} variant={args.variant} w_mode={cfg.w_mode}")
    print(f"premise       {'holds' if rec.premise_ok else 'violated'} "
          f"(n >= d, p >= 20n, gamma >= 1/sqrt(nd))")
    print(f"sigma2 floor  {fmt(rec.sigma2)}")
    print(f"null risk     {fmt(rec.r_null)}")
    print(f"risk taskA    {fmt(rec.r_a)}   empirical {fmt(rec.emp_r_a)} "
          f"+/- {fmt(rec.emp_r_a_se)}")
    print(f"risk seq      {fmt(rec.r_ba)}   empirical {fmt(rec.emp_r_ba)} "
          f"+/- {fmt(rec.emp_r_ba_se)}")
    print(f"risk taskB@B  {fmt(rec.r_b_on_b)}   empirical {fmt(rec.emp_r_b_on_b)} "
          f"+/- {fmt(rec.emp_r_b_on_b_se)}")
    print(f"forgetting    {fmt(rec.forgetting)}")
    print(f"ratio         {fmt(rec.ratio)}")
    print(f"proj energy   {fmt(rec.proj_energy)}")
    print(f"dual gap      {fmt(rec.dual_gap)}")
    print(f"bound single      {fmt(sheet.b_single)}  [{flag(checks.single)}]")
    print(f"bound terminal    {fmt(sheet.b_terminal)}  [{flag(checks.terminal)}]")
    print(f"bound forgetting  {fmt(sheet.b_forgetting)}  [{flag(checks.forgetting)}]")
    print(f"bound ratio       {fmt(sheet.b_ratio)}  [{flag(checks.ratio)}]")
    print(f"bound projection  {fmt(sheet.b_proj)}  [{flag(checks.projection)}]")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args)
    if args.command == "verify":
        return cmd_verify(args)
    return cmd_single(args)


if __name__ == "__main__":
    sys.exit(main())
