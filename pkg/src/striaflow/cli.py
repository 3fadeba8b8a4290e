"""Command line front end.

Subcommands:
    run       advance a configured scenario, writing CSV/JSON/snapshots
    validate  run the module invariant battery
    converge  temporal and spatial refinement studies
    diagnose  recompute the scalar record for a stored snapshot

Exit codes: 0 success; 1 invariant violation, failed validation, or raised
convergence flag; 2 configuration problems; 3 I/O and snapshot problems.
"""

from __future__ import annotations

import argparse
import math
import sys

from .config import ConfigError, load_config
from .diagnostics import (
    DegenerateFamilyError,
    InteriorSampleError,
    RECORD_COLUMNS,
)
from .dynamics import IntegrationError
from .pressure import ConvergenceError
from .runner import InvariantViolation, converge, diagnose_snapshot, run, validate
from .snapshot_io import SnapshotError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="striaflow",
        description="pseudo-spectral simulator and diagnostics for stratified 2-D flow",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="advance a configured scenario to t_end")
    p_run.add_argument("--config", required=True, help="INI run configuration")
    p_run.add_argument("--out", required=True, help="output directory")

    p_val = sub.add_parser("validate", help="run every module invariant check")
    p_val.add_argument("--n", type=int, default=64, help="grid size for the checks")
    p_val.add_argument("--seed", type=int, default=0)

    p_conv = sub.add_parser("converge", help="dt and grid refinement studies")
    p_conv.add_argument("--config", required=True, help="INI run configuration")
    p_conv.add_argument("--levels", type=int, default=3)
    p_conv.add_argument("--out", default=None, help="optional output directory")

    p_diag = sub.add_parser("diagnose", help="recompute diagnostics for a snapshot")
    p_diag.add_argument("--snapshot", required=True, help="snapshot directory")
    p_diag.add_argument("--p", type=float, default=math.inf,
                        help="velocity Lebesgue exponent (default inf)")
    p_diag.add_argument("--q", type=float, default=2.0,
                        help="vorticity Lebesgue exponent (default 2)")
    return parser


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    result = run(cfg, out_dir=args.out)
    s = result.summary
    print(f"scenario {s['scenario']} on n={s['n']}: {s['steps']} steps to t={s['t_final']:.6g}")
    print(f"records {s['records']}, integral of |grad u| {s['u_integral']:.6g}")
    print(f"lifespan bound {s['lifespan_bound']:.6g} "
          f"(run covered {s['t_final'] / s['lifespan_bound']:.3g} of it)"
          if s["lifespan_bound"] else "lifespan bound unavailable")
    print(f"density range [{s['rho_final_range'][0]:.9g}, {s['rho_final_range'][1]:.9g}] "
          f"within initial [{s['rho_initial_range'][0]:.9g}, {s['rho_initial_range'][1]:.9g}]")
    print(f"outputs in {args.out}")
    return 0


def _cmd_validate(args) -> int:
    results = validate(n=args.n, seed=args.seed)
    width = max(len(r.name) for r in results)
    failed = 0
    for r in results:
        mark = "ok  " if r.passed else "FAIL"
        print(f"{mark} {r.name:<{width}}  {r.detail}")
        failed += 0 if r.passed else 1
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 0 if failed == 0 else 1


def _cmd_converge(args) -> int:
    cfg = load_config(args.config)
    report = converge(cfg, levels=args.levels, out_dir=args.out)
    t = report["temporal"]
    print("temporal: dt " + ", ".join(f"{d:.4g}" for d in t["dt"]))
    print("  successive differences (omega): "
          + ", ".join(f"{d:.3e}" for d in t["diffs_omega"]))
    print(f"  observed order {t['order']:.3f}" + ("  FLAG" if t["flag"] else ""))
    s = report["spatial"]
    print(f"spatial: n {s['n']} against reference n={s['reference_n']}")
    print("  errors (omega): " + ", ".join(f"{e:.3e}" for e in s["errors_omega"]))
    print("  ratios per doubling: " + ", ".join(f"{r:.2f}" for r in s["ratios"])
          + ("  FLAG" if s["flag"] else ""))
    if report["flag"]:
        print("refinement flag raised: results are outside the expected envelopes",
              file=sys.stderr)
        return 1
    return 0


def _cmd_diagnose(args) -> int:
    rec = diagnose_snapshot(args.snapshot, p=args.p, q=args.q)
    row = rec.csv_row()
    width = max(len(c) for c in RECORD_COLUMNS)
    for name, value in zip(RECORD_COLUMNS, row):
        print(f"{name:<{width}}  {value if value != '' else '-'}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors, matching the config code
        return int(exc.code or 0)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "validate":
            return _cmd_validate(args)
        if args.command == "converge":
            return _cmd_converge(args)
        if args.command == "diagnose":
            return _cmd_diagnose(args)
        parser.error(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (
        InvariantViolation,
        IntegrationError,
        ConvergenceError,
        DegenerateFamilyError,
        InteriorSampleError,
    ) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1
    except SnapshotError as exc:
        print(f"snapshot error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
