"""Command-line entry point: ``slipgrasp {simulate,process,sweep,report}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import harness
from .signal_core import SignalError
from .slip_detector import DetectorConfigError

log = logging.getLogger("slipgrasp")


def _print_report(report: harness.RunReport) -> None:
    for key, value in report.metrics().items():
        print(f"{key}: {value}")
    for name, ok in report.checks.items():
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {report.details.get(name, '')}")


def cmd_simulate(args) -> int:
    cfg = harness.load_scenario(args.config)
    if args.seed is not None:
        cfg.rng_seed = args.seed
    if args.fs is not None:
        cfg.sample_rate = args.fs
    cfg.validate()
    out = Path(args.out_dir or f"runs/{cfg.name}")
    report = harness.run_scenario(cfg, out)
    _print_report(report)
    if args.plot:
        from .plotting import plot_run

        plot_run(out, cfg.controller.reference, cfg.controller.deadband_halfwidth)
    print(f"traces written to {out}")
    return 0 if report.passed else 1


def cmd_process(args) -> int:
    detector = harness.DetectorConfig(high=args.high, low=args.low)
    out = Path(args.out_dir or "processed")
    result = harness.process_recording(args.csv, out, detector, psd=args.psd)
    print(f"{len(result.events)} slip events")
    for e in result.events:
        print(f"  {e.onset:.3f}-{e.end:.3f} s  peak {e.peak_power:.3f}")
    if args.plot:
        from .plotting import plot_processed

        plot_processed(out, args.csv)
    return 0


def cmd_sweep(args) -> int:
    cfg, plant = harness.load_sweep(args.config) if args.config else (harness.SweepConfig(), {})
    if args.workers:
        cfg.workers = args.workers
    out = Path(args.out_dir or "sweep")
    rows, summary = harness.run_sweep(cfg, plant, out)
    for r in rows:
        print(f"E={r.youngs_modulus:10.2f}  bend={r.index_bend:7.2f} deg  travel={r.slider_travel:6.2f} mm")
    if summary.interpolated_band:
        lo, hi = summary.interpolated_band
        print(f"3-10 mm band: E = {lo:.0f}-{hi:.0f} N/mm^2")
    for reason in summary.reasons:
        print(f"flagged: {reason}")
    if args.plot:
        from .plotting import plot_sweep

        plot_sweep(out, summary.interpolated_band)
    return 1 if summary.flagged else 0


def cmd_report(args) -> int:
    report, mismatches = harness.verify_report(args.trace_dir)
    _print_report(report)
    for key in mismatches:
        print(f"[FAIL] integrity: {key} differs from stored report.csv")
    if args.plot:
        from .plotting import plot_run

        plot_run(args.trace_dir)
    return 0 if report.passed and not mismatches else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slipgrasp", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", help="output directory")
    common.add_argument("--plot", action="store_true", help="also write PNG figures")

    p = sub.add_parser("simulate", parents=[common], help="run a closed-loop scenario")
    p.add_argument("config", help="scenario YAML file")
    p.add_argument("--seed", type=int)
    p.add_argument("--fs", type=float, help="sample rate override [Hz]")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("process", parents=[common], help="filter and detect on a recorded CSV")
    p.add_argument("csv")
    p.add_argument("--high", type=float, default=harness.DetectorConfig.high)
    p.add_argument("--low", type=float, default=harness.DetectorConfig.low)
    p.add_argument("--psd", action="store_true", help="also write the raw power spectral density")
    p.set_defaults(func=cmd_process)

    p = sub.add_parser("sweep", parents=[common], help="cable elasticity sweep")
    p.add_argument("config", nargs="?", help="sweep YAML file (defaults to the 17-point sweep)")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="recompute and verify a run report")
    p.add_argument("trace_dir")
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (harness.ConfigError, DetectorConfigError, SignalError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
