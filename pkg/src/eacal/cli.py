"""Command line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .campaign import io as cio
from .campaign.config import LABELS, load_config
from .campaign.report import attach_reference, run_calibration
from .campaign.simulate import run_simulation
from .errors import DataError, MissingReferenceError, NumericalError
from .estimator import GridSpec

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _u64(text):
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat key = value config file")
    common.add_argument("--preset", choices=LABELS, help="on-body preset")
    common.add_argument("--seed", type=_u64, help="overrides the config seed")
    common.add_argument("--out", type=Path, default=Path("eacal-out"), help="output directory")
    common.add_argument("--format", choices=("csv", "binary"), default="csv",
                        help="snapshot file format")
    common.add_argument("--sectors", type=_positive_int, help="number of angular sectors (default 36)")
    common.add_argument("--small", action="store_true",
                        help="scaled-down problem size (M=32, N=256, 0.8 m grid at 4 cm)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="eacal", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("simulate", parents=[common], help="synthesise a campaign")

    p = sub.add_parser("calibrate", parents=[common], help="calibrate from a snapshot file")
    p.add_argument("snapshots", type=Path)
    p.add_argument("--reference", type=Path, help="report (label 0) used for AMR")
    p.add_argument("--noise-variance", type=float,
                   help="known noise variance; estimated from the data if omitted")

    p = sub.add_parser("metrics", parents=[common], help="AMR/PAR tables from reports")
    p.add_argument("reports", type=Path, nargs="+")
    p.add_argument("--reference", type=Path, help="report (label 0) used for AMR")

    p = sub.add_parser("run", parents=[common], help="simulate and calibrate")
    p.add_argument("--reference", type=Path, help="report (label 0) used for AMR")
    return parser


def _config(args):
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.sectors is not None:
        overrides["report.sectors"] = args.sectors
    return load_config(args.config, preset=args.preset, small=args.small, overrides=overrides)


def _reference(args):
    return cio.load_report(args.reference) if args.reference else None


def cmd_simulate(args):
    config = _config(args)
    snapshots, truth = run_simulation(config)
    args.out.mkdir(parents=True, exist_ok=True)
    cio.export_snapshots(snapshots, args.out / cio.snapshot_filename(args.format), args.format)
    cio.write_truth(truth, args.out / "ground_truth.json")
    _write_config(config, args.out)
    print(f"simulated {len(snapshots)} snapshots, {len(truth.points)} scatterers -> {args.out}")
    return snapshots, truth, config


def _write_config(config, out):
    from .campaign.config import dump_config

    (out / "config.txt").write_text(dump_config(config), encoding="utf-8")


def _report_summary(report):
    cal = report.calibration
    print(f"label {report.label}: J = {cal.n_points}, mean |alpha| = {report.alpha_bar:.6g}")
    for key, avg, amr, par in cio.summary_rows(report):
        amr_s = "   n/a" if amr is None else f"{amr:8.2f}"
        par_s = "   n/a" if par is None else f"{par:8.2f}"
        print(f"  {key:>5}  avg {avg:.6g}  AMR {amr_s} dB  PAR {par_s} dB")


def cmd_calibrate(args):
    config = _config(args)
    snapshots = cio.import_snapshots(args.snapshots)
    p = config.params
    grid = GridSpec.centered(snapshots.agent, float(p["grid.half_width"]), float(p["grid.step"]))
    config = replace(config, grid=grid, pulse=snapshots.spec)
    noise = args.noise_variance
    if noise is None and p.get("noise.variance") is not None:
        noise = float(p["noise.variance"])
    report = run_calibration(snapshots, config, _reference(args), noise_variance=noise)
    cio.export_report(report, args.out)
    _report_summary(report)
    return report


def cmd_metrics(args):
    reports = [cio.load_report(path) for path in args.reports]
    reference = _reference(args)
    if reference is None:
        reference = next((r for r in reports if r.label == "0"), None)
    if reference is None:
        raise MissingReferenceError("AMR needs a reference report with label 0 (use --reference)")
    for r in reports:
        attach_reference(r, reference)
    args.out.mkdir(parents=True, exist_ok=True)
    text = cio.export_metrics(reports, args.out / "metrics.csv")
    sys.stdout.write(text)
    return reports


def cmd_run(args):
    snapshots, truth, config = cmd_simulate(args)
    report = run_calibration(
        snapshots, config, _reference(args), noise_variance=truth.noise_variance, truth=truth
    )
    cio.export_report(report, args.out)
    _report_summary(report)
    return report


COMMANDS = {
    "simulate": cmd_simulate,
    "calibrate": cmd_calibrate,
    "metrics": cmd_metrics,
    "run": cmd_run,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        COMMANDS[args.command](args)
    except (DataError, OSError) as exc:
        print(f"eacal: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"eacal: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"eacal: invalid input: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
