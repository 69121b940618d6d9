"""
Command-line surface: run a scenario config, render a manifest report, and
the resonance passthrough commands that print CSV to stdout.
"""

import argparse
import csv
import sys
import time
from typing import Optional, Sequence, Tuple

from experiment_config import ConfigError, load_config
from experiment_runner import MARKERS, __version__, report, run, load_manifest
from lattice_resonance import (
    circle_decay_probe,
    circle_points,
    enumerate_resonant_triples,
    enumerate_resonant_triples_fast,
    weight_sum_profile,
)

EXIT_PASS = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_INCONCLUSIVE = 3


def _pair(text: str) -> Tuple[int, int]:
    try:
        a, b = (int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two integers as A,B, got '{text}'")
    return a, b


def _progress(message: str):
    print(message, file=sys.stderr)


def cmd_run(args) -> int:
    try:
        config = load_config(args.config)
    except ConfigError as e:
        print(f"✗ Config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    manifest = run(config)
    print(f"{MARKERS[manifest.status]} {config.scenario}: manifest written to {config.output_dir / 'manifest.json'}")
    return manifest.exit_code


def cmd_report(args) -> int:
    fmt = "json" if args.json else "text"
    try:
        text = report(args.manifest, fmt)
        manifest = load_manifest(args.manifest)
    except (FileNotFoundError, ValueError) as e:
        print(f"✗ {e}", file=sys.stderr)
        return EXIT_CONFIG
    print(text)
    return manifest.exit_code


def cmd_resonance_enum(args) -> int:
    start = time.time()
    enumerate_fn = enumerate_resonant_triples_fast if args.fast else enumerate_resonant_triples
    try:
        triples = enumerate_fn(args.j, args.trunc)
    except ValueError as e:
        print(f"✗ {e}", file=sys.stderr)
        return EXIT_CONFIG
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["j1_a", "j1_b", "j2_a", "j2_b", "j3_a", "j3_b"])
    for t in triples:
        writer.writerow([t.j1.a, t.j1.b, t.j2.a, t.j2.b, t.j3.a, t.j3.b])
    _progress(f"✓ {len(triples)} resonant triples for j={args.j} at trunc {args.trunc} in {time.time() - start:.2f}s")
    return EXIT_PASS


def cmd_resonance_weight_sum(args) -> int:
    start = time.time()
    try:
        profile = weight_sum_profile(args.jmax, args.trunc)
    except ValueError as e:
        print(f"✗ {e}", file=sys.stderr)
        return EXIT_CONFIG
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["a", "b", "trunc", "weight_sum"])
    for j in sorted(profile):
        for trunc in args.trunc:
            writer.writerow([j.a, j.b, trunc, repr(profile[j][trunc])])
    _progress(f"✓ Weight sums for |j| <= {args.jmax} in {time.time() - start:.2f}s")
    return EXIT_PASS


def cmd_resonance_circle(args) -> int:
    try:
        rows = circle_decay_probe(args.center2x, args.r2x4, args.amin)
        count = len(circle_points(args.center2x, args.r2x4))
    except ValueError as e:
        print(f"✗ {e}", file=sys.stderr)
        return EXIT_CONFIG
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["amin", "circle_sum", "scaled", "ratio_to_calibration"])
    for row in rows:
        ratio = "" if row.ratio_to_calibration is None else repr(row.ratio_to_calibration)
        writer.writerow([repr(row.amin), repr(row.circle_sum), repr(row.scaled), ratio])
    _progress(f"✓ {count} lattice points on the circle")
    return EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wglab",
        description="Spectral NLS laboratory for the waveguide R^2 x T^2 and its resonant system",
    )
    parser.add_argument("--version", action="version", version=f"wglab {__version__}")
    subparsers = parser.add_subparsers(dest="command")

    # --- run ---
    run_parser = subparsers.add_parser("run", help="Run the scenario described by a JSON config")
    run_parser.add_argument("config", help="Path to the experiment config (JSON)")
    run_parser.set_defaults(handler=cmd_run)

    # --- report ---
    report_parser = subparsers.add_parser("report", help="Summarize a run manifest")
    report_parser.add_argument("manifest", help="Path to manifest.json")
    report_parser.add_argument("--json", action="store_true", help="Output as JSON")
    report_parser.set_defaults(handler=cmd_report)

    # --- resonance ---
    res_parser = subparsers.add_parser("resonance", help="Resonance-set combinatorics as CSV")
    res_sub = res_parser.add_subparsers(dest="resonance_command")

    enum_parser = res_sub.add_parser("enum", help="List the resonant triples of one output index")
    enum_parser.add_argument("--j", type=_pair, required=True, help="Output index as A,B")
    enum_parser.add_argument("--trunc", type=int, required=True, help="l-infinity truncation radius")
    enum_parser.add_argument("--fast", action="store_true", help="Use the orthogonal-pair enumerator")
    enum_parser.set_defaults(handler=cmd_resonance_enum)

    ws_parser = res_sub.add_parser("weight-sum", help="Weighted resonant sums for |j| <= jmax")
    ws_parser.add_argument("--jmax", type=int, required=True, help="Output-index radius")
    ws_parser.add_argument("--trunc", type=int, nargs="+", required=True, help="One or more truncation radii")
    ws_parser.set_defaults(handler=cmd_resonance_weight_sum)

    circle_parser = res_sub.add_parser("circle", help="Decay probe of a lattice circle sum")
    circle_parser.add_argument("--center2x", type=_pair, required=True, help="Doubled centre as A,B")
    circle_parser.add_argument("--r2x4", type=int, required=True, help="Quadrupled squared radius")
    circle_parser.add_argument("--amin", type=float, nargs="+", required=True, help="Lower cutoffs (>= 1)")
    circle_parser.set_defaults(handler=cmd_resonance_circle)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "handler", None) is None:
        parser.print_help()
        return EXIT_PASS if args.command is None else EXIT_CONFIG
    return args.handler(args)
