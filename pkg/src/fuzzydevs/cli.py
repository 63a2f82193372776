"""Command-line entry point: ``fuzzydevs {run,compare,fis-eval,export}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict

from . import scenario as sc
from .devs import DevsError
from .fuzzy import FuzzyError

log = logging.getLogger("fuzzydevs")


def _write_trace(result, path, label=None):
    target = path if label is None else _suffixed(path, label)
    result.trace.export(target)
    log.info("trace written to %s", target)


def _suffixed(path, label):
    head, dot, ext = str(path).rpartition(".")
    return f"{head}.{label}.{ext}" if dot else f"{path}.{label}"


def cmd_run(args) -> int:
    s = sc.load_scenario(args.scenario)
    if args.normalized:
        with open(args.normalized, "w") as fh:
            fh.write(sc.dump_scenario(s))
    result = sc.run_scenario(s, trace=bool(args.trace) or s.trace)
    sys.stdout.write(sc.metrics_table(result.metrics))
    if result.trace.enabled:
        print(f"trace_sha256\t{result.trace_digest}")
    if args.trace:
        _write_trace(result, args.trace)
    if args.json:
        with open(args.json, "w") as fh:
            record = {"mode": result.mode, "metrics": asdict(result.metrics)}
            if result.trace.enabled:
                record["trace_sha256"] = result.trace_digest
            json.dump(record, fh, indent=2)
    if args.grid:
        sc.export_grid(result.ignition_grid, "csv", args.grid)
    if args.figure:
        from .plotting import plot_ignition_map
        plot_ignition_map(result.ignition_grid, args.figure,
                          title=f"Ignition time, {result.mode} (min)")
    return 0


def cmd_compare(args) -> int:
    s = sc.load_scenario(args.scenario)
    cmp = sc.compare(s, trace=bool(args.trace) or s.trace)
    sys.stdout.write(cmp.table())
    if args.trace:
        _write_trace(cmp.conventional, args.trace, "conventional")
        _write_trace(cmp.fuzzy, args.trace, "fuzzy")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(cmp.record(), fh, indent=2)
    if args.figure:
        from .plotting import plot_comparison
        plot_comparison(cmp, args.figure)
    return 0


def cmd_fis_eval(args) -> int:
    rb = sc.load_fuzzy_config(args.config) if args.config else None
    report = sc.fis_eval_cmd(args.h, args.v, rb)
    print(f"tau\t{report.crisp:.6f}")
    sys.stdout.write(report.table())
    if args.curve:
        with open(args.curve, "w") as fh:
            fh.write("u,mu\n")
            for u, mu in report.curve(args.samples):
                fh.write(f"{u!r},{mu!r}\n")
    if args.figure:
        from .plotting import plot_aggregate
        plot_aggregate(report, args.figure)
    return 0


def cmd_export(args) -> int:
    s = sc.load_scenario(args.scenario)
    result = sc.run_scenario(s, trace=bool(args.trace) or s.trace)
    sc.export_grid(result.ignition_grid, args.format, args.out)
    if args.trace:
        _write_trace(result, args.trace)
    print(f"{args.format}\t{args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="fuzzydevs",
        description="DEVS wildfire simulation with fuzzy-controlled state lifetimes.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    scen_help = "scenario JSON file, or 'paper-defaults' for the bundled one"

    r = sub.add_parser("run", help="run one scenario and print its metrics")
    r.add_argument("scenario", help=scen_help)
    r.add_argument("--trace", metavar="PATH", help="write the event trace")
    r.add_argument("--json", metavar="PATH", help="write metrics as JSON")
    r.add_argument("--grid", metavar="PATH", help="write the ignition-time grid as CSV")
    r.add_argument("--figure", metavar="PATH", help="render the ignition-time map")
    r.add_argument("--normalized", metavar="PATH", help="write the scenario with defaults filled in")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="run conventional and fuzzy lifetimes side by side")
    c.add_argument("scenario", help=scen_help)
    c.add_argument("--trace", metavar="PATH",
                   help="write both traces (PATH gets .conventional/.fuzzy inserted)")
    c.add_argument("--json", metavar="PATH", help="write the comparison record as JSON")
    c.add_argument("--figure", metavar="PATH", help="render both ignition-time maps")
    c.set_defaults(func=cmd_compare)

    f = sub.add_parser("fis-eval", help="evaluate the fuzzy controller at one point")
    f.add_argument("--h", type=float, required=True, help="relative humidity, percent")
    f.add_argument("--v", type=float, required=True, help="wind speed, km/h")
    f.add_argument("--config", metavar="FILE", help="scenario or fuzzy-section JSON")
    f.add_argument("--curve", metavar="CSV", help="write sampled aggregate (u, mu)")
    f.add_argument("--samples", type=int, default=201)
    f.add_argument("--figure", metavar="PATH", help="render the aggregate and centroid")
    f.set_defaults(func=cmd_fis_eval)

    e = sub.add_parser("export", help="run a scenario and export its ignition-time grid")
    e.add_argument("scenario", help=scen_help)
    e.add_argument("--format", choices=("csv", "pgm"), required=True)
    e.add_argument("--out", required=True, metavar="PATH")
    e.add_argument("--trace", metavar="PATH", help="write the event trace")
    e.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (sc.ScenarioError, FuzzyError, DevsError, OSError, ValueError) as exc:
        print(f"fuzzydevs: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
