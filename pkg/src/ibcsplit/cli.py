"""Command-line entry point: ``ibcsplit run | preset | list-presets``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .bench.cache import ReferenceCache
from .bench.config import ConfigError, load_config, preset_spec
from .bench.presets import PRESETS
from .bench.report import emit_report
from .bench.study import run_convergence_study
from .integrators import ReferenceConfig, SchemeKind


def _fmt(x):
    return "-" if x is None else f"{x:.4g}"


def _print_report(report, out=None):
    out = out or sys.stdout
    for key, res in report.results.items():
        print(f"[{report.name}] scheme={key}  tail slope={_fmt(res.tail_slope)}", file=out)
        print(f"  {'tau':>12} {'error_inf':>12} {'order':>7}", file=out)
        for tau, err, order in zip(res.taus, res.errors, res.pairwise_orders):
            print(f"  {tau:12.5g} {_fmt(err):>12} {_fmt(order):>7}", file=out)


def _run(spec, args):
    cache = ReferenceCache(args.cache_dir, enabled=not args.no_cache)
    report = run_convergence_study(spec, cache)
    _print_report(report)
    out_dir = args.out or spec.output_dir or "results"
    fmt = getattr(args, "format", None) or spec.output_format
    for path in emit_report(report, fmt, out_dir):
        print(f"wrote {path}")
    return 0


def cmd_run(args):
    spec = load_config(args.config)
    if args.ref_tol is not None:
        spec = spec.with_overrides(reference=ReferenceConfig(args.ref_tol, args.ref_tol,
                                                             spec.reference.max_steps))
    return _run(spec, args)


def cmd_preset(args):
    overrides = {}
    if args.schemes:
        overrides["schemes"] = tuple(SchemeKind.parse(s) for s in args.schemes.split(","))
    if args.taus:
        overrides["taus"] = tuple(float(t) for t in args.taus.split(","))
    if args.ref_tol is not None:
        overrides["reference"] = ReferenceConfig(args.ref_tol, args.ref_tol)
    spec = preset_spec(args.id, **overrides)
    return _run(spec, args)


def cmd_list(args):
    for p in PRESETS.values():
        sides = ", ".join(f"{s}=({a:g},{b:g})" for s, (a, b) in p.faces.items())
        print(f"{p.id:6s} {p.dimension}D  t_end={p.t_end:g}  grid={'x'.join(map(str, p.n_interior))}  "
              f"faces(alpha,beta): {sides}")
        print(f"       {p.description}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ibcsplit", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", type=Path, help="output directory")
        p.add_argument("--no-cache", action="store_true", help="always recompute the reference")
        p.add_argument("--cache-dir", type=Path, default=None)
        p.add_argument("--ref-tol", type=float, default=None,
                       help="absolute and relative tolerance of the reference solver")

    p_run = sub.add_parser("run", help="run a study from a YAML config")
    p_run.add_argument("--config", required=True, type=Path)
    p_run.add_argument("--format", choices=("csv", "json"), default=None)
    common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_pre = sub.add_parser("preset", help="run a built-in preset")
    p_pre.add_argument("id", choices=sorted(PRESETS))
    p_pre.add_argument("--schemes", default=None, help="comma list, e.g. classic,ibc")
    p_pre.add_argument("--taus", default=None, help="comma list of decreasing step sizes")
    p_pre.add_argument("--format", choices=("csv", "json"), default=None)
    common(p_pre)
    p_pre.set_defaults(func=cmd_preset)

    p_list = sub.add_parser("list-presets", help="show the built-in presets")
    p_list.set_defaults(func=cmd_list)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, KeyError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
