"""Command-line entry point.

Errors are reported on stderr as one line ``error category=<cat> message=<text>``
and map to distinct exit codes.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..errors import AmlaserError
from .adiabatic import parse_adiabatic, validate_adiabatic
from .config import parse_experiment, parse_sweep, read_json
from .runner import _dumps, run, sweep

EXIT_CODES = {
    "usage": 2,
    "io": 3,
    "config": 4,
    "basis": 5,
    "numeric": 6,
    "discrepancy": 7,
    "internal": 1,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _fail("usage", message)


class _Exit(Exception):
    def __init__(self, code):
        self.code = code


def _fail(category: str, message: str):
    flat = " ".join(str(message).split())
    print(f"error category={category} message={json.dumps(flat)}", file=sys.stderr)
    raise _Exit(EXIT_CODES.get(category, EXIT_CODES["internal"]))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", help="JSON config file")
    common.add_argument("--output-dir", default=None, help="where to write results (default: config output.dir or .)")
    common.add_argument("--format", choices=("csv", "json"), default=None)
    common.add_argument("--quiet", action="store_true", help="suppress the summary on stdout")
    parser = _Parser(prog="amlaser", description="Atom-molecule output coupler simulations.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("simulate", parents=[common], help="run one experiment")
    sw = sub.add_parser("sweep", parents=[common], help="run a parameter sweep")
    sw.add_argument("--threads", type=int, default=None, help="worker threads (default AMLASER_THREADS or CPU count)")
    sub.add_parser("compare-analytic", parents=[common], help="run and compare with closed forms")
    sub.add_parser("validate-adiabatic", parents=[common], help="five- vs three-mode along a detuning ladder")
    return parser


def _out_dir(args, data: dict) -> Path:
    if args.output_dir:
        return Path(args.output_dir)
    return Path(data.get("output", {}).get("dir", "."))


def _fmt(args, data: dict) -> str:
    return args.format or data.get("output", {}).get("format", "csv")


def _say(args, text: str):
    if not args.quiet:
        print(text)


def _simulate(args, data, compare: bool) -> int:
    cfg = parse_experiment(data)
    if compare and not cfg.analytic:
        _fail("config", "compare-analytic needs a non-empty 'analytic' list")
    bundle = run(cfg)
    paths = bundle.write(_out_dir(args, data), _fmt(args, data))
    _say(args, f"wrote {', '.join(str(p) for p in paths)} (dim={bundle.metadata['basis_dim']}, "
               f"max_leakage={bundle.metadata['max_leakage']:.3g})")
    if compare:
        failed = [d for d in bundle.discrepancies if d.passed is False]
        for d in bundle.discrepancies:
            status = "report" if d.passed is None else ("ok" if d.passed else "FAIL")
            _say(args, f"{status:6s} {d.quantity}: rel_err={d.rel_err:.3g}")
        if failed:
            _fail("discrepancy", f"{len(failed)} analytic comparison(s) outside tolerance: "
                                 + ", ".join(d.quantity for d in failed))
    return 0


def _sweep(args, data, path: Path) -> int:
    cfg = parse_sweep(data, path.parent)
    out = _out_dir(args, data)
    table = sweep(cfg, out_dir=out, threads=args.threads)
    paths = table.write(out, _fmt(args, data))
    _say(args, f"wrote {', '.join(str(p) for p in paths)} ({len(table.rows)} points)")
    return 0


def _adiabatic(args, data) -> int:
    report = validate_adiabatic(parse_adiabatic(data))
    out = _out_dir(args, data)
    out.mkdir(parents=True, exist_ok=True)
    target = out / "adiabatic.json"
    target.write_text(_dumps(report))
    for row in report["rows"]:
        _say(args, f"delta/lambda1={row['delta_over_lambda']:g} max_dev={row['max_deviation']:.4g}")
    if not report["passed"]:
        _fail("discrepancy", f"adiabatic ladder not converging as required (monotone={report['monotone']}, "
                             f"ratios_in_bounds={report['ratios_in_bounds']}); report in {target}")
    return 0


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        path = Path(args.config)
        try:
            data = read_json(path)
            if args.command == "simulate":
                return _simulate(args, data, compare=False)
            if args.command == "compare-analytic":
                return _simulate(args, data, compare=True)
            if args.command == "sweep":
                return _sweep(args, data, path)
            return _adiabatic(args, data)
        except AmlaserError as exc:
            _fail(getattr(exc, "category", "internal"), str(exc))
        except OSError as exc:
            _fail("io", str(exc))
        except (TypeError, ValueError, KeyError) as exc:
            # malformed values that slipped past schema checks
            _fail("config", f"{type(exc).__name__}: {exc}")
    except _Exit as exc:
        return exc.code
    return 0


if __name__ == "__main__":
    sys.exit(main())
