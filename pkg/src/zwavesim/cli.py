"""Command-line front end: ``zwavesim validate|run|report|preset``.

Exit codes: 0 success, 1 scenario parse/validation error, 2 invariant
violation during a run, 3 file I/O error.
"""

from __future__ import annotations

import argparse
import os
import sys

from .presets import PRESETS, preset_text
from .runner import RunReport, execute, format_report
from .scenario import ParseError, ValidationError, load_scenario
from .sim import InvariantViolation

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_INVARIANT = 2
EXIT_IO = 3

OUTPUT_ENV = "ZWAVESIM_OUTPUT_DIR"


def _read(path: str) -> str:
    with open(path, encoding="utf-8") as f:
        return f.read()


def _out_dir(arg: str | None, name: str) -> str:
    if arg:
        return arg
    return os.path.join(os.environ.get(OUTPUT_ENV, "runs"), name)


def _run_text(text: str, out: str | None, label: str) -> int:
    sc = load_scenario(text)
    out_dir = _out_dir(out, sc.name or label)
    run = execute(sc, out_dir)
    print(format_report(run.report))
    print(f"outputs written to {out_dir}")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    sc = load_scenario(_read(args.scenario))
    print(f"{args.scenario}: ok ({len(sc.devices)} device(s), "
          f"attacker={'yes' if sc.attacker else 'no'})")
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    if not args.batch:
        return _run_text(_read(args.scenario), args.out, "scenario")
    # batch: one scenario path per line; outputs go to sibling directories
    base = args.out or os.environ.get(OUTPUT_ENV, "runs")
    worst = EXIT_OK
    for line in _read(args.scenario).splitlines():
        path = line.strip()
        if not path or path.startswith("#"):
            continue
        label = os.path.splitext(os.path.basename(path))[0]
        try:
            _run_text(_read(path), os.path.join(base, label), label)
        except (ParseError, ValidationError) as exc:
            print(f"{path}: {exc}", file=sys.stderr)
            worst = max(worst, EXIT_INVALID)
        except InvariantViolation as exc:
            print(f"{path}: invariant violated: {exc}", file=sys.stderr)
            worst = max(worst, EXIT_INVARIANT)
    return worst


def cmd_report(args: argparse.Namespace) -> int:
    report = RunReport.from_json(_read(os.path.join(args.run_dir, "report.json")))
    print(format_report(report))
    return EXIT_OK


def cmd_preset(args: argparse.Namespace) -> int:
    if args.list or not args.name:
        for name in sorted(PRESETS):
            print(name)
        return EXIT_OK
    kw = {}
    if args.pps is not None:
        kw["pps"] = args.pps
    if args.soc is not None:
        kw["soc"] = args.soc
    try:
        text = preset_text(args.name, **kw)
    except KeyError as exc:
        print(exc.args[0], file=sys.stderr)
        return EXIT_INVALID
    except TypeError:
        print(f"preset {args.name} does not take those options", file=sys.stderr)
        return EXIT_INVALID
    if args.print:
        print(text, end="")
        return EXIT_OK
    return _run_text(text, args.out, args.name)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="zwavesim", description="Z-Wave battery attack simulator")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a scenario file")
    v.add_argument("scenario")
    v.set_defaults(func=cmd_validate)

    r = sub.add_parser("run", help="run a scenario file")
    r.add_argument("scenario")
    r.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV}/<name> or runs/<name>)")
    r.add_argument("--batch", action="store_true", help="treat SCENARIO as a list of scenario paths")
    r.set_defaults(func=cmd_run)

    rp = sub.add_parser("report", help="print the summary of a finished run")
    rp.add_argument("run_dir")
    rp.set_defaults(func=cmd_report)

    pr = sub.add_parser("preset", help="run or print a built-in scenario")
    pr.add_argument("name", nargs="?")
    pr.add_argument("--pps", type=float)
    pr.add_argument("--soc", type=float)
    pr.add_argument("--out")
    pr.add_argument("--list", action="store_true")
    pr.add_argument("--print", action="store_true", help="print the scenario text instead of running it")
    pr.set_defaults(func=cmd_preset)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except InvariantViolation as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
