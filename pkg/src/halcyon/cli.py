"""Command-line entry point.

    halcyon run <scenario> [--trace PATH] [--recheck-delay N] [--quiet]
    halcyon validate <scenario>
    halcyon rules-check <rules-file>

Exit codes: 0 success, 1 validation or parse failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from .rules import ParseError, parse_rules
from .sim import ScenarioError, load_scenario_file, run


def _resolve(path_text: str) -> Optional[Path]:
    path = Path(path_text)
    if path.is_file():
        return path
    # fall back to a bundled scenario of that name
    bundled = resources.files("halcyon") / "scenarios" / path.name
    if bundled.is_file():
        return Path(str(bundled))
    return None


def _positive(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="halcyon", description="Receiver-centric message mediation simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario and emit its trace")
    p_run.add_argument("scenario")
    p_run.add_argument("--trace", metavar="PATH", help="also write the trace to PATH")
    p_run.add_argument("--recheck-delay", type=_positive, metavar="N")
    p_run.add_argument("--quiet", action="store_true", help="print the summary block only")

    p_val = sub.add_parser("validate", help="check that a scenario loads")
    p_val.add_argument("scenario")

    p_rules = sub.add_parser("rules-check", help="check that a rules file parses")
    p_rules.add_argument("rules")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    target = args.rules if args.command == "rules-check" else args.scenario
    path = _resolve(target)
    if path is None:
        print(f"halcyon: no such file: {target}", file=sys.stderr)
        return 2

    if args.command == "rules-check":
        try:
            rs = parse_rules(path.read_text(encoding="utf-8"))
        except ParseError as exc:
            print(f"{path}:{exc.line}:{exc.column}: expected {exc.expected}, found {exc.found}", file=sys.stderr)
            return 1
        print(f"{path}: {len(rs)} rule(s) ok")
        return 0

    try:
        scenario = load_scenario_file(path)
    except ScenarioError as exc:
        print(f"{path}:{exc.line}: {exc.message}", file=sys.stderr)
        return 1

    if args.command == "validate":
        print(f"{path}: scenario {scenario.name!r} ok ({len(scenario.principals)} principals, {len(scenario.sends)} sends)")
        return 0

    if args.recheck_delay is not None:
        scenario.recheck_delay = args.recheck_delay
    trace = run(scenario)
    text = trace.summary_text() if args.quiet else trace.text()
    sys.stdout.write(text)
    if args.trace:
        Path(args.trace).write_text(text, encoding="utf-8")
    return 0


if __name__ == "__main__":
    sys.exit(main())
