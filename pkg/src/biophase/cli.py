"""Command-line front end.

    biophase phase --scenario pt.json --format json --out phase.json

Errors print a JSON error record on stderr and exit with the status of the
error class: 2 validation, 3 degenerate spectrum, 4 biorthogonality or
anchor, 5 numerical, 6 file I/O.  ``check`` exits with 1 when an invariant
fails.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import BiophaseError, IoError, ParseError
from .runner import export, run, write_output
from .scenario import COMMANDS, load_scenario


def _anchor_override(spec: str):
    if spec == "auto":
        return "auto"
    if not spec.startswith("file:"):
        raise ParseError("--anchor must be 'auto' or 'file:<path>'", path="anchor")
    fname = spec[len("file:"):]
    try:
        with open(fname, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read anchor file {fname!r}: {exc.strerror}",
                      operation="parse_scenario", quantity="anchor") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"anchor file is not valid JSON: {exc}", path="anchor") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="biophase",
        description="Complex geometric phases of non-Hermitian quantum systems.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--out", default=None, help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="json")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--steps", type=int, default=None, help="override grid.steps")
    p.add_argument("--anchor", default=None, help="auto or file:<path> (vector or {state, dual})")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scenario = load_scenario(args.scenario)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.steps is not None:
            overrides["grid.steps"] = args.steps
        if args.anchor is not None:
            overrides["anchor"] = _anchor_override(args.anchor)
        if overrides:
            scenario = scenario.with_overrides(overrides)
        bundle = run(args.command, scenario)
        write_output(export(bundle, args.format), args.out, sys.stdout)
        return bundle.exit_status
    except BiophaseError as exc:
        rec = exc.record()
        if rec["operation"] is None:
            rec["operation"] = args.command
        print(json.dumps(rec), file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
