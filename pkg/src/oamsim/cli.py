"""Command-line runner: ``oamsim run|verify|tally <circuit.json>``.

Exit codes: 0 success, 2 verification or vacuum-check failure, 1 any error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

from .circuit import parse_circuit, run_circuit, tally_report, verify
from .errors import OamSimError


def _write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".oamsim-", suffix=".json")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _load(path: str):
    with open(path, encoding="utf-8") as fh:
        return parse_circuit(fh.read())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oamsim", description="OAM multiplexing circuit simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a circuit and print its report")
    run.add_argument("file")
    run.add_argument("--seed", type=int, default=None, help="override the circuit seed")
    run.add_argument("--out", default=None, help="write the report JSON here instead of stdout")
    run.add_argument("--timing", action="store_true", help="include wall-clock duration in the report")

    ver = sub.add_parser("verify", help="compare a named pipeline with its closed-form oracle")
    ver.add_argument("file")
    ver.add_argument("--exhaustive", action="store_true", help="adder/multiplier: all basis operand pairs")

    tal = sub.add_parser("tally", help="print the gate tally of a circuit")
    tal.add_argument("file")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = _load(args.file)
        if args.command == "run":
            report = run_circuit(spec, seed=args.seed)
            text = report.to_json(include_timing=args.timing)
            if args.out:
                _write_atomic(args.out, text + "\n")
            else:
                print(text)
            print(f"duration: {report.duration_s:.4f} s", file=sys.stderr)
            return 0 if report.passed else 2
        if args.command == "verify":
            result = verify(spec, exhaustive=args.exhaustive)
            print(json.dumps(result, indent=2))
            return 2 if result["status"] == "fail" else 0
        print(json.dumps(tally_report(spec), indent=2))
        return 0
    except (OamSimError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
