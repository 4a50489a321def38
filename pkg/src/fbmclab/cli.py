"""Command-line front end: run preset or JSON-configured scenarios.

Exit codes: 0 success, 2 invalid scenario, 3 numeric failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .core import InvalidParameterError, NumericError
from .harness import Scenario, emit, preset, preset_names, run_scenario


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simulate",
        description=(
            "FBMC-OQAM multi-user massive MIMO uplink simulation laboratory. "
            "Runs a preset experiment or a JSON scenario and writes CSV or "
            "plot-data files."
        ),
    )
    src = parser.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", metavar="NAME", help="preset experiment name")
    src.add_argument("--config", metavar="FILE", help="JSON scenario document")
    src.add_argument(
        "--list-presets", action="store_true", help="list preset names and exit"
    )
    parser.add_argument("--seed", type=int, default=None, help="root seed override")
    parser.add_argument("--trials", type=int, default=None, help="trial count override")
    parser.add_argument("--out", default="results", help="output directory")
    parser.add_argument("--threads", type=int, default=1, help="worker thread count")
    parser.add_argument(
        "--format", choices=("csv", "plotdata"), default="csv", help="output format"
    )
    parser.add_argument(
        "--dump-config",
        action="store_true",
        help="print the resolved scenario JSON instead of running it",
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.list_presets:
            for name in preset_names():
                print(name)
            return 0
        if args.preset:
            scenario = preset(args.preset)
        else:
            try:
                with open(args.config) as fh:
                    doc = json.load(fh)
            except OSError as exc:
                print(f"cannot read config: {exc}", file=sys.stderr)
                return 4
            except json.JSONDecodeError as exc:
                print(f"invalid config JSON: {exc}", file=sys.stderr)
                return 2
            scenario = Scenario.from_dict(doc)
        if args.seed is not None:
            scenario = Scenario.from_dict({**json.loads(scenario.to_json()), "seed": args.seed})
        if args.trials is not None:
            scenario = Scenario.from_dict(
                {**json.loads(scenario.to_json()), "trials": args.trials}
            )
        if args.dump_config:
            print(scenario.to_json())
            return 0
        rows = run_scenario(scenario, threads=max(args.threads, 1))
        try:
            os.makedirs(args.out, exist_ok=True)
            path = os.path.join(args.out, f"{scenario.name}.csv")
            written = emit(rows, path, fmt=args.format, scenario=scenario)
        except OSError as exc:
            print(f"cannot write results: {exc}", file=sys.stderr)
            return 4
        for w in written:
            print(w)
        return 0
    except InvalidParameterError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
