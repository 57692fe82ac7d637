"""
Command line: sclab <experiment> <config>... [--out DIR] [--seed N] [--json-logs] [--log-level LEVEL]

Exit codes: 0 on success, 1 on numerical failure or a failed check, 2 on invalid inputs.
"""

import argparse
import json
import sys
from pathlib import Path

import pandas as pd

from batch_entrypoint import EXPERIMENTS, batch_handler
from experiments.check import format_table
from utils.utils import get_config, setup_logger

EXIT_CODES = {200: 0, 422: 1, 400: 2, 500: 1}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sclab", description="Scattering control numerical laboratory")
    sub = p.add_subparsers(dest="command", required=True)
    for name, cls in EXPERIMENTS.items():
        sp = sub.add_parser(name, help=(cls.__doc__ or "").strip().splitlines()[0])
        sp.add_argument("configs", nargs="+", help="Config YAML paths or preset names")
        sp.add_argument("--out", type=str, default=None, help="Output root (default: output.directory)")
        sp.add_argument("--seed", type=int, default=None, help="Override the config seed")
        sp.add_argument("--json-logs", action="store_true", help="Log as JSON lines")
        sp.add_argument("--log-level", type=str, default=None, help="DEBUG, INFO, WARNING or ERROR")
    sub.add_parser("presets", help="List the packaged presets")
    return p


def print_checks(runs: list[dict]) -> None:
    for run in runs:
        path = Path(run["directory"]) / "checks.csv"
        if path.is_file():
            print(f"# {run['config']} ({run['run_id']})")
            print(format_table(pd.read_csv(path, keep_default_na=False, na_values=["nan"])))


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    defaults = get_config()
    if args.command == "presets":
        print("\n".join(sorted(defaults.get("presets", {}) or {})))
        return 0

    level = (args.log_level or defaults.logging.level).upper()
    setup_logger("sclab", level, json_format=args.json_logs or bool(defaults.logging.json_format))
    response = batch_handler(args.command, args.configs, args.out, args.seed)
    body = json.loads(response["body"])
    if "runs" in body:
        if args.command == "check":
            print_checks(body["runs"])
        print(json.dumps(body["runs"], indent=2, default=str))
    else:
        print(f"error: {body.get('error')}", file=sys.stderr)
    return EXIT_CODES.get(response["statusCode"], 1)


if __name__ == "__main__":
    sys.exit(main())
