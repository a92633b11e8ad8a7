"""Command-line front end: construct, verify, scan, discrete and render."""
import argparse
import logging
import sys
from typing import Any, Dict, List, Optional

from config import RunConfig
from exceptions import CurveFamilyError
from main import CurveFamilyProcessor

logger = logging.getLogger("curvefamily")

EXIT_PASS, EXIT_CHECK_FAILED, EXIT_USAGE = 0, 1, 2

# flag dest -> RunConfig field
FLAG_FIELDS = {
    "input": "INPUT_PATH", "out": "OUTPUT_PATH", "curve": "CURVE_PATH", "grid": "GRID",
    "lambda_min": "LAMBDA_MIN", "lambda_max": "LAMBDA_MAX", "lambda_step": "LAMBDA_STEP", "lambdas": "LAMBDAS",
    "max_moment": "MAX_MOMENT", "tol": "TOL", "seed": "SEED", "degree": "DEGREE",
    "gap_modulus": "GAP_MODULUS", "generator": "GENERATOR", "harmonic": "HARMONIC",
    "subset_cap": "SUBSET_CAP", "no_balanced": "NO_BALANCED", "even_tail": "EVEN_TAIL", "family": "FAMILY",
    "subset": "SUBSET", "amplitude": "AMPLITUDE", "force": "FORCE", "montage": "MONTAGE",
    "stroke_width": "STROKE_WIDTH", "columns": "COLUMNS", "workers": "WORKERS",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _no_balanced(value: str) -> int:
    # accepts "3" and "n=3"
    return int(value.split("=", 1)[1] if value.startswith("n=") else value)


def _number_list(value: str) -> List[float]:
    return [float(x) for x in value.replace(",", " ").split()]


def _index_list(value: str) -> List[int]:
    return [int(x) for x in value.replace(",", " ").split()]


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="key-value file (dotenv syntax) with RunConfig settings")
    common.add_argument("--out", help="output directory")
    common.add_argument("--grid", type=int)
    common.add_argument("--lambda-min", type=float)
    common.add_argument("--lambda-max", type=float)
    common.add_argument("--lambda-step", type=float)
    common.add_argument("--lambdas", type=_number_list, help="explicit λ list, e.g. 0,0.1,0.2")
    common.add_argument("--max-moment", type=int)
    common.add_argument("--tol", type=float)
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="curvefamily", description="Closed-for-all-λ curvature families")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    construct = commands.add_parser("construct", parents=[common], help="build and verify a (k, f) pair")
    construct.add_argument("--degree", type=int)
    construct.add_argument("--gap-modulus", type=int)
    construct.add_argument("--generator")
    construct.add_argument("--harmonic", type=int)
    construct.add_argument("--curve", help="coefficient table, 'circle' or 'ellipse'")

    for name, text in (("verify", "run every closedness check on a pair file"),
                       ("scan", "closure defects over the λ range")):
        sub = commands.add_parser(name, parents=[common], help=text)
        sub.add_argument("input", help="pair file")

    discrete = commands.add_parser("discrete", parents=[common], help="polyline analysis")
    discrete.add_argument("input", nargs="?", help="vertex file (x y) or curvature file")
    discrete.add_argument("--no-balanced", type=_no_balanced, metavar="n")
    discrete.add_argument("--even-tail", action="store_true", default=None)
    discrete.add_argument("--subset-cap", type=int)
    discrete.add_argument("--family", action="store_true", default=None)
    discrete.add_argument("--subset", type=_index_list)
    discrete.add_argument("--amplitude", type=float)

    render = commands.add_parser("render", parents=[common], help="SVG frames of a family")
    render.add_argument("input", nargs="?", help="pair, vertex or curvature file")
    render.add_argument("--force", action="store_true", default=None)
    render.add_argument("--montage", action="store_true", default=None)
    render.add_argument("--columns", type=int)
    render.add_argument("--stroke-width", type=float)
    render.add_argument("--no-balanced", type=_no_balanced, metavar="n")
    render.add_argument("--even-tail", action="store_true", default=None)
    render.add_argument("--subset-cap", type=int)
    render.add_argument("--family", action="store_true", default=None)
    render.add_argument("--subset", type=_index_list)
    render.add_argument("--amplitude", type=float)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides: Dict[str, Any] = {"COMMAND": args.command}
    for dest, name in FLAG_FIELDS.items():
        value = getattr(args, dest, None)
        if value is not None:
            overrides[name] = value
    if getattr(args, "verbose", False):
        overrides["LOG_LEVEL"] = "DEBUG"
    return RunConfig.from_sources(overrides, getattr(args, "config", None))


def print_summary(command: str, result: Dict[str, Any]) -> None:
    if not result.get("success") and "error" in result:
        print(f"💥 {command} failed: {result['error']}")
        if result.get("defect_profile"):
            print(result["defect_profile"])
        return
    for check in result.get("checks", []):
        icon = "⚠️" if check["skipped"] else ("✅" if check["passed"] else "❌")
        suffix = " (skipped)" if check["skipped"] else ""
        print(f"{icon} {check['name']}: {check['detail']}{suffix}")
    if command == "construct":
        print(f"✅ pair written to {result['pair_path']}")
        print(f"   max defect {result['max_defect']:.3e}, max moment {result['max_moment']:.3e}, "
              f"length {result['length']:.12g}")
    elif command == "discrete":
        print(f"   closure defect {result['closure_defect']:.3e}")
        print(f"   balanced subsets: {result['balanced_subsets'] or 'none'}")
    elif command == "render":
        print(f"✅ {result['frames']} frame(s) in {len(result['paths'])} SVG file(s)")


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        config = config_from_args(args)
        logging.basicConfig(level=getattr(logging, config.LOG_LEVEL.upper(), logging.INFO),
                            format="%(levelname)s %(name)s: %(message)s")
        processor = CurveFamilyProcessor(config)
    except (UsageError, CurveFamilyError) as e:
        print(f"💥 {e}", file=sys.stderr)
        return EXIT_USAGE

    if logger.isEnabledFor(logging.DEBUG):
        config.print_config_status()
    result = processor.run()
    print_summary(args.command, result)
    if result.get("success"):
        return EXIT_PASS
    if "error" in result and not result.get("check_failed"):
        return EXIT_USAGE
    return EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
