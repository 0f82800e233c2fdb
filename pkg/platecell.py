# PLATECELL
# This module is the user interactive start point for the PLATECELL project.
# It will load the provided arguments and the run config, apply command line overrides and hand the
# requested subcommand to platecell_worker.py.
#
# Exit codes: 0 = success, 1 = invalid input (arguments, config, cell, materials, mesh), 2 = solver failure.

import argparse
import sys

import lib.config_helper as config_helper
import lib.logging_helper as logging_helper
import platecell_worker
from lib.class_helper import MacroMode, SolverError, ValidationError
from lib.generic_helper import parse_pair

VERSION = "1.0.0"
EXIT_OK = 0
EXIT_INVALID = 1
EXIT_SOLVER = 2


class ArgumentParser(argparse.ArgumentParser):
    """Argument parser that raises ValidationError on bad arguments instead of exiting (exit code 1, not 2)."""

    def error(self, message):
        raise ValidationError(f"{self.prog}: {message}")


def add_arguments():
    """Builds the argument parser.

    Returns:
        parser (ArgumentParser): The parser
    """
    parser = ArgumentParser(
        prog="platecell",
        description="PLATECELL - Periodicity cell problems, rigidities, boundary layers and wrinkling of inhomogeneous plates",
    )
    parser.add_argument("--version", action="version", version=f"PLATECELL {VERSION}")
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
    subparsers.required = True

    helps = {
        "solve": "Solve the requested modes and write the stress fields",
        "homogenize": "Compute rigidities and neutral planes (all six modes)",
        "profile": "Write slab profiles and the skin/core decomposition",
        "represent": "Compare representative 3-layer cells with the original plate",
        "wrinkle": "Measure surface wrinkling on a tiled cell",
        "export": "Convert field CSVs of a previous solve into another format",
    }
    for command, help_text in helps.items():
        sub = subparsers.add_parser(command, help=help_text)
        sub.add_argument("--config", required=True, help="Path of the JSON run config")
        sub.add_argument("--out", help="Output directory (overrides outputs.directory)")
        sub.add_argument("--resolution", help="Mesh resolution N1xN2xN3 (overrides resolution)")
        sub.add_argument("--mode", action="append", help="Mode AB:NU, repeatable (overrides modes)")
        sub.add_argument("--tile", help="Tiling K1xK2 (overrides analysis.tile)")
        sub.add_argument("--threshold", type=float, help="Threshold for d(slab) and informativeness")
        sub.add_argument("--format", choices=["vtk", "csv"], help="Field output format")
        sub.add_argument("--debug", action="store_true", help="Enable debug output")
    return parser


def build_overrides(args):
    """Translates command line flags into config overrides (dot-separated keys).

    Raises:
        ValidationError: If a flag value is malformed
    """
    overrides = {}
    try:
        if args.resolution:
            resolution = parse_pair(args.resolution)
            if len(resolution) != 3:
                raise ValueError(f"'{args.resolution}' is not of the form N1xN2xN3")
            overrides["resolution"] = list(resolution)
        if args.tile:
            tile = parse_pair(args.tile)
            if len(tile) != 2:
                raise ValueError(f"'{args.tile}' is not of the form K1xK2")
            overrides["analysis.tile"] = list(tile)
    except ValueError as e:
        raise ValidationError(str(e))
    if args.mode:
        overrides["modes"] = [MacroMode.from_string(text).key for text in args.mode]
    if args.threshold is not None:
        overrides["analysis.threshold"] = args.threshold
        overrides["analysis.informative_threshold"] = args.threshold
    if args.format and args.command != "export":
        overrides["outputs.formats"] = [args.format]
    if args.out:
        overrides["outputs.directory"] = args.out
    if args.debug:
        overrides["logging.log_level_stdout"] = "DEBUG"
    return overrides


def run_command(argv=None):
    """Runs the command line.

    Args:
        argv (list): The arguments (default: sys.argv[1:])

    Returns:
        int: The exit code
    """
    parser = add_arguments()
    mlog = logging_helper.Log("platecell")

    try:
        args = parser.parse_args(argv)
        run_config = config_helper.load_config(args.config, build_overrides(args))
        bundle = platecell_worker.main(run_config, args.command, out_dir=args.out, fmt=args.format)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except SolverError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SOLVER

    for path in bundle.files:
        mlog.info(f"Wrote {path}")
    print(f"{args.command}: wrote {len(bundle.files)} files")
    return EXIT_OK


def main():
    sys.exit(run_command())


if __name__ == "__main__":
    main()
