"""CLI for reducing stochastic delay equations to averaged SDEs."""

import argparse
import logging
import sys
from pathlib import Path

from delay_average.commands.analysis import (
    HELP_TEXT,
    cmd_average,
    cmd_invariant_density,
    cmd_lyap_surface,
    cmd_spectrum,
    cmd_threshold,
    cmd_validate,
)
from delay_average.commands.simulation import cmd_compare, cmd_lyapunov, cmd_simulate_dde, cmd_simulate_sde
from delay_average.errors import ConfigError, DelayAverageError

# Re-export the public API
from delay_average.formatting import BOLD, CYAN, DIM, GREEN, ICONS, RESET, YELLOW, bold, bold_cyan, dim, green, yellow
from delay_average.io import build_model, config_hash, load_config, load_schema, write_csv, write_json

__all__ = [
    # Constants
    "ICONS",
    "RESET",
    "BOLD",
    "DIM",
    "GREEN",
    "YELLOW",
    "CYAN",
    "HELP_TEXT",
    "COMMANDS",
    # Formatting
    "bold",
    "dim",
    "green",
    "yellow",
    "bold_cyan",
    # I/O
    "load_config",
    "load_schema",
    "config_hash",
    "build_model",
    "write_csv",
    "write_json",
    # Analysis Commands
    "cmd_spectrum",
    "cmd_average",
    "cmd_threshold",
    "cmd_invariant_density",
    "cmd_lyap_surface",
    "cmd_validate",
    # Simulation Commands
    "cmd_simulate_dde",
    "cmd_simulate_sde",
    "cmd_compare",
    "cmd_lyapunov",
    # Entry point
    "main",
]

COMMANDS = {
    "spectrum": cmd_spectrum,
    "average": cmd_average,
    "threshold": cmd_threshold,
    "invariant-density": cmd_invariant_density,
    "lyap-surface": cmd_lyap_surface,
    "simulate-dde": cmd_simulate_dde,
    "simulate-sde": cmd_simulate_sde,
    "compare": cmd_compare,
    "lyapunov": cmd_lyapunov,
}


def _global_flags(*, suppress: bool) -> argparse.ArgumentParser:
    """Flags accepted before or after the command; on subcommands they only set what was given."""
    flags = argparse.ArgumentParser(add_help=False)
    default = {"default": argparse.SUPPRESS} if suppress else {}
    flags.add_argument("-c", "--config", help=argparse.SUPPRESS, **default)
    flags.add_argument("--seed", type=int, help=argparse.SUPPRESS, **default)
    flags.add_argument("-o", "--out", help=argparse.SUPPRESS, **default)
    flags.add_argument("--threads", type=int, help=argparse.SUPPRESS, **default)
    flags.add_argument("-q", "--quiet", action="store_true", help=argparse.SUPPRESS, **default)
    flags.add_argument("--json", action="store_true", help=argparse.SUPPRESS, **default)
    return flags


def build_parser() -> argparse.ArgumentParser:
    """The dav argument parser."""
    parser = argparse.ArgumentParser(
        prog="dav",
        description="Reduce stochastic delay equations near an oscillatory instability to averaged SDEs",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        usage="dav [-c CONFIG] [--seed N] [-o DIR] [--json] <command>",
        add_help=False,
        parents=[_global_flags(suppress=False)],
    )
    parser.add_argument(
        "-h",
        "--help",
        action="store_true",
        help=argparse.SUPPRESS,
    )

    subparsers = parser.add_subparsers(dest="command", metavar="command")
    command_flags = _global_flags(suppress=True)
    for name in COMMANDS:
        subparsers.add_parser(name, add_help=False, parents=[command_flags])
    subparsers.add_parser("validate", aliases=["v"], add_help=False, parents=[command_flags])
    subparsers.add_parser("help", aliases=["h"], add_help=False)
    return parser


def main() -> None:
    """CLI entry point for dav command."""
    args = build_parser().parse_args()

    # Help command
    if args.help or args.command in (None, "help", "h"):
        print(HELP_TEXT)
        return

    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )

    try:
        match args.command:
            case "validate" | "v":
                if args.config is None:
                    msg = "--config is required"
                    raise ConfigError(msg)
                cmd_validate(Path(args.config), as_json=args.json)
            case command:
                COMMANDS[command](args)
    except DelayAverageError as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(e.exit_code)


if __name__ == "__main__":
    main()
