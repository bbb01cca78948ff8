"""Entry point of the ``vbcdhmm`` command-line tool.

Exit codes: 0 on success, 2 for usage and validation errors, 1 for any other
failure raised by the library (for instance numerical underflow).
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import List, Optional, TextIO

from . import __version__
from .commands import Commands
from .exceptions import VbcdhmmError, ValidationError

LOG = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def configure_logging(verbosity: int) -> None:
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def build_parser(commands: Commands) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vbcdhmm",
        description="Train and apply variational conditional-dependence HMMs",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    parser.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="log progress (-v) or debugging details (-vv) to standard error",
    )
    commands.register(parser)
    return parser


def main(argv: Optional[List[str]] = None, out: TextIO | None = None) -> int:
    """Run the tool and return its exit code.

    :param argv: arguments without the program name (default ``sys.argv[1:]``)
    :param out: stream receiving reports (default standard output)
    """
    commands = Commands(out)
    parser = build_parser(commands)
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2
    configure_logging(args.verbose)
    command = commands.all()[args.command]
    try:
        return command.run(args)
    except ValidationError as e:
        print(f"vbcdhmm {args.command}: error: {e.message}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"vbcdhmm {args.command}: error: {e}", file=sys.stderr)
        return 2
    except VbcdhmmError as e:
        LOG.debug("command failed", exc_info=True)
        print(f"vbcdhmm {args.command}: failed: {e.message}", file=sys.stderr)
        return 1


def run() -> None:
    sys.exit(main())
