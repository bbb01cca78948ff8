from __future__ import annotations

import argparse
import json
import sys
from typing import Any, TextIO


class BaseCommand:
    """A subcommand of the ``vbcdhmm`` tool.

    Subclasses set :attr:`name` and :attr:`help`, register their flags in
    :meth:`add_arguments` and do their work in :meth:`run`.

    :param out: stream receiving reports (standard output by default)
    """

    name = ""
    help = ""

    def __init__(self, out: TextIO | None = None):
        self.out = out if out is not None else sys.stdout

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        raise NotImplementedError

    def run(self, args: argparse.Namespace) -> int:
        """Execute the command.

        :param args: parsed flags
        :return: the process exit code
        """
        raise NotImplementedError

    def echo(self, text: str = "") -> None:
        print(text, file=self.out)

    def echo_json(self, data: Any) -> None:
        self.echo(json.dumps(data, indent=2))


def positive_int(value: str) -> int:
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return number


def non_negative_int(value: str) -> int:
    number = int(value)
    if number < 0:
        raise argparse.ArgumentTypeError(
            f"expected a non-negative integer, got {value}"
        )
    return number


def format_matrix(
    rows: Any, labels: list[str] | None = None, fmt: str = "{:.4f}"
) -> str:
    """Render a matrix as a right-aligned text table."""
    cells = [[fmt.format(v) for v in row] for row in rows]
    if labels is not None:
        cells = [[""] + list(labels)] + [
            [label] + row for label, row in zip(labels, cells)
        ]
    width = max((len(c) for row in cells for c in row), default=0)
    return "\n".join("  ".join(c.rjust(width) for c in row) for row in cells)
