from __future__ import annotations

import argparse
from typing import Dict, TextIO

from .base import BaseCommand
from .evaluate import Evaluate
from .inspect import Inspect
from .mask import Mask
from .synth import Synth
from .train import Train

__all__ = [
    "BaseCommand",
    "Commands",
    "Evaluate",
    "Inspect",
    "Mask",
    "Synth",
    "Train",
]


class Commands:
    """Every subcommand of the tool:

    - :class:`train <vbcdhmm.commands.Train>` - train a model bank
    - :class:`evaluate <vbcdhmm.commands.Evaluate>` - classify and report accuracy
    - :class:`synth <vbcdhmm.commands.Synth>` - generate synthetic data
    - :class:`mask <vbcdhmm.commands.Mask>` - inject missing frames
    - :class:`inspect <vbcdhmm.commands.Inspect>` - show inferred dependence patterns

    :param out: stream receiving reports
    """

    def __init__(self, out: TextIO | None = None):
        self.train = Train(out)
        self.evaluate = Evaluate(out)
        self.synth = Synth(out)
        self.mask = Mask(out)
        self.inspect = Inspect(out)

    def all(self) -> Dict[str, BaseCommand]:
        return {
            cmd.name: cmd
            for cmd in (self.train, self.evaluate, self.synth, self.mask, self.inspect)
        }

    def register(self, parser: argparse.ArgumentParser) -> None:
        sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)
        for name, cmd in self.all().items():
            cmd.add_arguments(sub.add_parser(name, help=cmd.help, description=cmd.help))
