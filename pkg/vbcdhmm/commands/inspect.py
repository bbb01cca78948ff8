from __future__ import annotations

import argparse

import numpy as np

from .. import types
from ..classifier import dependence_matrix
from ..data import load_bank
from ..formats import PGM
from ..utils import FloatArray, to_nested
from .base import BaseCommand, format_matrix, positive_int


def render(matrix: FloatArray, scale: int = 1) -> np.ndarray:
    """Grayscale image of a probability matrix, darker for higher probability."""
    pixels = np.floor(255.0 * (1.0 - np.asarray(matrix)) + 0.5)
    pixels = np.clip(pixels, 0, 255).astype(np.uint8)
    return np.kron(pixels, np.ones((scale, scale), dtype=np.uint8))


class Inspect(BaseCommand):
    """Show the inferred lag-transition matrix of one class."""

    name = "inspect"
    help = "print the posterior-mean dependence matrix of a class"

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--bank", required=True, help="model bank file")
        parser.add_argument("--label", required=True, help="class to inspect")
        parser.add_argument("--pgm", help="also write a plain PGM rendering here")
        parser.add_argument(
            "--scale", type=positive_int, default=1, help="PGM pixels per matrix cell"
        )
        parser.add_argument("--json", action="store_true")

    def run(self, args: argparse.Namespace) -> int:
        bank = load_bank(args.bank)
        matrix = dependence_matrix(bank[args.label])
        if args.pgm:
            PGM.write(args.pgm, render(matrix, args.scale))
        if args.json:
            report: types.DependenceReport = {
                "label": args.label,
                "max_lag": int(matrix.shape[0]),
                "dependence": to_nested(matrix),
            }
            self.echo_json(report)
            return 0
        lags = [str(k) for k in range(1, matrix.shape[0] + 1)]
        self.echo(f"class {args.label}: E[A_hat] (rows: z_(t-1), columns: z_t)")
        self.echo(format_matrix(matrix, lags))
        return 0
