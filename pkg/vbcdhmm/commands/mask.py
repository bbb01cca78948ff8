from __future__ import annotations

import argparse

from ..data import load_dataset, mask_missing, save_dataset
from ..exceptions import ValidationError
from .base import BaseCommand, non_negative_int


class Mask(BaseCommand):
    """Replace a fixed fraction of every sequence's frames with missing markers."""

    name = "mask"
    help = "mark a fraction of frames as missing"

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--data", required=True, help="JSONL dataset")
        parser.add_argument("--fraction", type=float, required=True)
        parser.add_argument("--seed", type=non_negative_int, default=0)
        parser.add_argument("--out", required=True, help="JSONL dataset to write")

    def run(self, args: argparse.Namespace) -> int:
        if not 0 <= args.fraction < 1:
            raise ValidationError(f"--fraction must be in [0, 1), got {args.fraction}")
        records = mask_missing(load_dataset(args.data), args.fraction, args.seed)
        save_dataset(args.out, records)
        missing = sum(int(r.missing.sum()) for r in records)
        self.echo(f"{missing} missing frames in {len(records)} sequences")
        return 0
