from __future__ import annotations

import argparse

from ..data import GeneratorSpec, generate, save_dataset, save_traces
from ..formats import JSON
from .base import BaseCommand, non_negative_int, positive_int


class Synth(BaseCommand):
    """Sample a synthetic dataset from exact CD-HMM parameters."""

    name = "synth"
    help = "generate synthetic sequences from a generator spec"

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--spec", required=True, help="generator spec JSON file")
        parser.add_argument("--frames", type=positive_int, required=True, help="T")
        parser.add_argument("--count", type=non_negative_int, required=True)
        parser.add_argument("--seed", type=non_negative_int, default=0)
        parser.add_argument("--out", required=True, help="JSONL dataset to write")
        parser.add_argument("--emit-latents", help="JSONL file for the latent traces")
        parser.add_argument("--label", help="class label given to every sequence")
        parser.add_argument("--id-prefix", default="seq-")

    def run(self, args: argparse.Namespace) -> int:
        spec = JSON.handle(args.spec, converter=GeneratorSpec.from_dict)
        records, traces = generate(
            spec,
            n_frames=args.frames,
            count=args.count,
            seed=args.seed,
            label=args.label,
            id_prefix=args.id_prefix,
        )
        save_dataset(args.out, records)
        if args.emit_latents:
            save_traces(args.emit_latents, traces)
        self.echo(f"wrote {len(records)} sequences to {args.out}")
        return 0
