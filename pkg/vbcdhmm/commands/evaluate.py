from __future__ import annotations

import argparse

from .. import types
from ..classifier import EvaluationReport, evaluate
from ..data import load_bank, load_dataset
from ..exceptions import ValidationError
from .base import BaseCommand, format_matrix


def report_to_dict(report: EvaluationReport) -> types.EvaluationReport:
    return {
        "labels": list(report.labels),
        "accuracy": report.accuracy,
        "confusion": [[int(v) for v in row] for row in report.confusion],
        "per_class_accuracy": dict(report.per_class_accuracy),
        "predictions": [
            {
                "id": p.id,
                "label": p.label,
                "predicted": p.predicted,
                "scores": dict(p.scores),
            }
            for p in report.predictions
        ],
    }


class Evaluate(BaseCommand):
    """Classify a labeled dataset with a model bank and report accuracy."""

    name = "evaluate"
    help = "classify a labeled dataset and report accuracy"

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--bank", required=True, help="model bank file")
        parser.add_argument("--data", required=True, help="labeled JSONL dataset")
        parser.add_argument(
            "--json",
            action="store_true",
            help="print a JSON report with per-sequence scores",
        )
        parser.add_argument(
            "--predictive-params",
            choices=["starred", "mean"],
            default="starred",
            help="parameters plugged into the predictive density",
        )
        parser.add_argument(
            "--normalize-length",
            action="store_true",
            help="divide every score by the sequence length",
        )

    def run(self, args: argparse.Namespace) -> int:
        bank = load_bank(args.bank)
        records = load_dataset(args.data)
        if not records:
            raise ValidationError(f"{args.data} has no sequences")
        records = [r.with_frames(bank.prepare(r.frames)) for r in records]
        report = evaluate(
            bank,
            records,
            predictive=args.predictive_params,
            normalize_length=args.normalize_length,
        )
        if args.json:
            self.echo_json(report_to_dict(report))
            return 0
        self.echo(f"accuracy: {report.accuracy:.4f}")
        self.echo("confusion (rows: true, columns: predicted):")
        self.echo(format_matrix(report.confusion, report.labels, fmt="{:d}"))
        self.echo("per-class accuracy:")
        for label, value in report.per_class_accuracy.items():
            self.echo(f"  {label}: {'n/a' if value is None else f'{value:.4f}'}")
        return 0
