from __future__ import annotations

import argparse
import logging
from typing import Dict, List, Optional

from .. import types
from ..classifier import ModelBank
from ..data import (
    PCATransform,
    dataset_dim,
    group_by_label,
    load_dataset,
    pca_apply,
    pca_fit,
    pooled_moments,
    save_model,
)
from ..dirichlet import default_hyper
from ..exceptions import ValidationError
from ..formats import JSON
from ..trainer import TrainConfig, TrainedModel, fit
from .base import BaseCommand, non_negative_int, positive_int

LOG = logging.getLogger(__name__)


def pca_dim(value: str) -> Optional[int]:
    if value.lower() == "none":
        return None
    return positive_int(value)


class Train(BaseCommand):
    """Train one model per class, keeping the highest-ELBO configuration."""

    name = "train"
    help = "train a model bank from a labeled dataset"

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--data", required=True, help="labeled JSONL dataset")
        parser.add_argument(
            "--states",
            type=positive_int,
            action="append",
            help="number of emitting states N (repeat for a grid; default 2)",
        )
        parser.add_argument(
            "--mixtures",
            type=positive_int,
            action="append",
            help="mixture components per state M (repeat for a grid; default 1)",
        )
        parser.add_argument("--max-lag", type=positive_int, default=2, help="K")
        parser.add_argument(
            "--pca-dim",
            type=pca_dim,
            default=None,
            help="project onto d axes or 'none'",
        )
        parser.add_argument(
            "--pca-variance",
            type=float,
            default=None,
            help="project onto the axes explaining this fraction of the variance",
        )
        parser.add_argument("--seed", type=non_negative_int, default=0)
        parser.add_argument("--max-iters", type=positive_int, default=200)
        parser.add_argument("--min-iters", type=non_negative_int, default=3)
        parser.add_argument(
            "--tol", type=float, default=1e-6, help="relative ELBO tolerance"
        )
        parser.add_argument("--out", required=True, help="model bank file to write")
        parser.add_argument("--report", help="also write the JSON report here")
        parser.add_argument(
            "--json", action="store_true", help="print the report as JSON"
        )

    def run(self, args: argparse.Namespace) -> int:
        if args.pca_dim is not None and args.pca_variance is not None:
            raise ValidationError("--pca-dim and --pca-variance are mutually exclusive")
        if args.pca_variance is not None and not 0 < args.pca_variance <= 1:
            raise ValidationError("--pca-variance must be in (0, 1]")
        config = TrainConfig(
            max_iters=args.max_iters,
            rel_tol=args.tol,
            seed=args.seed,
            min_iters=min(args.min_iters, args.max_iters),
        )
        states: List[int] = args.states or [2]
        mixtures: List[int] = args.mixtures or [1]

        records = load_dataset(args.data)
        if not records:
            raise ValidationError(f"{args.data} has no sequences")
        groups = group_by_label(records)
        preprocessing: Optional[PCATransform] = None
        if args.pca_dim is not None or args.pca_variance is not None:
            preprocessing = pca_fit(
                [r.frames for r in records],
                target_dim=args.pca_dim,
                variance_fraction=args.pca_variance,
            )
            records = pca_apply(preprocessing, records)
            groups = group_by_label(records)
        dim = dataset_dim(records)
        mean, cov = pooled_moments(r.frames for r in records)

        selected: Dict[str, TrainedModel] = {}
        classes: List[types.ClassTraining] = []
        for label, group in groups.items():
            runs: List[types.TrainRun] = []
            best: Optional[TrainedModel] = None
            best_index = 0
            for n in states:
                for m in mixtures:
                    hyper = default_hyper(n, m, args.max_lag, dim, mean, cov)
                    LOG.info(
                        "training %r with N=%d, M=%d, K=%d", label, n, m, args.max_lag
                    )
                    model = fit([r.frames for r in group], hyper, config)
                    runs.append(
                        {
                            "states": n,
                            "mixtures": m,
                            "elbo": model.elbo_trace[-1],
                            "iterations": model.n_iters,
                            "converged": model.converged,
                            "elbo_trace": list(model.elbo_trace),
                        }
                    )
                    if best is None or model.elbo_trace[-1] > best.elbo_trace[-1]:
                        best, best_index = model, len(runs) - 1
            assert best is not None
            selected[label] = best
            classes.append({"label": label, "selected": best_index, "runs": runs})

        save_model(args.out, ModelBank(models=selected, preprocessing=preprocessing))
        report: types.TrainReport = {
            "max_lag": args.max_lag,
            "dim": dim,
            "classes": classes,
        }
        if args.report:
            JSON.write(args.report, dict(report))
        if args.json:
            self.echo_json(report)
        else:
            self._print_report(report)
        return 0

    def _print_report(self, report: types.TrainReport) -> None:
        self.echo(f"K={report['max_lag']}  D={report['dim']}")
        for cls in report["classes"]:
            self.echo(f"class {cls['label']}:")
            for index, run in enumerate(cls["runs"]):
                mark = "*" if index == cls["selected"] else " "
                self.echo(
                    f" {mark} N={run['states']} M={run['mixtures']}  "
                    f"ELBO={run['elbo']:.6f}  iterations={run['iterations']}  "
                    f"converged={run['converged']}"
                )
