from __future__ import annotations

from typing import Dict, List, Optional

from typing_extensions import TypedDict


class TrainRun(TypedDict):
    states: int
    mixtures: int
    elbo: float
    iterations: int
    converged: bool
    elbo_trace: List[float]


class ClassTraining(TypedDict):
    label: str
    # Index into ``runs`` of the highest-ELBO configuration
    selected: int
    runs: List[TrainRun]


class TrainReport(TypedDict):
    max_lag: int
    dim: int
    classes: List[ClassTraining]


class Prediction(TypedDict):
    id: str
    label: Optional[str]
    predicted: str
    scores: Dict[str, float]


class EvaluationReport(TypedDict):
    labels: List[str]
    accuracy: float
    # Rows are true labels, columns predicted labels
    confusion: List[List[int]]
    per_class_accuracy: Dict[str, Optional[float]]
    predictions: List[Prediction]


class DependenceReport(TypedDict):
    label: str
    max_lag: int
    # Posterior mean of the lag transition matrix
    dependence: List[List[float]]
