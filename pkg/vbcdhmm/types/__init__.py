from __future__ import annotations

from .dataset import LatentTrace, SequenceRecord
from .generator import GeneratorSpec
from .model import (
    BankEntry,
    BankFile,
    Component,
    Emissions,
    Hyper,
    LatentPosteriors,
    Model,
    ModelFile,
    Preprocessing,
)
from .reports import (
    ClassTraining,
    DependenceReport,
    EvaluationReport,
    Prediction,
    TrainReport,
    TrainRun,
)

__all__ = [
    "BankEntry",
    "BankFile",
    "ClassTraining",
    "Component",
    "DependenceReport",
    "Emissions",
    "EvaluationReport",
    "GeneratorSpec",
    "Hyper",
    "LatentPosteriors",
    "LatentTrace",
    "Model",
    "ModelFile",
    "Prediction",
    "Preprocessing",
    "SequenceRecord",
    "TrainReport",
    "TrainRun",
]
