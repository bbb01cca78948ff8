"""Top-level package for vbcdhmm."""

from importlib import metadata

vbcdhmm_metadata = metadata.metadata(__package__)  # type: ignore

__author__ = "vbcdhmm developers"
__email__ = vbcdhmm_metadata["Author-email"]
__version__ = vbcdhmm_metadata["Version"]


from .classifier import ModelBank, classify, dependence_matrix, evaluate, score
from .data import (
    GeneratorSpec,
    PCATransform,
    SequenceRecord,
    generate,
    load_dataset,
    load_model,
    mask_missing,
    pca_apply,
    pca_fit,
    save_dataset,
    save_model,
)
from .dirichlet import LatentPosteriors, ModelHyper, default_hyper, starred
from .emissions import EmissionModel, NWPosterior
from .formats import JSON, JSONL, PGM
from .trainer import TrainConfig, TrainedModel, fit

__all__ = [
    "EmissionModel",
    "GeneratorSpec",
    "JSON",
    "JSONL",
    "LatentPosteriors",
    "ModelBank",
    "ModelHyper",
    "NWPosterior",
    "PCATransform",
    "PGM",
    "SequenceRecord",
    "TrainConfig",
    "TrainedModel",
    "classify",
    "default_hyper",
    "dependence_matrix",
    "evaluate",
    "fit",
    "generate",
    "load_dataset",
    "load_model",
    "mask_missing",
    "pca_apply",
    "pca_fit",
    "save_dataset",
    "save_model",
    "score",
    "starred",
]
