"""Generative classification with one trained model per class."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import (
    TYPE_CHECKING,
    Dict,
    Iterable,
    List,
    Mapping,
    Optional,
    Protocol,
    Tuple,
)

import numpy as np
from numpy.typing import ArrayLike
from typing_extensions import Literal, TypeAlias

from .dirichlet import StarredParams, dirichlet_mean, starred
from .emissions import log_mean_emissions, log_starred_emissions
from .exceptions import DimensionMismatchError, UnknownLabelError, ValidationError
from .messages import forward, loglik
from .trainer import TrainedModel, check_sequences
from .utils import FloatArray

if TYPE_CHECKING:
    from .data import PCATransform

LOG = logging.getLogger(__name__)

Predictive: TypeAlias = Literal["starred", "mean"]


class LabeledSequence(Protocol):
    @property
    def id(self) -> str: ...

    @property
    def label(self) -> Optional[str]: ...

    @property
    def frames(self) -> FloatArray: ...


@dataclass(frozen=True, eq=False)
class ModelBank:
    """Trained models keyed by class label, in insertion order.

    :param models: label to model mapping
    :param preprocessing: projection applied to raw frames before scoring
    """

    models: Mapping[str, TrainedModel]
    preprocessing: Optional[PCATransform] = None

    def __post_init__(self):
        models = dict(self.models)
        if not models:
            raise ValidationError("a model bank needs at least one class")
        dims = {m.hyper.dim for m in models.values()}
        if len(dims) != 1:
            raise DimensionMismatchError(f"bank models disagree on D: {sorted(dims)}")
        pca = self.preprocessing
        if pca is not None and pca.n_components != self.dim:
            raise DimensionMismatchError(
                f"preprocessing yields D={pca.n_components}, "
                f"models expect {self.dim}"
            )
        object.__setattr__(self, "models", models)

    @property
    def labels(self) -> List[str]:
        return list(self.models)

    @property
    def dim(self) -> int:
        return next(iter(self.models.values())).hyper.dim

    def __getitem__(self, label: str) -> TrainedModel:
        try:
            return self.models[label]
        except KeyError:
            raise UnknownLabelError(label) from None

    def __len__(self) -> int:
        return len(self.models)

    def prepare(self, frames: ArrayLike) -> FloatArray:
        """Apply the bank's preprocessing to raw frames (identity if there is none)."""
        if self.preprocessing is None:
            return np.array(frames, dtype=np.float64)
        return self.preprocessing.apply(frames)


@dataclass(frozen=True)
class Prediction:
    id: str
    label: Optional[str]
    predicted: str
    scores: Dict[str, float]


@dataclass(frozen=True, eq=False)
class EvaluationReport:
    """Accuracy and confusion matrix of a labeled test set.

    ``confusion[i, j]`` counts sequences of true class ``labels[i]`` predicted as
    ``labels[j]``.
    """

    labels: List[str]
    accuracy: float
    confusion: np.ndarray
    per_class_accuracy: Dict[str, Optional[float]]
    predictions: List[Prediction] = field(default_factory=list)


def mean_params(model: TrainedModel) -> StarredParams:
    """Posterior-mean parameters arranged like starred parameters."""
    post = model.posteriors
    return StarredParams(
        pi_hat_star=dirichlet_mean(post.pi_hat),
        A_hat_star=dirichlet_mean(post.A_hat),
        pi_star=dirichlet_mean(post.pi),
        A_dep_star=dirichlet_mean(post.A_dep),
        c_star=dirichlet_mean(model.emissions.mix_weights),
    )


def score(
    model: TrainedModel,
    sequence: ArrayLike,
    predictive: Predictive = "starred",
    normalize_length: bool = False,
) -> float:
    """Approximate log predictive density of a sequence.

    :param model: trained model
    :param sequence: ``(T, D)`` frames, NaN rows missing
    :param predictive: plug in starred (``"starred"``) or posterior-mean (``"mean"``)
        parameters
    :param normalize_length: divide the score by ``T``
    :return: the forward log-likelihood
    :raises vbcdhmm.exceptions.DimensionMismatchError: if ``D`` differs from the model
    """
    frames = check_sequences([sequence], model.hyper.dim)[0]
    if predictive == "starred":
        params = starred(model.posteriors, model.emissions.mix_weights)
        log_emit = log_starred_emissions(model.emissions, frames)
    elif predictive == "mean":
        params = mean_params(model)
        log_emit = log_mean_emissions(model.emissions, frames)
    else:
        raise ValidationError(f"unknown predictive parameters {predictive!r}")
    value = loglik(forward(params, log_emit))
    if normalize_length:
        value /= frames.shape[0]
    return value


def classify(
    bank: ModelBank,
    sequence: ArrayLike,
    predictive: Predictive = "starred",
    normalize_length: bool = False,
) -> Tuple[str, Dict[str, float]]:
    """Label with the highest score; ties go to the lexicographically smallest label.

    ``sequence`` must already be in the bank's feature space (see
    :meth:`ModelBank.prepare`).

    :return: the winning label and every class's score in bank order
    """
    scores = {
        label: score(model, sequence, predictive, normalize_length)
        for label, model in bank.models.items()
    }
    best = max(scores.values())
    return min(label for label, value in scores.items() if value == best), scores


def evaluate(
    bank: ModelBank,
    records: Iterable[LabeledSequence],
    predictive: Predictive = "starred",
    normalize_length: bool = False,
) -> EvaluationReport:
    """Classify a labeled test set and tabulate the results.

    Records are scored as given; apply :meth:`ModelBank.prepare` first if the bank
    carries preprocessing.

    :raises vbcdhmm.exceptions.ValidationError: if the test set is empty
    :raises vbcdhmm.exceptions.UnknownLabelError: if a label is not in the bank
    """
    labels = bank.labels
    index = {label: i for i, label in enumerate(labels)}
    confusion = np.zeros((len(labels), len(labels)), dtype=int)
    predictions: List[Prediction] = []
    for record in records:
        if record.label is None or record.label not in index:
            raise UnknownLabelError(str(record.label))
        predicted, scores = classify(bank, record.frames, predictive, normalize_length)
        confusion[index[record.label], index[predicted]] += 1
        predictions.append(Prediction(record.id, record.label, predicted, scores))
        LOG.debug("%s: true %s, predicted %s", record.id, record.label, predicted)
    total = int(confusion.sum())
    if total == 0:
        raise ValidationError("test set is empty")
    rows = confusion.sum(axis=1)
    per_class = {
        label: float(confusion[i, i] / rows[i]) if rows[i] else None
        for i, label in enumerate(labels)
    }
    return EvaluationReport(
        labels=labels,
        accuracy=float(np.trace(confusion) / total),
        confusion=confusion,
        per_class_accuracy=per_class,
        predictions=predictions,
    )


def dependence_matrix(model: TrainedModel) -> FloatArray:
    """Posterior mean of the ``K × K`` lag transition matrix ``Â``."""
    return model.posteriors.mean_A_hat()
