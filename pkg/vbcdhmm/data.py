"""Datasets, model files, PCA preprocessing, frame masking and synthetic data."""

from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.typing import ArrayLike
from sklearn.decomposition import PCA

from . import models
from . import types
from .classifier import ModelBank
from .dirichlet import DirichletPosterior, LatentPosteriors, ModelHyper
from .emissions import EmissionModel, NWPosterior, present_mask
from .exceptions import (
    DatasetError,
    DegenerateDataError,
    DimensionMismatchError,
    SchemaVersionError,
    ValidationError,
)
from .formats import JSON, JSONL, PathLike
from .trainer import TrainedModel
from .utils import FloatArray, derived_rng, spd_cholesky, to_array, to_nested

LOG = logging.getLogger(__name__)

#: version written to, and required from, model and bank files
SCHEMA_VERSION = 1

#: tolerance on the row sums of a generator specification
ROW_SUM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SequenceRecord:
    """One sequence of frames; a missing frame is a row of NaN.

    :param id: unique id of the sequence
    :param label: class label, ``None`` if unlabeled
    :param frames: ``(T, D)`` frames
    """

    id: str
    label: Optional[str]
    frames: FloatArray

    def __post_init__(self):
        frames = to_array(self.frames)
        if frames.ndim != 2 or frames.shape[0] < 1:
            raise DatasetError("a sequence needs at least one frame", record_id=self.id)
        nan = np.isnan(frames)
        if np.any(nan.any(axis=1) & ~nan.all(axis=1)):
            raise DatasetError("frames must be complete or missing", record_id=self.id)
        if np.any(np.isinf(frames)):
            raise DatasetError("frames must be finite", record_id=self.id)
        object.__setattr__(self, "frames", frames)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]

    @property
    def missing(self) -> np.ndarray:
        return ~present_mask(self.frames)

    def with_frames(self, frames: ArrayLike) -> SequenceRecord:
        return replace(self, frames=frames)

    def to_dict(self) -> types.SequenceRecord:
        return {
            "id": self.id,
            "label": self.label,
            "frames": [
                None if np.isnan(row).all() else row.tolist() for row in self.frames
            ],
        }


def _parse_record(obj: Dict[str, Any], line: int) -> Tuple[str, Optional[str], list]:
    record_id = obj.get("id")
    if not isinstance(record_id, str):
        raise DatasetError("'id' must be a string", line=line)
    label = obj.get("label")
    if label is not None and not isinstance(label, str):
        raise DatasetError(
            "'label' must be a string or null", line=line, record_id=record_id
        )
    frames = obj.get("frames")
    if not isinstance(frames, list) or not frames:
        raise DatasetError(
            "'frames' must be a non-empty list", line=line, record_id=record_id
        )
    dim = None
    for t, frame in enumerate(frames, start=1):
        if frame is None:
            continue
        if not isinstance(frame, list) or not frame:
            raise DatasetError(
                f"frame {t} must be a list of numbers or null",
                line=line,
                record_id=record_id,
            )
        for v in frame:
            numeric = isinstance(v, (int, float)) and not isinstance(v, bool)
            if not numeric or not math.isfinite(v):
                raise DatasetError(
                    f"frame {t} has a non-numeric or non-finite value",
                    line=line,
                    record_id=record_id,
                )
        if dim is None:
            dim = len(frame)
        elif len(frame) != dim:
            raise DatasetError(
                f"frame {t} has {len(frame)} values, earlier frames have {dim}",
                line=line,
                record_id=record_id,
            )
    return record_id, label, frames


def load_dataset(path: PathLike) -> List[SequenceRecord]:
    """Read a JSON Lines dataset.

    Each line is ``{"id": str, "label": str | null, "frames": [[...] | null, ...]}``;
    a ``null`` frame is missing.

    :raises vbcdhmm.exceptions.DatasetError: naming the line (and record) of the
        first malformed entry, or when frame dimensions disagree
    """
    parsed = []
    seen = set()
    dim = None
    for line, obj in JSONL.handle(path, is_stream=True):
        record_id, label, frames = _parse_record(obj, line)
        if record_id in seen:
            raise DatasetError("duplicate id", line=line, record_id=record_id)
        seen.add(record_id)
        for frame in frames:
            if frame is None:
                continue
            if dim is None:
                dim = len(frame)
            elif len(frame) != dim:
                raise DatasetError(
                    f"frames have {len(frame)} values, the dataset has D={dim}",
                    line=line,
                    record_id=record_id,
                )
            break
        parsed.append((line, record_id, label, frames))
    if parsed and dim is None:
        raise DatasetError("the dataset has no present frames")
    records = []
    for line, record_id, label, frames in parsed:
        values = np.array(
            [[math.nan] * dim if frame is None else frame for frame in frames],
            dtype=np.float64,
        )
        records.append(SequenceRecord(id=record_id, label=label, frames=values))
    LOG.info("loaded %d sequences from %s", len(records), path)
    return records


def save_dataset(path: PathLike, records: Iterable[SequenceRecord]) -> None:
    JSONL.write(path, [record.to_dict() for record in records])


def dataset_dim(records: Sequence[SequenceRecord]) -> int:
    """Common frame dimension of a dataset."""
    dims = {record.dim for record in records}
    if len(dims) != 1:
        raise DimensionMismatchError(f"records disagree on D: {sorted(dims)}")
    return dims.pop()


def pooled_moments(frames: Iterable[ArrayLike]) -> Tuple[FloatArray, FloatArray]:
    """Mean and covariance of the present frames of several sequences.

    :raises vbcdhmm.exceptions.DegenerateDataError: with fewer than two present frames
    """
    parts = [np.atleast_2d(to_array(f)) for f in frames]
    present = [part[present_mask(part)] for part in parts]
    if sum(p.shape[0] for p in present) < 2:
        raise DegenerateDataError("degenerate data: fewer than two present frames")
    pooled = np.concatenate(present)
    return pooled.mean(axis=0), np.atleast_2d(np.cov(pooled, rowvar=False))


def group_by_label(
    records: Iterable[SequenceRecord],
) -> Dict[str, List[SequenceRecord]]:
    """Records per label, labels in order of first appearance.

    :raises vbcdhmm.exceptions.DatasetError: if a record has no label
    """
    groups: Dict[str, List[SequenceRecord]] = {}
    for record in records:
        if record.label is None:
            raise DatasetError("record has no label", record_id=record.id)
        groups.setdefault(record.label, []).append(record)
    return groups


@dataclass(frozen=True, eq=False)
class PCATransform:
    """Mean-centered orthogonal projection.

    :param mean: ``(D,)`` mean of the fitted frames
    :param components: ``(d, D)`` orthonormal principal axes, decreasing variance
    :param explained_variance: ``(d,)`` variance along each axis
    """

    mean: FloatArray
    components: FloatArray
    explained_variance: FloatArray

    def __post_init__(self):
        mean = to_array(self.mean).reshape(-1)
        comps = np.atleast_2d(to_array(self.components))
        var = to_array(self.explained_variance).reshape(-1)
        if comps.shape[1] != mean.shape[0] or var.shape[0] != comps.shape[0]:
            raise DimensionMismatchError("inconsistent PCA transform shapes")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "explained_variance", var)

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    @property
    def input_dim(self) -> int:
        return self.components.shape[1]

    def apply(self, frames: ArrayLike) -> FloatArray:
        """Project ``(T, D)`` frames; missing rows stay missing."""
        values = np.atleast_2d(to_array(frames))
        if values.shape[1] != self.input_dim:
            raise DimensionMismatchError(
                f"frames have D={values.shape[1]}, transform expects {self.input_dim}"
            )
        out = np.full((values.shape[0], self.n_components), np.nan)
        present = present_mask(values)
        out[present] = (values[present] - self.mean) @ self.components.T
        return out

    def inverse(self, projected: ArrayLike) -> FloatArray:
        """Map projected frames back to the input space."""
        values = np.atleast_2d(to_array(projected))
        if values.shape[1] != self.n_components:
            raise DimensionMismatchError(
                f"frames have d={values.shape[1]}, transform yields {self.n_components}"
            )
        return values @ self.components + self.mean

    def to_dict(self) -> types.Preprocessing:
        return {
            "kind": "pca",
            "mean": to_nested(self.mean),
            "components": to_nested(self.components),
            "explained_variance": to_nested(self.explained_variance),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> PCATransform:
        if data.get("kind") != "pca":
            raise ValidationError(f"unknown preprocessing kind {data.get('kind')!r}")
        return cls(
            mean=data["mean"],
            components=data["components"],
            explained_variance=data["explained_variance"],
        )


def pca_fit(
    frames: Sequence[ArrayLike],
    target_dim: Optional[int] = None,
    variance_fraction: Optional[float] = None,
) -> PCATransform:
    """Fit a PCA projection on the present frames of several sequences.

    Exactly one of ``target_dim`` and ``variance_fraction`` is given; a fraction keeps
    the fewest components whose cumulative explained variance reaches it. Each axis is
    signed so that its largest-magnitude coordinate is positive.

    :raises vbcdhmm.exceptions.ValidationError: if ``target_dim > D`` or the options
        conflict
    :raises vbcdhmm.exceptions.DegenerateDataError: with too few frames
    """
    if (target_dim is None) == (variance_fraction is None):
        raise ValidationError("give exactly one of target_dim and variance_fraction")
    pooled = np.concatenate(
        [np.atleast_2d(to_array(f))[present_mask(f)] for f in frames]
    )
    n_frames, dim = pooled.shape
    if target_dim is not None:
        if not 1 <= target_dim <= dim:
            raise ValidationError(f"target_dim must be in [1, {dim}], got {target_dim}")
        if n_frames <= target_dim:
            raise DegenerateDataError(
                f"need more than {target_dim} frames to fit PCA, got {n_frames}"
            )
    elif not 0 < variance_fraction <= 1:
        raise ValidationError("variance_fraction must be in (0, 1]")
    elif n_frames < 2:
        raise DegenerateDataError("need at least two frames to fit PCA")

    pca = PCA(svd_solver="full").fit(pooled)
    comps = np.array(pca.components_, dtype=np.float64)
    variance = np.array(pca.explained_variance_, dtype=np.float64)
    if target_dim is None:
        ratio = np.cumsum(pca.explained_variance_ratio_)
        target_dim = min(int(np.searchsorted(ratio, variance_fraction)) + 1, len(ratio))
    comps = comps[:target_dim]
    signs = np.sign(comps[np.arange(target_dim), np.argmax(np.abs(comps), axis=1)])
    comps *= np.where(signs == 0, 1.0, signs)[:, None]
    LOG.info("PCA keeps %d of %d dimensions", target_dim, dim)
    return PCATransform(
        mean=pca.mean_, components=comps, explained_variance=variance[:target_dim]
    )


def pca_apply(
    transform: PCATransform, records: Iterable[SequenceRecord]
) -> List[SequenceRecord]:
    """Project every record; lengths and missing positions are preserved."""
    return [record.with_frames(transform.apply(record.frames)) for record in records]


def mask_missing(
    records: Sequence[SequenceRecord], fraction: float, seed: int
) -> List[SequenceRecord]:
    """Mark ``round(fraction · T)`` frames of every sequence as missing.

    Positions are drawn uniformly without replacement from frames ``2..T`` (the first
    frame is never masked, so at most ``T − 1`` frames are), from a stream derived
    from ``(seed, record index)``. Halves round up.

    :raises vbcdhmm.exceptions.ValidationError: unless ``0 <= fraction < 1``
    """
    if not 0 <= fraction < 1:
        raise ValidationError(f"fraction must be in [0, 1), got {fraction}")
    masked = []
    for index, record in enumerate(records):
        n = record.n_frames
        count = min(int(math.floor(fraction * n + 0.5)), n - 1)
        if count == 0:
            masked.append(record)
            continue
        rng = derived_rng(seed, index)
        positions = rng.choice(np.arange(1, n), size=count, replace=False)
        frames = record.frames.copy()
        frames[positions] = np.nan
        masked.append(record.with_frames(frames))
    return masked


def model_to_dict(model: TrainedModel) -> types.Model:
    hyper = model.hyper
    post = model.posteriors
    return {
        "hyper": {
            "n_states": hyper.n_states,
            "n_components": hyper.n_components,
            "max_lag": hyper.max_lag,
            "dim": hyper.dim,
            "alpha0": to_nested(hyper.alpha0),
            "alpha": to_nested(hyper.alpha),
            "eta0": to_nested(hyper.eta0),
            "eta_dep": to_nested(hyper.eta_dep),
            "w": to_nested(hyper.w),
            "nw_lambda": hyper.nw_lambda,
            "nw_mean": to_nested(hyper.nw_mean),
            "nw_dof": hyper.nw_dof,
            "nw_scale": to_nested(hyper.nw_scale),
        },
        "latent_posteriors": {
            "pi_hat": to_nested(post.pi_hat.concentration),
            "A_hat": to_nested(post.A_hat.concentration),
            "pi": to_nested(post.pi.concentration),
            "A_dep": to_nested(post.A_dep.concentration),
        },
        "emissions": {
            "mix_weights": to_nested(model.emissions.mix_weights.concentration),
            "components": [
                [
                    {
                        "lambda_t": comp.lambda_t,
                        "mean_t": to_nested(comp.mean_t),
                        "dof_t": comp.dof_t,
                        "scale_t": to_nested(comp.scale_t),
                    }
                    for comp in row
                ]
                for row in model.emissions.components
            ],
        },
        "elbo_trace": list(model.elbo_trace),
        "converged": model.converged,
    }


def model_from_dict(data: Dict[str, Any]) -> TrainedModel:
    """Inverse of :func:`model_to_dict`.

    :raises vbcdhmm.exceptions.ValidationError: if fields are missing or malformed
    """
    try:
        data = models.TrainedModel.convert(copy.deepcopy(data))
        latent = data["latent_posteriors"]
        emissions = data["emissions"]
        return TrainedModel(
            hyper=ModelHyper(**data["hyper"]),
            posteriors=LatentPosteriors(
                pi_hat=DirichletPosterior(latent["pi_hat"]),
                A_hat=DirichletPosterior(latent["A_hat"]),
                pi=DirichletPosterior(latent["pi"]),
                A_dep=DirichletPosterior(latent["A_dep"]),
            ),
            emissions=EmissionModel(
                components=tuple(
                    tuple(NWPosterior(**comp) for comp in row)
                    for row in emissions["components"]
                ),
                mix_weights=DirichletPosterior(emissions["mix_weights"]),
            ),
            elbo_trace=data["elbo_trace"],
            converged=bool(data["converged"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ValidationError(f"malformed model: {e!r}") from e


def bank_to_dict(bank: ModelBank) -> types.BankFile:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "bank",
        "preprocessing": None
        if bank.preprocessing is None
        else bank.preprocessing.to_dict(),
        "models": [
            {"label": label, "model": model_to_dict(model)}
            for label, model in bank.models.items()
        ],
    }


def bank_from_dict(data: Dict[str, Any]) -> ModelBank:
    try:
        data = models.Bank.convert(copy.deepcopy(data))
        preprocessing = data["preprocessing"]
        entries = data["models"]
        labels = [entry["label"] for entry in entries]
        if len(set(labels)) != len(labels):
            raise ValidationError("bank has duplicate labels")
        return ModelBank(
            models={
                entry["label"]: model_from_dict(entry["model"]) for entry in entries
            },
            preprocessing=None
            if preprocessing is None
            else PCATransform.from_dict(preprocessing),
        )
    except (KeyError, TypeError) as e:
        raise ValidationError(f"malformed bank: {e!r}") from e


def save_model(path: PathLike, obj: Union[TrainedModel, ModelBank]) -> None:
    """Write a model or a bank as JSON with exact float round-trip."""
    if isinstance(obj, ModelBank):
        JSON.write(path, dict(bank_to_dict(obj)))
        return
    data: Dict[str, Any] = {"schema_version": SCHEMA_VERSION, "kind": "model"}
    data.update(model_to_dict(obj))
    JSON.write(path, data)


def load_model(path: PathLike) -> Union[TrainedModel, ModelBank]:
    """Read a file written by :func:`save_model`.

    :raises vbcdhmm.exceptions.SchemaVersionError: on an unsupported version
    """
    data = JSON.handle(path)
    if not isinstance(data, dict):
        raise ValidationError(f"{path}: expected a JSON object")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(version, SCHEMA_VERSION)
    kind = data.get("kind")
    if kind == "bank":
        return bank_from_dict(data)
    if kind == "model":
        return model_from_dict(data)
    raise ValidationError(f"{path}: unknown file kind {kind!r}")


def load_bank(path: PathLike) -> ModelBank:
    obj = load_model(path)
    if not isinstance(obj, ModelBank):
        raise ValidationError(f"{path} holds a single model, not a bank")
    return obj


@dataclass(frozen=True, eq=False)
class GeneratorSpec:
    """Exact parameters of a CD-HMM used for ancestral sampling.

    ``pi_hat`` is kept for completeness; sampling always starts at lag 1.
    """

    pi_hat: FloatArray
    A_hat: FloatArray
    pi: FloatArray
    A_dep: FloatArray
    weights: FloatArray
    means: FloatArray
    covariances: FloatArray

    def __post_init__(self):
        for name in (
            "pi_hat",
            "A_hat",
            "pi",
            "A_dep",
            "weights",
            "means",
            "covariances",
        ):
            object.__setattr__(self, name, to_array(getattr(self, name)))
        k, n = self.pi_hat.shape[0], self.pi.shape[0]
        m = self.weights.shape[-1]
        d = self.means.shape[-1]
        expected = {
            "pi_hat": (k,),
            "A_hat": (k, k),
            "pi": (n,),
            "A_dep": (k, n, n),
            "weights": (n, m),
            "means": (n, m, d),
            "covariances": (n, m, d, d),
        }
        for name, shape in expected.items():
            got = getattr(self, name).shape
            if got != shape:
                raise DimensionMismatchError(
                    f"generator {name} must have shape {shape}, got {got}"
                )
        for name in ("pi_hat", "A_hat", "pi", "A_dep", "weights"):
            rows = getattr(self, name)
            off = np.abs(rows.sum(axis=-1) - 1.0)
            if (
                not np.all(np.isfinite(rows))
                or np.any(rows < 0)
                or np.any(off > ROW_SUM_TOL)
            ):
                raise ValidationError(f"generator {name} rows must be distributions")
        for name in ("means", "covariances"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValidationError(f"generator {name} must be finite")
        try:
            self.factors
        except DegenerateDataError as e:
            raise ValidationError(f"generator {e.message}") from e

    @cached_property
    def factors(self) -> FloatArray:
        """Lower Cholesky factors of every component covariance."""
        n, m = self.weights.shape
        out = np.empty_like(self.covariances)
        for i in range(n):
            for j in range(m):
                factor = spd_cholesky(self.covariances[i, j], f"covariance ({i}, {j})")
                out[i, j] = np.tril(factor[0])
        return out

    @property
    def max_lag(self) -> int:
        return self.pi_hat.shape[0]

    @property
    def n_states(self) -> int:
        return self.pi.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[-1]

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> GeneratorSpec:
        try:
            data = models.GeneratorSpec.convert(copy.deepcopy(data))
            return cls(**data)
        except (IndexError, TypeError, ValueError) as e:
            raise ValidationError(f"malformed generator spec: {e!r}") from e

    def to_dict(self) -> types.GeneratorSpec:
        return {
            "pi_hat": to_nested(self.pi_hat),
            "A_hat": to_nested(self.A_hat),
            "pi": to_nested(self.pi),
            "A_dep": to_nested(self.A_dep),
            "weights": to_nested(self.weights),
            "means": to_nested(self.means),
            "covariances": to_nested(self.covariances),
        }


@dataclass(frozen=True, eq=False)
class LatentTrace:
    """Sampled latent paths: 0-based states and 1-based lags."""

    id: str
    states: np.ndarray
    lags: np.ndarray

    def to_dict(self) -> types.LatentTrace:
        return {
            "id": self.id,
            "states": [int(v) for v in self.states],
            "lags": [int(v) for v in self.lags],
        }


def _sample_sequence(
    spec: GeneratorSpec, n_frames: int, rng: np.random.Generator
) -> Tuple[FloatArray, np.ndarray, np.ndarray]:
    k, d = spec.max_lag, spec.dim
    states = np.zeros(n_frames, dtype=int)
    lags = np.ones(n_frames, dtype=int)
    frames = np.empty((n_frames, d))
    factors = spec.factors
    for t in range(n_frames):
        if t == 0:
            states[0] = rng.choice(spec.n_states, p=spec.pi)
        else:
            feasible = min(k, t)
            probs = spec.A_hat[lags[t - 1] - 1, :feasible]
            total = probs.sum()
            if total > 0:
                lags[t] = 1 + rng.choice(feasible, p=probs / total)
            else:
                lags[t] = feasible
            src = states[t - lags[t]]
            states[t] = rng.choice(spec.n_states, p=spec.A_dep[lags[t] - 1, src])
        i = states[t]
        j = rng.choice(spec.weights.shape[1], p=spec.weights[i])
        frames[t] = spec.means[i, j] + factors[i, j] @ rng.standard_normal(d)
    return frames, states, lags


def generate(
    spec: GeneratorSpec,
    n_frames: int,
    count: int,
    seed: int,
    label: Optional[str] = None,
    id_prefix: str = "seq-",
) -> Tuple[List[SequenceRecord], List[LatentTrace]]:
    """Ancestral sampling of ``count`` sequences of ``n_frames`` frames.

    Lags that would reach before the first frame are renormalized away; if none of
    the feasible lags has mass the largest feasible lag is used. Sequence ``i`` uses
    a stream derived from ``(seed, i)``.

    :return: the records and their latent traces
    """
    if n_frames < 1:
        raise ValidationError("n_frames must be >= 1")
    if count < 0:
        raise ValidationError("count must be >= 0")
    records = []
    traces = []
    for index in range(count):
        rng = derived_rng(seed, index)
        frames, states, lags = _sample_sequence(spec, n_frames, rng)
        seq_id = f"{id_prefix}{index}"
        records.append(SequenceRecord(id=seq_id, label=label, frames=frames))
        traces.append(LatentTrace(id=seq_id, states=states, lags=lags))
    return records, traces


def save_traces(path: PathLike, traces: Iterable[LatentTrace]) -> None:
    JSONL.write(path, [trace.to_dict() for trace in traces])
