"""Gaussian-mixture emissions with Normal-Wishart variational posteriors.

Frames are rows of a ``(T, D)`` array; a missing frame is a row of NaN. Missing
frames have starred emission exactly one for every state and never contribute to
the Normal-Wishart or mixture-weight statistics.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike
from scipy import linalg, special

from .dirichlet import DirichletPosterior, ModelHyper, dirichlet_mean, starred_rows
from .exceptions import DimensionMismatchError, ValidationError
from .utils import FloatArray, cho_logdet, spd_cholesky, to_array

LOG = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True, eq=False)
class NWPosterior:
    """Normal-Wishart distribution over a component's mean and precision.

    ``R ~ Wishart(dof_t, inv(scale_t))`` and ``μ | R ~ N(mean_t, inv(lambda_t · R))``.
    The same type describes the prior.
    """

    lambda_t: float
    mean_t: FloatArray
    dof_t: float
    scale_t: FloatArray

    def __post_init__(self):
        mean = to_array(self.mean_t).reshape(-1)
        scale = to_array(self.scale_t)
        d = mean.shape[0]
        if scale.shape != (d, d):
            raise DimensionMismatchError(
                f"scale shape {scale.shape} does not match mean dimension {d}"
            )
        if not self.lambda_t > 0:
            raise ValidationError("lambda must be > 0")
        if not self.dof_t > d - 1:
            raise ValidationError(f"degrees of freedom must exceed D - 1 = {d - 1}")
        object.__setattr__(self, "mean_t", mean)
        object.__setattr__(self, "scale_t", scale)
        object.__setattr__(self, "lambda_t", float(self.lambda_t))
        object.__setattr__(self, "dof_t", float(self.dof_t))

    @property
    def dim(self) -> int:
        return self.mean_t.shape[0]

    @cached_property
    def factor(self) -> Tuple[FloatArray, bool]:
        return spd_cholesky(self.scale_t, "component scale")

    @cached_property
    def logdet_scale(self) -> float:
        return cho_logdet(self.factor)

    @cached_property
    def expected_logdet_precision(self) -> float:
        d = self.dim
        half = (self.dof_t + 1.0 - np.arange(1, d + 1)) / 2.0
        digammas = float(special.digamma(half).sum())
        return digammas + d * math.log(2.0) - self.logdet_scale

    def mahalanobis(self, y: ArrayLike) -> FloatArray:
        """``(y − m̃)ᵀ S̃⁻¹ (y − m̃)`` for each row of ``y``."""
        diff = np.atleast_2d(to_array(y)) - self.mean_t
        half = linalg.solve_triangular(self.factor[0], diff.T, lower=True)
        return np.sum(half * half, axis=0)


class WeightedStats(NamedTuple):
    """Responsibility-weighted sufficient statistics of one or more components."""

    count: FloatArray
    mean: FloatArray
    scatter: FloatArray


@dataclass(frozen=True, eq=False)
class EmissionModel:
    """Per-state Gaussian mixtures.

    :param components: ``N × M`` grid of component posteriors
    :param mix_weights: Dirichlet posteriors of the mixture weights, shape ``(N, M)``
    """

    components: Tuple[Tuple[NWPosterior, ...], ...]
    mix_weights: DirichletPosterior

    def __post_init__(self):
        grid = tuple(tuple(row) for row in self.components)
        if not grid or not grid[0]:
            raise ValidationError("emission model needs at least one component")
        n, m = len(grid), len(grid[0])
        if any(len(row) != m for row in grid):
            raise DimensionMismatchError("component grid must be rectangular")
        if self.mix_weights.shape != (n, m):
            raise DimensionMismatchError(
                f"mixture weights shape {self.mix_weights.shape} does not match "
                f"component grid {(n, m)}"
            )
        dims = {comp.dim for row in grid for comp in row}
        if len(dims) != 1:
            raise DimensionMismatchError("all components must share D")
        object.__setattr__(self, "components", grid)

    @property
    def n_states(self) -> int:
        return len(self.components)

    @property
    def n_components(self) -> int:
        return len(self.components[0])

    @property
    def dim(self) -> int:
        return self.components[0][0].dim

    def component(self, state: int, index: int) -> NWPosterior:
        return self.components[state][index]

    @classmethod
    def from_prior(cls, hyper: ModelHyper) -> EmissionModel:
        prior = nw_prior(hyper)
        return cls(
            components=tuple(
                tuple(prior for _ in range(hyper.n_components))
                for _ in range(hyper.n_states)
            ),
            mix_weights=DirichletPosterior(hyper.w),
        )


def nw_prior(hyper: ModelHyper) -> NWPosterior:
    """The Normal-Wishart prior shared by every component."""
    return NWPosterior(
        lambda_t=hyper.nw_lambda,
        mean_t=hyper.nw_mean,
        dof_t=hyper.nw_dof,
        scale_t=hyper.nw_scale,
    )


def present_mask(frames: ArrayLike) -> np.ndarray:
    """Boolean mask of the frames that are not missing."""
    values = np.atleast_2d(to_array(frames))
    return ~np.isnan(values).any(axis=1)


def expected_log_gauss(comp: NWPosterior, y: ArrayLike) -> FloatArray | float:
    """``E_q[log N(y | μ, R)]`` under a Normal-Wishart posterior.

    :param comp: the component posterior
    :param y: one frame (D,) or a batch of frames (T, D)
    :return: a float for a single frame, an array of length T otherwise
    :raises vbcdhmm.exceptions.DegenerateDataError: if the scale is singular
    """
    values = to_array(y)
    single = values.ndim == 1
    values = np.atleast_2d(values)
    if values.shape[1] != comp.dim:
        raise DimensionMismatchError(
            f"frame dimension {values.shape[1]} does not match D={comp.dim}"
        )
    d = comp.dim
    result = (
        0.5 * comp.expected_logdet_precision
        - d / (2.0 * comp.lambda_t)
        - 0.5 * comp.dof_t * comp.mahalanobis(values)
        - 0.5 * d * LOG_2PI
    )
    return float(result[0]) if single else result


def component_log_terms(model: EmissionModel, frames: ArrayLike) -> FloatArray:
    """``log c*_im + E log N(y_t | comp_im)`` with shape ``(T, N, M)``.

    Rows of missing frames are NaN.
    """
    values = np.atleast_2d(to_array(frames))
    if values.shape[1] != model.dim:
        raise DimensionMismatchError(
            f"frame dimension {values.shape[1]} does not match D={model.dim}"
        )
    present = present_mask(values)
    log_c = np.log(starred_rows(model.mix_weights))
    out = np.full((values.shape[0], model.n_states, model.n_components), np.nan)
    observed = values[present]
    if observed.shape[0]:
        for i, row in enumerate(model.components):
            for m, comp in enumerate(row):
                out[present, i, m] = log_c[i, m] + expected_log_gauss(comp, observed)
    return out


def log_starred_emissions(model: EmissionModel, frames: ArrayLike) -> FloatArray:
    """``log p*(y_t | x_t = i)`` for every frame and state, shape ``(T, N)``.

    Missing frames get exactly ``0.0``.
    """
    terms = component_log_terms(model, frames)
    present = ~np.isnan(terms[:, 0, 0])
    out = np.zeros(terms.shape[:2])
    if present.any():
        out[present] = special.logsumexp(terms[present], axis=2)
    return out


def log_mean_emissions(model: EmissionModel, frames: ArrayLike) -> FloatArray:
    """Log emission densities under posterior-mean parameters, shape ``(T, N)``.

    Uses mixture weights ``E[c]``, means ``m̃`` and precisions ``η̃ S̃⁻¹``; missing
    frames get ``0.0``.
    """
    values = np.atleast_2d(to_array(frames))
    present = present_mask(values)
    observed = values[present]
    weights = dirichlet_mean(model.mix_weights)
    d = model.dim
    out = np.zeros((values.shape[0], model.n_states))
    if not observed.shape[0]:
        return out
    terms = np.empty((observed.shape[0], model.n_states, model.n_components))
    for i, row in enumerate(model.components):
        for m, comp in enumerate(row):
            logdet = d * math.log(comp.dof_t) - comp.logdet_scale
            terms[:, i, m] = (
                math.log(weights[i, m])
                + 0.5 * logdet
                - 0.5 * d * LOG_2PI
                - 0.5 * comp.dof_t * comp.mahalanobis(observed)
            )
    out[present] = special.logsumexp(terms, axis=2)
    return out


def starred_emission(
    model: EmissionModel, frame: ArrayLike | None, state: int
) -> float:
    """``p*(y | x = state) = Σ_m c*_{state,m} exp(E log N(y | comp_{state,m}))``.

    A missing frame (``None`` or NaN) gives exactly ``1.0``.
    """
    if not 0 <= state < model.n_states:
        raise ValidationError(f"state {state} out of range for N={model.n_states}")
    if frame is None:
        return 1.0
    y = to_array(frame).reshape(-1)
    if np.isnan(y).any():
        return 1.0
    c_star = starred_rows(model.mix_weights)[state]
    return float(
        sum(
            c_star[m] * math.exp(expected_log_gauss(comp, y))
            for m, comp in enumerate(model.components[state])
        )
    )


class ComponentSplit(NamedTuple):
    """Mixture responsibilities of a sequence.

    ``underflow[t, i]`` is set where every component density of state ``i`` vanished
    at frame ``t`` and the split fell back to uniform.
    """

    gamma_comp: FloatArray
    underflow: np.ndarray


def component_responsibilities(
    model: EmissionModel, frames: ArrayLike, state_marginals: ArrayLike
) -> ComponentSplit:
    """Split each frame's state marginals across mixture components.

    :param model: the emission model
    :param frames: ``(T, D)`` frames, NaN rows missing
    :param state_marginals: ``(T, N)`` state posteriors ``γ^x``
    :return: ``(T, N, M)`` responsibilities whose rows sum to ``γ^x`` and the
        ``(T, N)`` underflow flags; missing frames are split by the posterior-mean
        mixture weights
    """
    gamma_x = np.atleast_2d(to_array(state_marginals))
    terms = component_log_terms(model, frames)
    if gamma_x.shape != terms.shape[:2]:
        raise DimensionMismatchError(
            f"state marginals shape {gamma_x.shape} does not match {terms.shape[:2]}"
        )
    if not np.allclose(gamma_x.sum(axis=1), 1.0, rtol=0.0, atol=1e-8):
        raise ValidationError("state marginals must sum to one at every frame")
    present = ~np.isnan(terms[:, 0, 0])
    split = np.empty_like(terms)
    underflow = np.zeros(terms.shape[:2], dtype=bool)
    split[~present] = dirichlet_mean(model.mix_weights)
    if present.any():
        observed = terms[present]
        norm = special.logsumexp(observed, axis=2, keepdims=True)
        ratio = np.exp(observed - norm)
        bad = ~np.isfinite(ratio).all(axis=2)
        if bad.any():
            LOG.warning(
                "component densities underflowed for %d frame/state pairs; "
                "splitting uniformly",
                int(bad.sum()),
            )
            ratio[bad] = 1.0 / model.n_components
            underflow[present] = bad
        split[present] = ratio
    return ComponentSplit(gamma_x[:, :, None] * split, underflow)


def weighted_stats(frames: ArrayLike, weights: ArrayLike) -> WeightedStats:
    """Two-pass weighted count, mean and scatter.

    :param frames: ``(F, D)`` observed frames (no missing rows)
    :param weights: ``(F,)`` or ``(F, ...)`` non-negative weights; the trailing axes
        index components
    :return: statistics with the trailing weight axes as leading axes
    """
    y = np.atleast_2d(to_array(frames))
    r = to_array(weights)
    if r.shape[0] != y.shape[0]:
        raise DimensionMismatchError(
            f"{r.shape[0]} weight rows for {y.shape[0]} frames"
        )
    r2 = r.reshape(r.shape[0], -1)
    count = r2.sum(axis=0)
    safe = np.where(count > 0, count, 1.0)
    mean = (r2.T @ y) / safe[:, None]
    mean[count <= 0] = 0.0
    centered = y[None, :, :] - mean[:, None, :]
    scatter = np.einsum("kf,kfd,kfe->kde", r2.T, centered, centered)
    tail = r.shape[1:]
    d = y.shape[1]
    return WeightedStats(
        count=count.reshape(tail),
        mean=mean.reshape(tail + (d,)),
        scatter=scatter.reshape(tail + (d, d)),
    )


def update_nw(prior: NWPosterior, stats: WeightedStats) -> NWPosterior:
    """Conjugate Normal-Wishart update from one component's weighted statistics."""
    count = float(stats.count)
    if count < 0:
        raise ValidationError("weighted count must be non-negative")
    if count == 0:
        return prior
    ybar = to_array(stats.mean).reshape(-1)
    scatter = to_array(stats.scatter)
    if ybar.shape != (prior.dim,) or scatter.shape != (prior.dim, prior.dim):
        raise DimensionMismatchError("statistics do not match the prior dimension")
    lam = prior.lambda_t + count
    diff = ybar - prior.mean_t
    scale = (
        prior.scale_t
        + scatter
        + (prior.lambda_t * count / lam) * np.outer(diff, diff)
    )
    return NWPosterior(
        lambda_t=lam,
        mean_t=(prior.lambda_t * prior.mean_t + count * ybar) / lam,
        dof_t=prior.dof_t + count,
        scale_t=0.5 * (scale + scale.T),
    )


def nw_kl(post: NWPosterior, prior: NWPosterior) -> float:
    """Closed-form ``KL(NW(post) ‖ NW(prior))``.

    :raises vbcdhmm.exceptions.DegenerateDataError: if a scale matrix is singular
    """
    if post.dim != prior.dim:
        raise DimensionMismatchError(
            f"posterior D={post.dim} does not match prior D={prior.dim}"
        )
    d = post.dim
    gauss = 0.5 * (
        d * prior.lambda_t / post.lambda_t
        + prior.lambda_t * post.dof_t * float(post.mahalanobis(prior.mean_t)[0])
        - d
        + d * math.log(post.lambda_t / prior.lambda_t)
    )
    trace = float(np.trace(linalg.cho_solve(post.factor, prior.scale_t)))
    wishart = (
        0.5 * (post.dof_t - prior.dof_t) * post.expected_logdet_precision
        - 0.5 * post.dof_t * d
        + 0.5 * post.dof_t * trace
        - 0.5 * (post.dof_t - prior.dof_t) * d * math.log(2.0)
        + 0.5 * post.dof_t * post.logdet_scale
        - 0.5 * prior.dof_t * prior.logdet_scale
        - special.multigammaln(0.5 * post.dof_t, d)
        + special.multigammaln(0.5 * prior.dof_t, d)
    )
    return float(gauss + wishart)


def grid_kl(model: EmissionModel, prior: NWPosterior) -> float:
    """Sum of :func:`nw_kl` over every component of ``model``."""
    return float(sum(nw_kl(comp, prior) for row in model.components for comp in row))


def stats_for_components(
    frames: Sequence[FloatArray], responsibilities: Sequence[FloatArray]
) -> WeightedStats:
    """Pool present frames of several sequences into per-component statistics.

    :param frames: per-sequence ``(T, D)`` frames, NaN rows missing
    :param responsibilities: per-sequence ``(T, N, M)`` component responsibilities
    :return: statistics with shapes ``(N, M)``, ``(N, M, D)``, ``(N, M, D, D)``
    """
    ys = []
    rs = []
    for values, resp in zip(frames, responsibilities):
        values = np.atleast_2d(values)
        present = present_mask(values)
        ys.append(values[present])
        rs.append(resp[present])
    return weighted_stats(np.concatenate(ys), np.concatenate(rs))
