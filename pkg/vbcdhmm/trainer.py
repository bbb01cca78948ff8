"""Variational EM for VB-CD-HMMs."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike
from sklearn.cluster import KMeans

from .dirichlet import (
    DirichletPosterior,
    LatentPosteriors,
    ModelHyper,
    dirichlet_kl,
    starred,
    update_dirichlet,
)
from .emissions import (
    EmissionModel,
    NWPosterior,
    WeightedStats,
    component_responsibilities,
    grid_kl,
    log_starred_emissions,
    nw_prior,
    present_mask,
    stats_for_components,
    update_nw,
    weighted_stats,
)
from .exceptions import DegenerateDataError, DimensionMismatchError, ValidationError
from .messages import Responsibilities, forward, forward_backward
from .utils import FloatArray, to_array

LOG = logging.getLogger(__name__)

#: allowed ELBO decrease between iterations before a warning is logged
ELBO_SLACK = 1e-8
#: states with less total responsibility keep prior emission posteriors
EMPTY_STATE_MASS = 1e-6
#: concentration of the draw that perturbs the lag-chain initialization around uniform
INIT_SPREAD = 100.0


@dataclass(frozen=True)
class TrainConfig:
    """Stopping rule and seed of :func:`fit`.

    :param max_iters: maximum number of EM iterations
    :param rel_tol: stop once ``|ΔELBO| / |ELBO|`` drops below this
    :param seed: seed of the initialization
    :param min_iters: iterations always run before the tolerance is checked
    """

    max_iters: int = 200
    rel_tol: float = 1e-6
    seed: int = 0
    min_iters: int = 3

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValidationError("max_iters must be >= 1")
        if not self.rel_tol > 0:
            raise ValidationError("rel_tol must be > 0")
        if self.min_iters < 0 or self.max_iters < self.min_iters:
            raise ValidationError("need 0 <= min_iters <= max_iters")
        if self.seed < 0:
            raise ValidationError("seed must be non-negative")


@dataclass(frozen=True, eq=False)
class TrainedModel:
    hyper: ModelHyper
    posteriors: LatentPosteriors
    emissions: EmissionModel
    elbo_trace: Tuple[float, ...] = field(default=())
    converged: bool = False

    def __post_init__(self):
        self.posteriors.check(self.hyper)
        check_emissions(self.emissions, self.hyper)
        object.__setattr__(self, "elbo_trace", tuple(float(v) for v in self.elbo_trace))

    @property
    def n_iters(self) -> int:
        return len(self.elbo_trace)

    @property
    def final_elbo(self) -> float | None:
        return self.elbo_trace[-1] if self.elbo_trace else None


def check_emissions(emissions: EmissionModel, hyper: ModelHyper) -> None:
    got = (emissions.n_states, emissions.n_components, emissions.dim)
    expected = (hyper.n_states, hyper.n_components, hyper.dim)
    if got != expected:
        raise DimensionMismatchError(
            f"emission model has (N, M, D)={got}, hyperparameters {expected}"
        )


def check_sequences(sequences: Sequence[ArrayLike], dim: int) -> List[FloatArray]:
    """Validate sequences of frames and return them as float arrays.

    A missing frame is a row made entirely of NaN.

    :raises vbcdhmm.exceptions.DimensionMismatchError: if a sequence is not ``(T, D)``
    :raises vbcdhmm.exceptions.ValidationError: on empty sequences, partially missing
        or infinite frames
    """
    checked: List[FloatArray] = []
    for index, seq in enumerate(sequences):
        frames = to_array(seq)
        if frames.ndim != 2 or frames.shape[1] != dim:
            raise DimensionMismatchError(
                f"sequence {index} has shape {frames.shape}, expected (T, {dim})"
            )
        if frames.shape[0] < 1:
            raise ValidationError(f"sequence {index} has no frames")
        nan = np.isnan(frames)
        if np.any(nan.any(axis=1) & ~nan.all(axis=1)):
            raise ValidationError(f"sequence {index} has partially missing frames")
        if np.any(np.isinf(frames)):
            raise ValidationError(f"sequence {index} has infinite values")
        checked.append(frames)
    return checked


def _cluster(frames: FloatArray, n_clusters: int, seed: int) -> np.ndarray:
    """Hard K-means labels; empty clusters take the point farthest from its center."""
    if n_clusters == 1:
        return np.zeros(frames.shape[0], dtype=int)
    km = KMeans(n_clusters=n_clusters, random_state=seed, n_init=10).fit(frames)
    labels = np.asarray(km.labels_, dtype=int)
    centers = km.cluster_centers_
    for label in range(n_clusters):
        if np.any(labels == label):
            continue
        counts = np.bincount(labels, minlength=n_clusters)
        movable = counts[labels] > 1
        if not movable.any():
            break
        dist = np.sum((frames - centers[labels]) ** 2, axis=1)
        dist[~movable] = -1.0
        far = int(np.argmax(dist))
        LOG.warning("cluster %d is empty; re-seeding it from frame %d", label, far)
        labels[far] = label
    return labels


def _component_grid(
    prior: NWPosterior, stats: WeightedStats, active: np.ndarray
) -> Tuple[Tuple[NWPosterior, ...], ...]:
    n, m = np.shape(stats.count)
    return tuple(
        tuple(
            update_nw(
                prior,
                WeightedStats(stats.count[i, j], stats.mean[i, j], stats.scatter[i, j]),
            )
            if active[i]
            else prior
            for j in range(m)
        )
        for i in range(n)
    )


def kmeans_init(
    sequences: Sequence[ArrayLike], hyper: ModelHyper, seed: int
) -> Tuple[LatentPosteriors, EmissionModel]:
    """Initial posteriors from hard K-means assignments.

    States come from an ``N``-cluster K-means over every present frame and
    components from an ``M``-cluster K-means within each state. Emission posteriors,
    mixture weights, the initial-state posterior and every ``A^k`` are seeded from the
    hard assignments (``A^k`` from pairs of present frames ``k`` apart). The
    lag chain gets the prior plus pseudo-counts drawn close to uniform.

    :raises vbcdhmm.exceptions.DegenerateDataError: with fewer than ``N·M`` present
        frames
    """
    seqs = check_sequences(sequences, hyper.dim)
    if not seqs:
        raise ValidationError("no sequences to initialize from")
    n, m, k = hyper.n_states, hyper.n_components, hyper.max_lag
    masks = [present_mask(s) for s in seqs]
    pooled = np.concatenate([s[mask] for s, mask in zip(seqs, masks)])
    if pooled.shape[0] < n * m:
        raise DegenerateDataError(
            f"too few frames to initialize: {pooled.shape[0]} present, need {n * m}"
        )

    states = _cluster(pooled, n, seed)
    components = np.zeros_like(states)
    for i in range(n):
        rows = np.flatnonzero(states == i)
        if rows.size >= m:
            components[rows] = _cluster(pooled[rows], m, seed)
        else:
            components[rows] = np.arange(rows.size)

    onehot = np.zeros((pooled.shape[0], n, m))
    onehot[np.arange(pooled.shape[0]), states, components] = 1.0
    stats = weighted_stats(pooled, onehot)
    grid = _component_grid(nw_prior(hyper), stats, np.ones(n, dtype=bool))
    mix_weights = update_dirichlet(hyper.w, stats.count)

    pi_counts = np.zeros(n)
    dep_counts = np.zeros((k, n, n))
    start = 0
    for s, mask in zip(seqs, masks):
        labels = np.full(s.shape[0], -1)
        labels[mask] = states[start : start + int(mask.sum())]
        start += int(mask.sum())
        if labels[0] >= 0:
            pi_counts[labels[0]] += 1.0
        for lag in range(1, k + 1):
            src, dst = labels[:-lag], labels[lag:]
            ok = (src >= 0) & (dst >= 0)
            np.add.at(dep_counts[lag - 1], (src[ok], dst[ok]), 1.0)

    rng = np.random.Generator(np.random.PCG64(seed))
    n_steps = sum(max(s.shape[0] - 1, 0) for s in seqs)
    spread = np.full(k, INIT_SPREAD)
    pi_hat = hyper.alpha0 + rng.dirichlet(spread) * len(seqs)
    A_hat = hyper.alpha + rng.dirichlet(spread, size=k) * (n_steps / k)
    posteriors = LatentPosteriors(
        pi_hat=DirichletPosterior(pi_hat),
        A_hat=DirichletPosterior(A_hat),
        pi=update_dirichlet(hyper.eta0, pi_counts),
        A_dep=update_dirichlet(hyper.eta_dep, dep_counts),
    )
    return posteriors, EmissionModel(components=grid, mix_weights=mix_weights)


def e_step(
    posteriors: LatentPosteriors,
    emissions: EmissionModel,
    sequences: Sequence[ArrayLike],
) -> Tuple[List[Responsibilities], float]:
    """Responsibilities of every sequence and the summed forward log-normalizers.

    :return: per-sequence responsibilities (with ``gamma_comp``) and the total
    """
    if posteriors.n_states != emissions.n_states:
        raise DimensionMismatchError("posteriors and emissions disagree on N")
    seqs = check_sequences(sequences, emissions.dim)
    stars = starred(posteriors, emissions.mix_weights)
    results: List[Responsibilities] = []
    total = 0.0
    for frames in seqs:
        resp, ll = forward_backward(stars, log_starred_emissions(emissions, frames))
        split = component_responsibilities(emissions, frames, resp.gamma_x)
        results.append(replace(resp, gamma_comp=split.gamma_comp))
        total += ll
    return results, total


def m_step(
    hyper: ModelHyper,
    responsibilities: Sequence[Responsibilities],
    sequences: Sequence[ArrayLike],
) -> Tuple[LatentPosteriors, EmissionModel]:
    """Conjugate updates: every posterior is its prior plus the summed responsibilities.

    Missing frames contribute to the transition counts but not to the mixture weights
    or the Normal-Wishart statistics.
    """
    seqs = check_sequences(sequences, hyper.dim)
    if len(seqs) != len(responsibilities):
        raise DimensionMismatchError(
            f"{len(responsibilities)} responsibilities for {len(seqs)} sequences"
        )
    n, m, k = hyper.n_states, hyper.n_components, hyper.max_lag
    pi_hat = np.zeros(k)
    A_hat = np.zeros((k, k))
    pi = np.zeros(n)
    A_dep = np.zeros((k, n, n))
    comps: List[FloatArray] = []
    for frames, resp in zip(seqs, responsibilities):
        if resp.gamma_comp is None:
            raise ValidationError("responsibilities lack component weights")
        if resp.gamma_x.shape != (frames.shape[0], n) or resp.gamma_z.shape[1] != k:
            raise DimensionMismatchError("responsibilities do not match the sequence")
        pi_hat += resp.gamma_z[0]
        A_hat += resp.gamma_zz.sum(axis=0)
        pi += resp.gamma_x[0]
        A_dep += resp.gamma_xx.sum(axis=0)
        comps.append(resp.gamma_comp)

    stats = stats_for_components(seqs, comps)
    state_mass = np.asarray(stats.count).reshape(n, m).sum(axis=1)
    grid = _component_grid(nw_prior(hyper), stats, state_mass >= EMPTY_STATE_MASS)
    posteriors = LatentPosteriors(
        pi_hat=update_dirichlet(hyper.alpha0, pi_hat),
        A_hat=update_dirichlet(hyper.alpha, A_hat),
        pi=update_dirichlet(hyper.eta0, pi),
        A_dep=update_dirichlet(hyper.eta_dep, A_dep),
    )
    emissions = EmissionModel(
        components=grid, mix_weights=update_dirichlet(hyper.w, stats.count)
    )
    return posteriors, emissions


def kl_total(
    posteriors: LatentPosteriors, emissions: EmissionModel, hyper: ModelHyper
) -> float:
    """Sum of every posterior-to-prior KL divergence of the model."""
    return (
        dirichlet_kl(posteriors.pi_hat, hyper.alpha0)
        + dirichlet_kl(posteriors.A_hat, hyper.alpha)
        + dirichlet_kl(posteriors.pi, hyper.eta0)
        + dirichlet_kl(posteriors.A_dep, hyper.eta_dep)
        + dirichlet_kl(emissions.mix_weights, hyper.w)
        + grid_kl(emissions, nw_prior(hyper))
    )


def elbo(
    posteriors: LatentPosteriors,
    emissions: EmissionModel,
    hyper: ModelHyper,
    sequences: Sequence[ArrayLike],
) -> float:
    """Evidence lower bound: summed forward log-normalizers minus all KL terms."""
    posteriors.check(hyper)
    check_emissions(emissions, hyper)
    stars = starred(posteriors, emissions.mix_weights)
    loglik = sum(
        forward(stars, log_starred_emissions(emissions, frames)).log_normalizer
        for frames in check_sequences(sequences, hyper.dim)
    )
    return float(loglik) - kl_total(posteriors, emissions, hyper)


def fit(
    sequences: Sequence[ArrayLike],
    hyper: ModelHyper,
    config: TrainConfig | None = None,
    init: Optional[Tuple[LatentPosteriors, EmissionModel]] = None,
) -> TrainedModel:
    """Train a model by variational EM.

    Each iteration runs an M-step from the current responsibilities, an E-step under
    the new posteriors and records the ELBO.

    :param sequences: ``(T, D)`` frame arrays, NaN rows missing
    :param hyper: hyperparameters
    :param config: stopping rule and seed
    :param init: starting posteriors (default :func:`kmeans_init`)
    :return: the trained model with its ELBO trace
    :raises vbcdhmm.exceptions.ValidationError: if no sequences are given
    """
    config = config or TrainConfig()
    seqs = check_sequences(sequences, hyper.dim)
    if not seqs:
        raise ValidationError("training set is empty")
    if init is None:
        posteriors, emissions = kmeans_init(seqs, hyper, config.seed)
    else:
        posteriors, emissions = init
        posteriors.check(hyper)
        check_emissions(emissions, hyper)

    resp, _ = e_step(posteriors, emissions, seqs)
    trace: List[float] = []
    converged = False
    for iteration in range(1, config.max_iters + 1):
        posteriors, emissions = m_step(hyper, resp, seqs)
        resp, loglik = e_step(posteriors, emissions, seqs)
        value = loglik - kl_total(posteriors, emissions, hyper)
        trace.append(value)
        LOG.debug("iteration %d: ELBO %.10g", iteration, value)
        if len(trace) < 2:
            continue
        delta = trace[-1] - trace[-2]
        if delta < -ELBO_SLACK:
            LOG.warning("ELBO decreased by %.3g at iteration %d", -delta, iteration)
        if iteration >= config.min_iters and abs(delta) < config.rel_tol * abs(value):
            converged = True
            break

    if converged:
        LOG.info("converged after %d iterations, ELBO %.10g", len(trace), trace[-1])
    else:
        LOG.info("stopped after %d iterations without converging", len(trace))
    return TrainedModel(
        hyper=hyper,
        posteriors=posteriors,
        emissions=emissions,
        elbo_trace=tuple(trace),
        converged=converged,
    )
