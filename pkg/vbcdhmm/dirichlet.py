"""Hyperparameters, Dirichlet posteriors of the latent processes and their starred
surrogates.

Every Dirichlet family is stored as one array whose last axis is the simplex, so a
single :class:`DirichletPosterior` of shape ``(K, N, N)`` holds all ``K·N`` rows of the
lag-dependent transition matrices.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from numpy.typing import ArrayLike
from scipy import special

from .exceptions import DegenerateDataError, DimensionMismatchError, ValidationError
from .utils import FloatArray, spd_cholesky, to_array

#: prior concentration used for every Dirichlet family
DEFAULT_CONCENTRATION = 1e-3
#: prior ``λ`` of the Normal-Wishart emission prior
DEFAULT_NW_LAMBDA = 0.25
#: lower bound applied to updated concentrations
CONCENTRATION_FLOOR = 1e-8
#: starred entries never drop below the smallest normal double
STARRED_FLOOR = float(np.finfo(np.float64).tiny)


@dataclass(frozen=True, eq=False)
class DirichletPosterior:
    """A batch of Dirichlet distributions; the last axis indexes the simplex.

    :param concentration: strictly positive concentrations
    """

    concentration: FloatArray

    def __post_init__(self):
        conc = to_array(self.concentration)
        if conc.ndim == 0 or conc.shape[-1] == 0:
            raise ValidationError("Dirichlet concentration must be a non-empty vector")
        if not np.all(np.isfinite(conc)) or np.any(conc <= 0):
            raise ValidationError("Dirichlet concentrations must be finite and > 0")
        object.__setattr__(self, "concentration", conc)

    @property
    def shape(self):
        return self.concentration.shape


DirichletLike = Union[DirichletPosterior, ArrayLike]


def _concentration(post: DirichletLike) -> FloatArray:
    if isinstance(post, DirichletPosterior):
        return post.concentration
    return DirichletPosterior(to_array(post)).concentration


@dataclass(frozen=True, eq=False)
class ModelHyper:
    """All fixed hyperparameters of a VB-CD-HMM.

    Index conventions: ``alpha[k, k']`` is the prior of row ``k`` of Â,
    ``eta_dep[k - 1, i, j]`` the prior of ``A^k[i, j]`` and ``w[i, m]`` the prior of
    mixture weight ``m`` of state ``i``. The Normal-Wishart prior is shared by every
    (state, component) pair; ``nw_scale`` is the inverse scale, so that the prior
    expected precision is ``nw_dof * inv(nw_scale)``.
    """

    n_states: int
    n_components: int
    max_lag: int
    dim: int
    alpha0: FloatArray
    alpha: FloatArray
    eta0: FloatArray
    eta_dep: FloatArray
    w: FloatArray
    nw_lambda: float
    nw_mean: FloatArray
    nw_dof: float
    nw_scale: FloatArray

    def __post_init__(self):
        n, m, k, d = self.n_states, self.n_components, self.max_lag, self.dim
        for name, value in (
            ("n_states", n),
            ("n_components", m),
            ("max_lag", k),
            ("dim", d),
        ):
            if int(value) != value or value < 1:
                raise ValidationError(f"{name} must be a positive integer, got {value}")
        shapes = {
            "alpha0": (k,),
            "alpha": (k, k),
            "eta0": (n,),
            "eta_dep": (k, n, n),
            "w": (n, m),
            "nw_mean": (d,),
            "nw_scale": (d, d),
        }
        for name, shape in shapes.items():
            value = to_array(getattr(self, name))
            if value.shape != shape:
                raise DimensionMismatchError(
                    f"{name} must have shape {shape}, got {value.shape}"
                )
            object.__setattr__(self, name, value)
        for name in ("alpha0", "alpha", "eta0", "eta_dep", "w"):
            value = getattr(self, name)
            if not np.all(np.isfinite(value)) or np.any(value <= 0):
                raise ValidationError(f"all entries of {name} must be > 0")
        if not self.nw_lambda > 0:
            raise ValidationError("nw_lambda must be > 0")
        if not self.nw_dof > d - 1:
            raise ValidationError(f"nw_dof must exceed D - 1 = {d - 1}")
        if not np.all(np.isfinite(self.nw_mean)):
            raise ValidationError("nw_mean must be finite")
        spd_cholesky(self.nw_scale, "nw_scale")
        object.__setattr__(self, "nw_lambda", float(self.nw_lambda))
        object.__setattr__(self, "nw_dof", float(self.nw_dof))


@dataclass(frozen=True, eq=False)
class LatentPosteriors:
    """Variational posteriors of the two latent chains.

    :param pi_hat: initial lag distribution, shape ``(K,)``
    :param A_hat: lag transition rows, shape ``(K, K)`` (row = previous lag)
    :param pi: initial emitting-state distribution, shape ``(N,)``
    :param A_dep: lag-conditional state transition rows, shape ``(K, N, N)``
    """

    pi_hat: DirichletPosterior
    A_hat: DirichletPosterior
    pi: DirichletPosterior
    A_dep: DirichletPosterior

    def __post_init__(self):
        k = self.pi_hat.shape[-1]
        n = self.pi.shape[-1]
        expected = {
            "pi_hat": (k,),
            "A_hat": (k, k),
            "pi": (n,),
            "A_dep": (k, n, n),
        }
        for name, shape in expected.items():
            got = getattr(self, name).shape
            if got != shape:
                raise DimensionMismatchError(
                    f"{name} must have shape {shape}, got {got}"
                )

    @property
    def max_lag(self) -> int:
        return self.pi_hat.shape[0]

    @property
    def n_states(self) -> int:
        return self.pi.shape[0]

    def check(self, hyper: ModelHyper) -> None:
        """Raise if the shapes disagree with ``hyper``."""
        if (self.max_lag, self.n_states) != (hyper.max_lag, hyper.n_states):
            raise DimensionMismatchError(
                f"posteriors have K={self.max_lag}, N={self.n_states}; "
                f"hyperparameters have K={hyper.max_lag}, N={hyper.n_states}"
            )

    @classmethod
    def from_prior(cls, hyper: ModelHyper) -> LatentPosteriors:
        return cls(
            pi_hat=DirichletPosterior(hyper.alpha0),
            A_hat=DirichletPosterior(hyper.alpha),
            pi=DirichletPosterior(hyper.eta0),
            A_dep=DirichletPosterior(hyper.eta_dep),
        )

    def mean_A_hat(self) -> FloatArray:
        return dirichlet_mean(self.A_hat)

    def mean_A_dep(self) -> FloatArray:
        return dirichlet_mean(self.A_dep)


@dataclass(frozen=True, eq=False)
class StarredParams:
    """Geometric-mean surrogates ``exp(E_q[log θ])`` (rows sum to at most one)."""

    pi_hat_star: FloatArray
    A_hat_star: FloatArray
    pi_star: FloatArray
    A_dep_star: FloatArray
    c_star: FloatArray

    @property
    def max_lag(self) -> int:
        return self.pi_hat_star.shape[0]

    @property
    def n_states(self) -> int:
        return self.pi_star.shape[0]


def default_hyper(
    n_states: int,
    n_components: int,
    max_lag: int,
    dim: int,
    data_mean: ArrayLike,
    data_cov: ArrayLike,
) -> ModelHyper:
    """Weakly informative hyperparameters scaled to the data.

    Dirichlet concentrations are all ``1e-3``, ``λ = 0.25``, ``η = D + 2``, the prior
    mean is the data mean and ``S = (D + 2) · data_cov`` so that the prior expected
    precision equals the empirical precision.

    :raises vbcdhmm.exceptions.DegenerateDataError: if ``data_cov`` is not symmetric
        positive-definite
    """
    mean = to_array(data_mean).reshape(-1)
    cov = to_array(data_cov)
    if cov.ndim == 0:
        cov = cov.reshape(1, 1)
    if mean.shape != (dim,) or cov.shape != (dim, dim):
        raise DimensionMismatchError(
            f"data mean/covariance shapes {mean.shape}/{cov.shape} do not match D={dim}"
        )
    try:
        spd_cholesky(cov, "data covariance")
    except DegenerateDataError as e:
        raise DegenerateDataError(f"degenerate data: {e.message}") from e
    c = DEFAULT_CONCENTRATION
    return ModelHyper(
        n_states=n_states,
        n_components=n_components,
        max_lag=max_lag,
        dim=dim,
        alpha0=np.full(max_lag, c),
        alpha=np.full((max_lag, max_lag), c),
        eta0=np.full(n_states, c),
        eta_dep=np.full((max_lag, n_states, n_states), c),
        w=np.full((n_states, n_components), c),
        nw_lambda=DEFAULT_NW_LAMBDA,
        nw_mean=mean,
        nw_dof=dim + 2.0,
        nw_scale=(dim + 2.0) * cov,
    )


def expected_log_probs(post: DirichletLike) -> FloatArray:
    """``E[log p_i] = ψ(ω_i) − ψ(Σ_j ω_j)`` along the last axis."""
    conc = _concentration(post)
    return special.digamma(conc) - special.digamma(conc.sum(axis=-1, keepdims=True))


def dirichlet_mean(post: DirichletLike) -> FloatArray:
    conc = _concentration(post)
    return conc / conc.sum(axis=-1, keepdims=True)


def starred_rows(post: DirichletLike) -> FloatArray:
    return np.maximum(np.exp(expected_log_probs(post)), STARRED_FLOOR)


def starred(posteriors: LatentPosteriors, mix_weights: DirichletLike) -> StarredParams:
    """Starred surrogates of every latent-process parameter and the mixture weights."""
    c_star = starred_rows(mix_weights)
    if c_star.shape[0] != posteriors.n_states:
        raise DimensionMismatchError(
            f"mixture weights cover {c_star.shape[0]} states, "
            f"posteriors {posteriors.n_states}"
        )
    return StarredParams(
        pi_hat_star=starred_rows(posteriors.pi_hat),
        A_hat_star=starred_rows(posteriors.A_hat),
        pi_star=starred_rows(posteriors.pi),
        A_dep_star=starred_rows(posteriors.A_dep),
        c_star=c_star,
    )


def dirichlet_kl(post: DirichletLike, prior: ArrayLike) -> float:
    """``KL(Dir(post) ‖ Dir(prior))`` summed over all rows of the batch.

    :raises vbcdhmm.exceptions.DimensionMismatchError: if the shapes differ
    """
    q = _concentration(post)
    p = _concentration(prior)
    if q.shape != p.shape:
        raise DimensionMismatchError(
            f"posterior shape {q.shape} does not match prior shape {p.shape}"
        )
    q_sum = q.sum(axis=-1)
    kl = (
        special.gammaln(q_sum)
        - special.gammaln(q).sum(axis=-1)
        - special.gammaln(p.sum(axis=-1))
        + special.gammaln(p).sum(axis=-1)
        + ((q - p) * (special.digamma(q) - special.digamma(q_sum)[..., None])).sum(
            axis=-1
        )
    )
    return float(np.sum(kl))


def update_dirichlet(prior: ArrayLike, counts: ArrayLike) -> DirichletPosterior:
    """Conjugate update ``ω = prior + counts`` with the concentration floor."""
    p = to_array(prior)
    n = to_array(counts)
    if p.shape != n.shape:
        raise DimensionMismatchError(
            f"counts shape {n.shape} does not match prior shape {p.shape}"
        )
    return DirichletPosterior(np.maximum(p + n, CONCENTRATION_FLOOR))
