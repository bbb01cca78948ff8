"""Forward-backward over lag-augmented windows of emitting states.

At time ``t`` a message is a dense table indexed by the window
``(x_{t-K+1}, ..., x_t)`` and the lag indicator ``z_t``; with numpy's C order this is
the mixed-radix index with ``z_t`` as the fastest axis. Window slots that lie before
the start of the sequence are pinned to state index 0 and every lag that would
reference them is infeasible, so those entries stay exactly zero.

Messages are kept in scaled probability space: each forward step is normalized and
its normalizer accumulates the log evidence. Emissions enter in log form and are
shifted by their per-frame maximum before exponentiation; the shift is added back to
the frame's log scale.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from numpy.typing import ArrayLike

from .dirichlet import StarredParams
from .exceptions import DimensionMismatchError, NumericalError, ValidationError
from .utils import FloatArray, to_array


class OpCounter:
    """Accumulates the number of multiply-adds performed by :func:`forward`."""

    def __init__(self):
        self.count = 0


@dataclass(frozen=True, eq=False)
class MessageLattice:
    """Scaled forward or backward messages of one sequence.

    :param tables: ``(T,) + (N,) * K + (K,)`` message tables
    :param scales: per-step normalizers of the shifted emissions
    :param log_scales: per-step log normalizers including the emission shift
    """

    tables: FloatArray
    scales: FloatArray
    log_scales: FloatArray

    @property
    def n_frames(self) -> int:
        return self.tables.shape[0]

    @property
    def max_lag(self) -> int:
        return self.tables.shape[-1]

    @property
    def n_states(self) -> int:
        return self.tables.shape[1]

    @property
    def log_normalizer(self) -> float:
        return float(np.sum(self.log_scales))


@dataclass(frozen=True, eq=False)
class Responsibilities:
    """Posterior marginals of one sequence.

    ``gamma_zz[t - 1, k, k']`` is ``q(z_{t-1} = k, z_t = k')`` for the 0-based frame
    ``t ≥ 1``; ``gamma_xx[t, k - 1, i, j]`` is ``q(x_{t-k} = i, x_t = j, z_t = k)``
    and is zero at ``t = 0`` and for infeasible lags.
    """

    gamma_z: FloatArray
    gamma_x: FloatArray
    gamma_zz: FloatArray
    gamma_xx: FloatArray
    gamma_comp: Optional[FloatArray] = None


def _check_inputs(starred: StarredParams, log_emit: ArrayLike) -> FloatArray:
    values = to_array(log_emit)
    if values.ndim != 2 or values.shape[0] < 1:
        raise ValidationError("emission table must have shape (T, N) with T >= 1")
    if values.shape[1] != starred.n_states:
        raise DimensionMismatchError(
            f"emission table covers {values.shape[1]} states, model has "
            f"{starred.n_states}"
        )
    if not np.all(np.isfinite(values)):
        raise ValidationError("log emissions must be finite")
    return values


def shifted_emissions(log_emit: FloatArray) -> Tuple[FloatArray, FloatArray]:
    """Return ``(exp(log_emit − shift), shift)`` with the per-frame max as shift."""
    shift = log_emit.max(axis=1)
    return np.exp(log_emit - shift[:, None]), shift


def lag_transition(A: FloatArray, max_lag: int, lag: int) -> FloatArray:
    """Broadcast ``A^lag[x_{t-lag}, x_t]`` over the ``K + 1`` slots ``x_{t-K..t}``."""
    n = A.shape[0]
    shape = [1] * (max_lag + 1)
    shape[max_lag - lag] = n
    shape[max_lag] = n
    return A.reshape(shape)


def n_feasible_lags(t: int, max_lag: int) -> int:
    """Number of lags allowed at 0-based frame ``t`` (lag 1 only at ``t = 0``)."""
    return max(1, min(max_lag, t))


def forward(
    starred: StarredParams, log_emit: ArrayLike, counter: OpCounter | None = None
) -> MessageLattice:
    """Scaled forward pass.

    :param starred: starred parameters
    :param log_emit: ``(T, N)`` log starred emissions (0 for missing frames)
    :param counter: optional multiply-add counter
    :return: the forward lattice; its ``log_normalizer`` is the sequence log-likelihood
    :raises vbcdhmm.exceptions.NumericalError: if a step loses all mass
    """
    log_emit = _check_inputs(starred, log_emit)
    n_frames, n = log_emit.shape
    k = starred.max_lag
    emit, shift = shifted_emissions(log_emit)
    shape = (n,) * k + (k,)
    tables = np.zeros((n_frames,) + shape)
    scales = np.empty(n_frames)

    first = np.zeros(shape)
    first[(0,) * (k - 1) + (slice(None), 0)] = (
        starred.pi_hat_star[0] * starred.pi_star * emit[0]
    )
    scales[0] = _scale(first, 0)
    tables[0] = first / scales[0]

    transitions = [
        lag_transition(starred.A_dep_star[lag - 1], k, lag) for lag in range(1, k + 1)
    ]
    for t in range(1, n_frames):
        carried = tables[t - 1] @ starred.A_hat_star
        step = np.zeros(shape)
        feasible = n_feasible_lags(t, k)
        for kk in range(feasible):
            joint = carried[..., kk][..., None] * (transitions[kk] * emit[t])
            step[..., kk] = joint.sum(axis=0)
        if counter is not None:
            counter.count += n**k * k * k + feasible * n ** (k + 1)
        scales[t] = _scale(step, t)
        tables[t] = step / scales[t]

    return MessageLattice(
        tables=tables, scales=scales, log_scales=np.log(scales) + shift
    )


def _scale(step: FloatArray, t: int) -> float:
    total = float(step.sum())
    if not (total > 0 and np.isfinite(total)):
        raise NumericalError(f"forward step at frame {t + 1} lost all mass")
    return total


def backward(
    starred: StarredParams, log_emit: ArrayLike, fwd: MessageLattice | None = None
) -> MessageLattice:
    """Scaled backward pass using the forward normalizers.

    :param starred: starred parameters
    :param log_emit: ``(T, N)`` log starred emissions
    :param fwd: the forward lattice of the same inputs (computed if omitted)
    :return: the backward lattice, ``β̂_T ≡ 1``
    """
    log_emit = _check_inputs(starred, log_emit)
    if fwd is None:
        fwd = forward(starred, log_emit)
    n_frames, n = log_emit.shape
    k = starred.max_lag
    if fwd.n_frames != n_frames:
        raise DimensionMismatchError("forward lattice does not match the emissions")
    emit, _ = shifted_emissions(log_emit)
    shape = (n,) * k + (k,)
    tables = np.empty((n_frames,) + shape)
    tables[-1] = 1.0

    transitions = [
        lag_transition(starred.A_dep_star[lag - 1], k, lag) for lag in range(1, k + 1)
    ]
    for t in range(n_frames - 2, -1, -1):
        nxt = tables[t + 1]
        ahead = np.zeros(shape)
        for kk in range(n_feasible_lags(t + 1, k)):
            joint = (transitions[kk] * emit[t + 1]) * nxt[..., kk][None]
            ahead[..., kk] = joint.sum(axis=-1)
        tables[t] = (ahead @ starred.A_hat_star.T) / fwd.scales[t + 1]

    return MessageLattice(tables=tables, scales=fwd.scales, log_scales=fwd.log_scales)


def responsibilities(
    fwd: MessageLattice,
    bwd: MessageLattice,
    starred: StarredParams,
    log_emit: ArrayLike,
) -> Responsibilities:
    """All four latent responsibility families from matching lattices.

    The returned ``gamma_comp`` is ``None``; it depends on the emission model and is
    filled in by :func:`vbcdhmm.emissions.component_responsibilities`.
    """
    log_emit = _check_inputs(starred, log_emit)
    if (
        fwd.tables.shape != bwd.tables.shape
        or fwd.n_frames != log_emit.shape[0]
        or fwd.max_lag != starred.max_lag
    ):
        raise DimensionMismatchError("lattices do not belong to the same inputs")
    n_frames, n = log_emit.shape
    k = starred.max_lag

    post = fwd.tables * bwd.tables
    post /= post.reshape(n_frames, -1).sum(axis=1).reshape((n_frames,) + (1,) * (k + 1))
    gamma_z = post.reshape(n_frames, -1, k).sum(axis=1)
    gamma_x = post.sum(axis=tuple(range(1, k)) + (k + 1,))

    gamma_zz = np.zeros((max(n_frames - 1, 0), k, k))
    gamma_xx = np.zeros((n_frames, k, n, n))
    if n_frames > 1:
        emit, _ = shifted_emissions(log_emit)
        prev = fwd.tables[:-1]
        nxt = bwd.tables[1:]
        carried = prev @ starred.A_hat_star
        prev_flat = prev.reshape(n_frames - 1, -1, k)
        emit_next = emit[1:].reshape((n_frames - 1,) + (1,) * k + (n,))
        inv_scale = (1.0 / fwd.scales[1:]).reshape((n_frames - 1,) + (1,) * (k + 1))
        xi = np.zeros((n_frames - 1, k, k))
        for kk in range(k):
            lag = kk + 1
            ahead = (
                lag_transition(starred.A_dep_star[kk], k, lag)[None]
                * emit_next
                * nxt[..., kk][:, None]
                * inv_scale
            )
            # the step into 0-based frame s + 1 allows lag kk + 1 only if kk <= s
            ahead[:kk] = 0.0
            joint = carried[..., kk][..., None] * ahead
            keep = (1 + k - lag, 1 + k)
            others = tuple(a for a in range(1, k + 2) if a not in keep)
            gamma_xx[1:, kk] = joint.sum(axis=others)
            # below lag K the oldest window slot is still a singleton axis
            summed = np.broadcast_to(ahead.sum(axis=-1), prev.shape[:-1])
            summed = summed.reshape(n_frames - 1, -1)
            xi[:, :, kk] = (
                np.einsum("sx,sxk->sk", summed, prev_flat) * starred.A_hat_star[:, kk]
            )
        total = xi.sum(axis=(1, 2))
        gamma_zz = xi / total[:, None, None]
        gamma_xx[1:] /= total[:, None, None, None]

    return Responsibilities(
        gamma_z=gamma_z, gamma_x=gamma_x, gamma_zz=gamma_zz, gamma_xx=gamma_xx
    )


def loglik(fwd: MessageLattice) -> float:
    """Log of the summed final forward messages (the sequence evidence)."""
    return fwd.log_normalizer


def forward_backward(
    starred: StarredParams, log_emit: ArrayLike
) -> Tuple[Responsibilities, float]:
    """Run both passes and return the responsibilities and the log-likelihood."""
    fwd = forward(starred, log_emit)
    bwd = backward(starred, log_emit, fwd)
    return responsibilities(fwd, bwd, starred, log_emit), loglik(fwd)
