from __future__ import annotations

import logging
from typing import Any, Callable, List, Optional, Tuple, TypeVar

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import linalg

from .exceptions import DegenerateDataError

LOG = logging.getLogger(__name__)

T = TypeVar("T")
U = TypeVar("U")

FloatArray = NDArray[np.float64]

#: relative jitter added to the diagonal when a Cholesky factorization fails
JITTER = 1e-8


def noop(arg: T) -> T:
    return arg


def listing(func: Callable[[T], U]) -> Callable[[List[T]], List[U]]:
    def convert(items: List[T]):
        return [func(item) for item in items]

    return convert


def nullable(func: Callable[[T], U]) -> Callable[[Optional[T]], Optional[U]]:
    def convert(item: Optional[T]):
        return None if item is None else func(item)

    return convert


def to_array(value: ArrayLike) -> FloatArray:
    """Return a float64 copy of ``value``."""
    return np.array(value, dtype=np.float64)


def to_nested(value: Any) -> Any:
    """Convert arrays (and scalars) into plain JSON-ready python values.

    Floats keep their shortest round-trip representation, so serializing the result
    with :mod:`json` and parsing it back reproduces every value bit-exactly.
    """
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    return value


def spd_cholesky(matrix: ArrayLike, what: str = "matrix") -> Tuple[FloatArray, bool]:
    """Factorize a symmetric positive-definite matrix.

    On failure a jitter of ``1e-8 * trace / D`` is added to the diagonal and the
    factorization retried once.

    :param matrix: the D×D matrix
    :param what: name used in the error message
    :return: ``(cho_factor, lower)`` as accepted by :func:`scipy.linalg.cho_solve`
    :raises vbcdhmm.exceptions.DegenerateDataError: if the matrix is not symmetric
        or not positive-definite even after the jitter
    """
    mat = to_array(matrix)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise DegenerateDataError(f"{what} must be square, got shape {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise DegenerateDataError(f"{what} has non-finite entries")
    if not np.allclose(mat, mat.T, rtol=1e-10, atol=1e-12):
        raise DegenerateDataError(f"{what} is not symmetric")
    try:
        return linalg.cho_factor(mat, lower=True)
    except linalg.LinAlgError:
        pass
    dim = mat.shape[0]
    jitter = JITTER * max(float(np.trace(mat)), np.finfo(float).tiny) / dim
    LOG.debug("retrying Cholesky of %s with jitter %g", what, jitter)
    try:
        return linalg.cho_factor(mat + jitter * np.eye(dim), lower=True)
    except linalg.LinAlgError as e:
        raise DegenerateDataError(f"{what} is not positive-definite") from e


def cho_logdet(factor: Tuple[FloatArray, bool]) -> float:
    """Log-determinant from a Cholesky factor."""
    return 2.0 * float(np.sum(np.log(np.diag(factor[0]))))


def derived_rng(seed: int, index: int) -> np.random.Generator:
    """Independent PCG64 stream for item ``index`` of a seeded batch."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, index])))
