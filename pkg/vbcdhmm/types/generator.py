from __future__ import annotations

from typing import List

from typing_extensions import TypedDict


class GeneratorSpec(TypedDict):
    # Initial lag distribution, K entries (all mass must sit on lag 1 at t = 1)
    pi_hat: List[float]
    # Lag transition matrix, K x K
    A_hat: List[List[float]]
    # Initial state distribution, N entries
    pi: List[float]
    # Lag-conditional state transitions, K x N x N
    A_dep: List[List[List[float]]]
    # Mixture weights, N x M
    weights: List[List[float]]
    # Component means, N x M x D
    means: List[List[List[float]]]
    # Component covariances, N x M x D x D
    covariances: List[List[List[List[float]]]]
