from __future__ import annotations

from typing import List, Optional

from typing_extensions import Literal, TypedDict


class Hyper(TypedDict):
    n_states: int
    n_components: int
    max_lag: int
    dim: int
    alpha0: List[float]
    alpha: List[List[float]]
    eta0: List[float]
    eta_dep: List[List[List[float]]]
    w: List[List[float]]
    nw_lambda: float
    nw_mean: List[float]
    nw_dof: float
    # Inverse scale of the Wishart prior
    nw_scale: List[List[float]]


class LatentPosteriors(TypedDict):
    pi_hat: List[float]
    A_hat: List[List[float]]
    pi: List[float]
    A_dep: List[List[List[float]]]


class Component(TypedDict):
    lambda_t: float
    mean_t: List[float]
    dof_t: float
    scale_t: List[List[float]]


class Emissions(TypedDict):
    mix_weights: List[List[float]]
    # N rows of M components
    components: List[List[Component]]


class Model(TypedDict):
    hyper: Hyper
    latent_posteriors: LatentPosteriors
    emissions: Emissions
    elbo_trace: List[float]
    converged: bool


class ModelFile(Model):
    schema_version: int
    kind: Literal["model"]


class Preprocessing(TypedDict):
    kind: Literal["pca"]
    mean: List[float]
    # One principal axis per row
    components: List[List[float]]
    explained_variance: List[float]


class BankEntry(TypedDict):
    label: str
    model: Model


class BankFile(TypedDict):
    schema_version: int
    kind: Literal["bank"]
    preprocessing: Optional[Preprocessing]
    models: List[BankEntry]
