"""
Configuration schemas

Pydantic models for everything a user can put in a config file:
optimizer settings, FAE / classic AE / FPCA model configs and the
simulation scenario. Model configs carry a `model` discriminator so a
single JSON file says which family it trains.
"""
from enum import Enum
from typing import Annotated, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, field_validator, model_validator

from ..config import get_settings
from .basis import BasisSystem, bspline


# ============== Enums ==============

class Activation(str, Enum):
    IDENTITY = "identity"
    SIGMOID = "sigmoid"
    SOFTPLUS = "softplus"


class OptimizerKind(str, Enum):
    SGD = "sgd"
    ADAM = "adam"


class MapKind(str, Enum):
    LINEAR = "linear"
    ONE_HIDDEN_SIGMOID = "one_hidden_sigmoid"


class ModelKind(str, Enum):
    FAE = "fae"
    AE = "ae"
    FPCA = "fpca"


# ============== Training ==============

class OptimizerConfig(BaseModel):
    kind: OptimizerKind = OptimizerKind.ADAM
    learning_rate: float = Field(default=0.005, gt=0.0)
    momentum: float = Field(default=0.0, ge=0.0, lt=1.0)  # SGD only
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    eps: float = Field(default=1e-8, gt=0.0)


class TrainingConfig(BaseModel):
    """Settings shared by every network trained with nncore."""

    model_config = ConfigDict(populate_by_name=True)

    epochs: int = Field(default=500, ge=1)
    batch_size: Optional[int] = Field(default=64, ge=1)  # None = full batch
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    init_sigma: float = Field(default=0.1, gt=0.0)
    seed: int = 0


def resolve_representation_index(hidden_sizes: List[int], index: Optional[int]) -> int:
    if index is None:
        if len(hidden_sizes) % 2 == 0:
            raise ValueError(
                "hidden_sizes has even length; set representation_index to name the bottleneck layer"
            )
        return len(hidden_sizes) // 2
    if not 0 <= index < len(hidden_sizes):
        raise ValueError(f"representation_index {index} out of range for {len(hidden_sizes)} hidden layers")
    return index


class _StackConfig(TrainingConfig):
    hidden_sizes: List[int] = Field(default_factory=lambda: [5])
    activation: Activation = Activation.SIGMOID
    representation_index: Optional[int] = None

    @field_validator("hidden_sizes")
    @classmethod
    def _check_hidden(cls, value: List[int]) -> List[int]:
        if not value:
            raise ValueError("hidden_sizes must not be empty")
        if any(size < 1 for size in value):
            raise ValueError("hidden layer sizes must be positive")
        return value

    @model_validator(mode="after")
    def _check_bottleneck(self):
        resolve_representation_index(self.hidden_sizes, self.representation_index)
        return self

    @property
    def bottleneck(self) -> int:
        return resolve_representation_index(self.hidden_sizes, self.representation_index)

    @property
    def representation_size(self) -> int:
        return self.hidden_sizes[self.bottleneck]


class FaeConfig(_StackConfig):
    """Functional autoencoder: feature layer -> hidden stack -> coefficient layer."""

    model: Literal["fae"] = "fae"
    input_basis: BasisSystem = Field(default_factory=lambda: bspline(8))
    output_basis: BasisSystem = Field(default_factory=lambda: bspline(8))
    lam: float = Field(default=0.0, ge=0.0, alias="lambda")

    @model_validator(mode="after")
    def _check_penalty(self):
        if self.lam > 0 and self.output_basis.num_basis < 3:
            raise ValueError("lambda > 0 needs at least 3 output basis functions")
        return self


class AeConfig(_StackConfig):
    """Classic dense autoencoder on the discretized curve."""

    model: Literal["ae"] = "ae"


class FpcaConfig(BaseModel):
    model: Literal["fpca"] = "fpca"
    basis: BasisSystem = Field(default_factory=lambda: bspline(10))
    num_components: int = Field(default=5, ge=1)
    ridge: float = Field(default_factory=lambda: get_settings().smoothing_ridge, ge=0.0)
    gram_resolution: int = Field(default_factory=lambda: get_settings().gram_resolution, ge=2)

    @model_validator(mode="after")
    def _check_components(self):
        if self.num_components > self.basis.num_basis:
            raise ValueError(
                f"num_components ({self.num_components}) exceeds basis size ({self.basis.num_basis})"
            )
        return self


ModelConfig = Annotated[Union[FaeConfig, AeConfig, FpcaConfig], Field(discriminator="model")]
_model_config_adapter = TypeAdapter(ModelConfig)


def parse_model_config(payload: dict) -> Union[FaeConfig, AeConfig, FpcaConfig]:
    """Validate a config dict carrying a `model` discriminator."""
    return _model_config_adapter.validate_python(payload)


def dump_model_config(config: Union[FaeConfig, AeConfig, FpcaConfig]) -> dict:
    return config.model_dump(mode="json", by_alias=True)


# ============== Simulation ==============

class ScenarioConfig(BaseModel):
    """Synthetic functional data: Gaussian-mixture latents mapped to basis coefficients.

    Means default to centred points of a scaled lattice (pairwise distance
    >= `separation`); covariances default to `covariance_scale` * I.
    Effective noise SD is `noise_ratio` * (SD of the noiseless values) when
    `noise_ratio` is set, otherwise `noise_sd`.
    """

    name: Optional[str] = None
    n_samples: int = Field(default=1000, ge=1)
    latent_dim: int = Field(default=5, ge=1)
    n_components: int = Field(default=3, ge=1)
    weights: Optional[List[float]] = None
    means: Optional[List[List[float]]] = None
    covariances: Optional[List[List[List[float]]]] = None
    separation: float = Field(default=3.0, gt=0.0)
    covariance_scale: float = Field(default=0.5, ge=0.0)
    map_kind: MapKind = MapKind.LINEAR
    map_width: int = Field(default=20, ge=1)
    map_sigma: float = Field(default=1.0, gt=0.0)
    map_seed: Optional[int] = None
    gen_basis: BasisSystem = Field(default_factory=lambda: bspline(8))
    grid: List[float] = Field(default_factory=lambda: [j / 20 for j in range(21)])
    noise_sd: float = Field(default=0.0, ge=0.0)
    noise_ratio: Optional[float] = Field(default=None, ge=0.0)
    irregular_removals: int = Field(default=0, ge=0)
    seed: int = 0

    @model_validator(mode="after")
    def _check_consistency(self):
        if len(self.grid) < 2 or any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ValueError("grid must hold at least two strictly increasing times")
        if self.irregular_removals > len(self.grid) - 2:
            raise ValueError(
                f"irregular_removals ({self.irregular_removals}) must be <= J - 2 = {len(self.grid) - 2}"
            )
        if self.weights is not None:
            if len(self.weights) != self.n_components or any(w < 0 for w in self.weights):
                raise ValueError("weights must be n_components nonnegative numbers")
            if abs(sum(self.weights) - 1.0) > 1e-9:
                raise ValueError("weights must sum to 1")
        if self.means is not None:
            if len(self.means) != self.n_components or any(len(m) != self.latent_dim for m in self.means):
                raise ValueError("means must be n_components vectors of length latent_dim")
        elif self.n_components > 2 * self.latent_dim:
            raise ValueError("default lattice means support at most 2 * latent_dim components")
        if self.covariances is not None:
            if len(self.covariances) != self.n_components:
                raise ValueError("covariances must hold one matrix per component")
            for cov in self.covariances:
                if len(cov) != self.latent_dim or any(len(row) != self.latent_dim for row in cov):
                    raise ValueError("each covariance must be latent_dim x latent_dim")
        return self

    @property
    def effective_map_seed(self) -> int:
        return self.seed if self.map_seed is None else self.map_seed
