"""
Classic Autoencoder Baseline

Dense autoencoder on the discretized curve. Samples are aligned to a
fixed grid; unobserved positions are fed as 0 and dropped from the
loss. Output exists only on that grid.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Union

import numpy as np

from .data import FunctionalDataset, FunctionalSample
from .errors import ArgumentError, UnsupportedOperationError
from .nncore import DenseLayer, GradientTape, Network, masked_squared_error, run_epochs
from .quadrature import check_increasing
from .schemas import AeConfig, Activation, dump_model_config, parse_model_config

logger = logging.getLogger(__name__)


@dataclass
class MaskedVector:
    """Values on the model grid; mask is True where observed."""

    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.values.shape != self.mask.shape:
            raise ArgumentError("values and mask must have the same shape")
        if np.any(self.values[~self.mask] != 0.0):
            raise ArgumentError("unobserved positions must hold exactly 0")


@dataclass
class MaskedBatch:
    """Stacked MaskedVectors -> values/mask of shape (N, J)."""

    values: np.ndarray
    mask: np.ndarray

    def __len__(self) -> int:
        return self.values.shape[0]

    @classmethod
    def stack(cls, vectors: List[MaskedVector]) -> "MaskedBatch":
        if not vectors:
            raise ArgumentError("no masked vectors to stack")
        widths = {v.values.size for v in vectors}
        if len(widths) != 1:
            raise ArgumentError(f"masked vectors have different grid lengths {sorted(widths)}")
        return cls(np.stack([v.values for v in vectors]), np.stack([v.mask for v in vectors]))


def _grid_positions(times: np.ndarray, grid: np.ndarray) -> np.ndarray:
    positions = np.searchsorted(grid, times)
    inside = positions < grid.size
    if not np.all(inside) or not np.array_equal(grid[positions], times):
        raise ArgumentError("sample has time points that are not on the model grid")
    return positions


def align(sample: FunctionalSample, grid: np.ndarray) -> MaskedVector:
    """Zero-fill a sample onto `grid`, masking positions it did not observe."""
    positions = _grid_positions(sample.times, grid)
    values = np.zeros(grid.size)
    mask = np.zeros(grid.size, dtype=bool)
    values[positions] = sample.values
    mask[positions] = True
    return MaskedVector(values, mask)


def align_dataset(dataset: FunctionalDataset, grid: Optional[np.ndarray] = None) -> MaskedBatch:
    """Align every sample to `grid` (default: the union of observed times)."""
    grid = dataset.union_grid() if grid is None else check_increasing(grid, name="grid")
    positions = _grid_positions(dataset.times, grid)
    values = np.zeros((len(dataset), grid.size))
    mask = np.zeros((len(dataset), grid.size), dtype=bool)
    values[dataset.segment_ids, positions] = dataset.values
    mask[dataset.segment_ids, positions] = True
    return MaskedBatch(values, mask)


# ==================== Model ====================

class AeModel:
    """J -> hidden stack (bias, activation g) -> J (bias, Identity)."""

    def __init__(self, config: AeConfig, grid: np.ndarray, network: Network):
        self.config = config
        self.grid = check_increasing(grid, name="grid")
        self.network = network
        if network.layers[0].in_dim != self.grid.size or network.layers[-1].out_dim != self.grid.size:
            raise ArgumentError("network width does not match the grid length")

    @classmethod
    def initialize(cls, config: AeConfig, grid: np.ndarray, rng: np.random.Generator) -> "AeModel":
        widths = [len(grid)] + list(config.hidden_sizes)
        layers = [
            DenseLayer.initialize(
                rng, widths[i], widths[i + 1], config.init_sigma,
                bias=True, activation=config.activation, name=f"hidden_{i + 1}",
            )
            for i in range(len(config.hidden_sizes))
        ]
        layers.append(DenseLayer.initialize(
            rng, widths[-1], len(grid), config.init_sigma,
            bias=True, activation=Activation.IDENTITY, name="output",
        ))
        return cls(config, np.asarray(grid, dtype=np.float64), Network(layers))

    @property
    def representation_layer(self) -> int:
        return self.config.bottleneck

    def parameters(self) -> List[np.ndarray]:
        return self.network.parameters()

    def parameter_count(self) -> int:
        return self.network.parameter_count()

    def to_dict(self) -> Dict:
        return {
            "config": dump_model_config(self.config),
            "grid": self.grid.tolist(),
            "layers": self.network.to_dict(),
        }

    @classmethod
    def from_dict(cls, payload: Dict) -> "AeModel":
        config = parse_model_config(payload["config"])
        if not isinstance(config, AeConfig):
            raise ArgumentError(f"expected an ae config, got {config.model!r}")
        return cls(config, np.asarray(payload["grid"], dtype=np.float64), Network.from_dict(payload["layers"]))


Inputs = Union[MaskedVector, MaskedBatch]


def _as_batch(model: AeModel, data: Inputs) -> MaskedBatch:
    batch = MaskedBatch(data.values[None, :], data.mask[None, :]) if isinstance(data, MaskedVector) else data
    if batch.values.shape[1] != model.grid.size:
        raise ArgumentError(f"input has grid length {batch.values.shape[1]}, model expects {model.grid.size}")
    return batch


def masked_loss(model: AeModel, batch: MaskedBatch, tape: Optional[GradientTape] = None) -> float:
    """Σ over observed positions of squared error, divided by the batch size."""
    inputs = np.where(batch.mask, batch.values, 0.0)
    output = model.network.forward(inputs, tape)[-1]
    value, grad = masked_squared_error(output, batch.values, batch.mask, len(batch))
    if tape is not None:
        tape.record_loss(value, grad)
    return value


@dataclass
class AeTrainResult:
    model: AeModel
    history: List[float]


def ae_train(
    data: Union[MaskedBatch, FunctionalDataset],
    config: AeConfig,
    grid: Optional[np.ndarray] = None,
    on_epoch_end: Optional[Callable[[int, float, AeModel], None]] = None,
) -> AeTrainResult:
    """Fit the masked-MSE autoencoder with the same optimizers as the FAE."""
    if isinstance(data, FunctionalDataset):
        grid = data.union_grid() if grid is None else grid
        data = align_dataset(data, grid)
    elif grid is None:
        raise ArgumentError("a grid is required when training from a MaskedBatch")
    if len(data) == 0:
        raise ArgumentError("cannot train on an empty dataset")

    rng = np.random.default_rng(config.seed)
    model = AeModel.initialize(config, grid, rng)
    batch_all = _as_batch(model, data)
    params = model.parameters()
    logger.info(
        f"Training AE on {len(batch_all)} samples: J={model.grid.size}, hidden={config.hidden_sizes}, "
        f"activation={config.activation.value}, observed fraction={batch_all.mask.mean():.3f}"
    )

    def loss_and_grads(indices: np.ndarray):
        tape = GradientTape(params)
        value = masked_loss(model, MaskedBatch(batch_all.values[indices], batch_all.mask[indices]), tape)
        return value, tape.backward()

    callback = None
    if on_epoch_end is not None:
        def callback(epoch: int, loss: float) -> None:
            on_epoch_end(epoch, loss, model)

    history = run_epochs(params, loss_and_grads, len(batch_all), config, rng, on_epoch_end=callback, label="ae")
    logger.info(f"AE training finished: final loss {history[-1]:.6g}")
    return AeTrainResult(model=model, history=history)


def ae_encode(model: AeModel, data: Inputs) -> np.ndarray:
    batch = _as_batch(model, data)
    reps = model.network.forward(np.where(batch.mask, batch.values, 0.0), upto=model.representation_layer)[-1]
    return reps[0] if isinstance(data, MaskedVector) else reps


def ae_reconstruct(model: AeModel, data: Inputs) -> np.ndarray:
    """Reconstruction on the model grid only."""
    batch = _as_batch(model, data)
    out = model.network.forward(np.where(batch.mask, batch.values, 0.0))[-1]
    return out[0] if isinstance(data, MaskedVector) else out


def reconstruct_dataset(model: AeModel, dataset: FunctionalDataset) -> np.ndarray:
    """Reconstruction of every sample at its own observed times, as one long array."""
    out = ae_reconstruct(model, align_dataset(dataset, model.grid))
    return out[dataset.segment_ids, _grid_positions(dataset.times, model.grid)]


def ae_smooth(model: AeModel, dataset: FunctionalDataset, eval_times) -> np.ndarray:
    """Curves on `eval_times`, which must be points of the model grid."""
    eval_times = np.atleast_1d(np.asarray(eval_times, dtype=np.float64))
    positions = np.searchsorted(model.grid, eval_times)
    on_grid = positions < model.grid.size
    on_grid[on_grid] = model.grid[positions[on_grid]] == eval_times[on_grid]
    if not np.all(on_grid):
        bad = eval_times[~on_grid][0]
        raise UnsupportedOperationError(
            f"classic AE only outputs values on its training grid; t={bad!r} is off-grid"
        )
    return ae_reconstruct(model, align_dataset(dataset, model.grid))[:, positions]
