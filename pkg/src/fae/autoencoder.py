"""
Functional Autoencoder

Encoder: deterministic feature layer (quadrature inner products of the
curve with the input basis) followed by the input projection c^(I) and
the dense hidden stack. Decoder: the linear coefficient layer c^(O)
whose outputs b are basis coefficients, and the deterministic
reconstruction X̂(t) = Σ_m b_m φ_m^(O)(t), evaluable at any t.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .basis import basis_values, expand
from .data import FunctionalDataset, FunctionalSample, segment_sum
from .errors import ArgumentError, ConfigError, EvaluationError
from .nncore import DenseLayer, GradientTape, Network, run_epochs
from .schemas import Activation, FaeConfig, dump_model_config, parse_model_config

logger = logging.getLogger(__name__)


# ==================== Feature layer ====================

def feature_layer(sample: FunctionalSample, input_basis) -> np.ndarray:
    """f_m = Σ_j ω_j X(t_j) φ_m(t_j); same length M^(I) whatever the grid."""
    phi = basis_values(input_basis, sample.times)
    return (sample.quad.weights * sample.values) @ phi


def feature_matrix(dataset: FunctionalDataset, input_basis) -> np.ndarray:
    """feature_layer for every sample at once -> (N, M^(I))."""
    phi = basis_values(input_basis, dataset.times)
    weighted = phi * (dataset.weights * dataset.values)[:, None]
    return segment_sum(weighted, dataset.offsets)


def second_differences(coefficients: np.ndarray) -> np.ndarray:
    """b_m - 2 b_{m-1} + b_{m-2} along the last axis."""
    b = np.asarray(coefficients, dtype=np.float64)
    return b[..., 2:] - 2.0 * b[..., 1:-1] + b[..., :-2]


def _second_difference_adjoint(diffs: np.ndarray, width: int) -> np.ndarray:
    out = np.zeros(diffs.shape[:-1] + (width,))
    out[..., :-2] += diffs
    out[..., 1:-1] -= 2.0 * diffs
    out[..., 2:] += diffs
    return out


# ==================== Model ====================

@dataclass
class ForwardResult:
    representation: np.ndarray
    coefficients: np.ndarray
    reconstruction: np.ndarray


class FaeModel:
    """Trainable parameters {c^(I), hidden layers, c^(O)} plus the frozen bases.

    Layer 0 of the network is the input projection (K^(1) x M^(I), no bias),
    the last layer is the coefficient layer (M^(O) x K^(L), no bias,
    Identity); hidden layers in between carry biases.
    """

    def __init__(self, config: FaeConfig, network: Network):
        self.config = config
        self.network = network
        self._check_shapes()

    @classmethod
    def initialize(cls, config: FaeConfig, rng: np.random.Generator) -> "FaeModel":
        sizes = config.hidden_sizes
        sigma = config.init_sigma
        layers = [DenseLayer.initialize(
            rng, config.input_basis.num_basis, sizes[0], sigma,
            bias=False, activation=config.activation, name="input_projection",
        )]
        for i in range(1, len(sizes)):
            layers.append(DenseLayer.initialize(
                rng, sizes[i - 1], sizes[i], sigma,
                bias=True, activation=config.activation, name=f"hidden_{i + 1}",
            ))
        layers.append(DenseLayer.initialize(
            rng, sizes[-1], config.output_basis.num_basis, sigma,
            bias=False, activation=Activation.IDENTITY, name="coefficients",
        ))
        return cls(config, Network(layers))

    def _check_shapes(self) -> None:
        layers = self.network.layers
        if len(layers) != len(self.config.hidden_sizes) + 1:
            raise ArgumentError("network depth does not match hidden_sizes")
        if layers[0].in_dim != self.config.input_basis.num_basis:
            raise ArgumentError("input projection width does not match the input basis")
        if layers[-1].out_dim != self.config.output_basis.num_basis:
            raise ArgumentError("coefficient layer width does not match the output basis")
        if layers[-1].activation != Activation.IDENTITY or layers[-1].bias is not None:
            raise ArgumentError("coefficient layer must be linear without bias")

    @property
    def input_coeffs(self) -> np.ndarray:
        """c^(I), shape (K^(1), M^(I))."""
        return self.network.layers[0].weight

    @property
    def output_coeffs(self) -> np.ndarray:
        """c^(O), shape (M^(O), K^(L))."""
        return self.network.layers[-1].weight

    @property
    def hidden(self) -> List[DenseLayer]:
        return self.network.layers[1:-1]

    @property
    def representation_layer(self) -> int:
        return self.config.bottleneck

    def parameters(self) -> List[np.ndarray]:
        return self.network.parameters()

    def parameter_count(self) -> int:
        return self.network.parameter_count()

    def to_dict(self) -> Dict:
        return {"config": dump_model_config(self.config), "layers": self.network.to_dict()}

    @classmethod
    def from_dict(cls, payload: Dict) -> "FaeModel":
        config = parse_model_config(payload["config"])
        if not isinstance(config, FaeConfig):
            raise ArgumentError(f"expected an fae config, got {config.model!r}")
        return cls(config, Network.from_dict(payload["layers"]))


def _checked_forward(model: FaeModel, features: np.ndarray, tape: Optional[GradientTape] = None) -> List[np.ndarray]:
    if not np.all(np.isfinite(features)):
        raise EvaluationError("non-finite value", "feature_layer")
    outputs = model.network.forward(features, tape)
    for layer, out in zip(model.network.layers, outputs):
        if not np.all(np.isfinite(out)):
            raise EvaluationError("non-finite value", layer.name)
    return outputs


def forward(model: FaeModel, sample: FunctionalSample) -> ForwardResult:
    features = feature_layer(sample, model.config.input_basis)
    outputs = _checked_forward(model, features[None, :])
    b = outputs[-1][0]
    reconstruction = b @ basis_values(model.config.output_basis, sample.times).T
    if not np.all(np.isfinite(reconstruction)):
        raise EvaluationError("non-finite value", "reconstruction")
    return ForwardResult(
        representation=outputs[model.representation_layer][0],
        coefficients=b,
        reconstruction=reconstruction,
    )


def forward_dataset(model: FaeModel, dataset: FunctionalDataset) -> ForwardResult:
    """Batched forward: representation (N, d), coefficients (N, M^(O)), long reconstruction."""
    features = feature_matrix(dataset, model.config.input_basis)
    outputs = _checked_forward(model, features)
    b = outputs[-1]
    phi_out = basis_values(model.config.output_basis, dataset.times)
    reconstruction = np.sum(phi_out * b[dataset.segment_ids], axis=1)
    return ForwardResult(outputs[model.representation_layer], b, reconstruction)


def encode(model: FaeModel, sample: FunctionalSample) -> np.ndarray:
    features = feature_layer(sample, model.config.input_basis)
    outputs = model.network.forward(features[None, :], upto=model.representation_layer)
    rep = outputs[-1][0]
    if not np.all(np.isfinite(rep)):
        raise EvaluationError("non-finite value", model.network.layers[model.representation_layer].name)
    return rep


def encode_dataset(model: FaeModel, dataset: FunctionalDataset) -> np.ndarray:
    features = feature_matrix(dataset, model.config.input_basis)
    return model.network.forward(features, upto=model.representation_layer)[-1]


def smooth(model: FaeModel, sample: FunctionalSample, eval_times) -> np.ndarray:
    """X̂(t) = Σ_m b_m φ_m^(O)(t) at arbitrary in-domain times."""
    b = forward(model, sample).coefficients
    return expand(model.config.output_basis, b, eval_times)


def smooth_dataset(model: FaeModel, dataset: FunctionalDataset, eval_times) -> np.ndarray:
    """Every sample's curve on one shared grid -> (N, len(eval_times))."""
    b = forward_dataset(model, dataset).coefficients
    return expand(model.config.output_basis, b, eval_times)


def input_weight_functions(model: FaeModel, times) -> np.ndarray:
    """w_k^(I)(t) = Σ_m c_mk^(I) φ_m^(I)(t) -> (len(times), K^(1))."""
    return basis_values(model.config.input_basis, times) @ model.input_coeffs.T


def output_weight_functions(model: FaeModel, times) -> np.ndarray:
    """w_k^(O)(t) = Σ_m c_mk^(O) φ_m^(O)(t) -> (len(times), K^(L))."""
    return basis_values(model.config.output_basis, times) @ model.output_coeffs


# ==================== Loss ====================

def penalized_loss(
    samples: Sequence[FunctionalSample],
    results: Sequence[ForwardResult],
    lam: float,
) -> float:
    """(1/N) Σ_i [Σ_j (X_ij - X̂_ij)² + λ Σ_m (Δ²b_im)²]."""
    if len(samples) != len(results):
        raise ArgumentError(f"{len(samples)} samples but {len(results)} forward results")
    if len(samples) == 0:
        raise ArgumentError("penalized_loss needs at least one sample")
    total = 0.0
    for sample, result in zip(samples, results):
        if result.reconstruction.shape != sample.values.shape:
            raise ArgumentError("reconstruction is not aligned with the sample's observations")
        residual = sample.values - result.reconstruction
        total += float(residual @ residual)
        if lam > 0:
            if result.coefficients.size < 3:
                raise ConfigError("lambda > 0 needs at least 3 output coefficients")
            diffs = second_differences(result.coefficients)
            total += lam * float(diffs @ diffs)
    return total / len(samples)


class FaeObjective:
    """Penalized loss and exact gradients over mini-batches of one dataset.

    Features and both design matrices are computed once; batches only
    gather rows.
    """

    def __init__(self, model: FaeModel, dataset: FunctionalDataset):
        config = model.config
        if config.lam > 0 and config.output_basis.num_basis < 3:
            raise ConfigError("lambda > 0 needs at least 3 output basis functions")
        dataset.check_domain(config.input_basis)
        dataset.check_domain(config.output_basis)
        self.model = model
        self.dataset = dataset
        self.lam = config.lam
        self.features = feature_matrix(dataset, config.input_basis)
        self.phi_out = basis_values(config.output_basis, dataset.times)

    def __call__(self, indices: Optional[np.ndarray] = None) -> Tuple[float, List[np.ndarray]]:
        if indices is None:
            indices = np.arange(len(self.dataset))
        indices = np.asarray(indices, dtype=np.int64)
        n = indices.size
        rows, local_offsets = self.dataset.observation_rows(indices)
        local_ids = np.repeat(np.arange(n), self.dataset.lengths[indices])

        params = self.model.parameters()
        tape = GradientTape(params)
        b = _checked_forward(self.model, self.features[indices], tape)[-1]

        phi = self.phi_out[rows]
        residual = self.dataset.values[rows] - np.sum(phi * b[local_ids], axis=1)
        loss = float(residual @ residual)
        grad_b = -2.0 * segment_sum(residual[:, None] * phi, local_offsets)

        if self.lam > 0:
            diffs = second_differences(b)
            loss += self.lam * float(np.sum(diffs * diffs))
            grad_b += 2.0 * self.lam * _second_difference_adjoint(diffs, b.shape[1])

        loss /= n
        tape.record_loss(loss, grad_b / n)
        return loss, tape.backward()


# ==================== Training ====================

@dataclass
class TrainResult:
    model: FaeModel
    history: List[float]


def train(
    dataset: FunctionalDataset,
    config: FaeConfig,
    on_epoch_end: Optional[Callable[[int, float, FaeModel], None]] = None,
) -> TrainResult:
    """Minimize the penalized loss over {c^(I), hidden layers, c^(O)}.

    The feature layer and the output basis are deterministic and receive
    no gradient. Initialization and batch order both draw from
    `config.seed`.
    """
    if dataset is None or len(dataset) == 0:
        raise ArgumentError("cannot train on an empty dataset")

    rng = np.random.default_rng(config.seed)
    model = FaeModel.initialize(config, rng)
    objective = FaeObjective(model, dataset)
    logger.info(
        f"Training FAE on {len(dataset)} samples: M_in={config.input_basis.num_basis}, "
        f"hidden={config.hidden_sizes}, M_out={config.output_basis.num_basis}, "
        f"activation={config.activation.value}, lambda={config.lam}"
    )
    callback = None
    if on_epoch_end is not None:
        def callback(epoch: int, loss: float) -> None:
            on_epoch_end(epoch, loss, model)

    history = run_epochs(
        model.parameters(), objective, len(dataset), config, rng,
        on_epoch_end=callback, label="fae",
    )
    logger.info(f"FAE training finished: final loss {history[-1]:.6g}")
    return TrainResult(model=model, history=history)
