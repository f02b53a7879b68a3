"""
Dense Network Core

Minimal feed-forward machinery shared by the functional autoencoder,
the classic autoencoder baseline, the simulation mapping network and
the logistic-regression classifier:

- DenseLayer / Network: g(Wx + b) chains, float64 throughout
- GradientTape: records the forward chain and replays it backwards
- SGD (momentum) and Adam updates, plus the shared epoch loop
"""
import logging
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

from ..config import get_settings
from .errors import ArgumentError, EvaluationError, StateError, TrainingFailure
from .schemas import Activation, OptimizerConfig, OptimizerKind, TrainingConfig

logger = logging.getLogger(__name__)
settings = get_settings()


# ==================== Activations ====================

def activate(z: np.ndarray, activation: Activation) -> np.ndarray:
    if activation == Activation.IDENTITY:
        return z
    if activation == Activation.SIGMOID:
        return expit(z)
    # log(1 + e^z) without overflow for large |z|
    return np.logaddexp(0.0, z)


def activation_derivative(z: np.ndarray, output: np.ndarray, activation: Activation) -> np.ndarray:
    if activation == Activation.IDENTITY:
        return np.ones_like(z)
    if activation == Activation.SIGMOID:
        return output * (1.0 - output)
    return expit(z)


# ==================== Layers ====================

class DenseLayer:
    """g(W x + b) with W of shape (out, in); the bias may be disabled."""

    def __init__(
        self,
        weight: np.ndarray,
        bias: Optional[np.ndarray] = None,
        activation: Activation = Activation.IDENTITY,
        name: str = "dense",
    ):
        self.weight = np.array(weight, dtype=np.float64)
        if self.weight.ndim != 2:
            raise ArgumentError(f"{name}: weight must be a matrix")
        self.bias = None if bias is None else np.array(bias, dtype=np.float64)
        if self.bias is not None and self.bias.shape != (self.weight.shape[0],):
            raise ArgumentError(f"{name}: bias shape {self.bias.shape} != ({self.weight.shape[0]},)")
        self.activation = Activation(activation)
        self.name = name

    @classmethod
    def initialize(
        cls,
        rng: np.random.Generator,
        in_dim: int,
        out_dim: int,
        sigma: float,
        bias: bool = True,
        activation: Activation = Activation.IDENTITY,
        name: str = "dense",
    ) -> "DenseLayer":
        """Weights drawn from N(0, sigma); biases start at zero."""
        weight = rng.normal(0.0, sigma, size=(out_dim, in_dim))
        return cls(weight, np.zeros(out_dim) if bias else None, activation, name)

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]

    def parameters(self) -> List[np.ndarray]:
        return [self.weight] if self.bias is None else [self.weight, self.bias]

    def forward(self, inputs: np.ndarray, tape: Optional["GradientTape"] = None) -> np.ndarray:
        inputs = np.asarray(inputs, dtype=np.float64)
        single = inputs.ndim == 1
        batch = inputs[None, :] if single else inputs
        if batch.shape[1] != self.in_dim:
            raise ArgumentError(f"{self.name}: expected input width {self.in_dim}, got {batch.shape[1]}")

        pre = batch @ self.weight.T
        if self.bias is not None:
            pre = pre + self.bias
        out = activate(pre, self.activation)
        if tape is not None:
            tape.record(self, batch, pre, out)
        return out[0] if single else out

    def to_dict(self) -> Dict:
        payload = {
            "name": self.name,
            "activation": self.activation.value,
            "weight": {"shape": list(self.weight.shape), "data": self.weight.ravel().tolist()},
            "bias": None,
        }
        if self.bias is not None:
            payload["bias"] = {"shape": list(self.bias.shape), "data": self.bias.tolist()}
        return payload

    @classmethod
    def from_dict(cls, payload: Dict) -> "DenseLayer":
        weight = np.asarray(payload["weight"]["data"], dtype=np.float64).reshape(payload["weight"]["shape"])
        bias = None
        if payload.get("bias") is not None:
            bias = np.asarray(payload["bias"]["data"], dtype=np.float64).reshape(payload["bias"]["shape"])
        return cls(weight, bias, Activation(payload["activation"]), payload.get("name", "dense"))


def dense_forward(layer: DenseLayer, inputs: np.ndarray) -> np.ndarray:
    return layer.forward(inputs)


class Network:
    """An ordered chain of dense layers."""

    def __init__(self, layers: Sequence[DenseLayer]):
        if not layers:
            raise ArgumentError("network needs at least one layer")
        for before, after in zip(layers, layers[1:]):
            if before.out_dim != after.in_dim:
                raise ArgumentError(
                    f"{before.name} outputs {before.out_dim} but {after.name} expects {after.in_dim}"
                )
        self.layers = list(layers)

    def parameters(self) -> List[np.ndarray]:
        return [p for layer in self.layers for p in layer.parameters()]

    def parameter_count(self) -> int:
        return int(sum(p.size for p in self.parameters()))

    def forward(
        self,
        inputs: np.ndarray,
        tape: Optional["GradientTape"] = None,
        upto: Optional[int] = None,
    ) -> List[np.ndarray]:
        """Run layers 0..upto (all by default); returns every layer's output."""
        last = len(self.layers) - 1 if upto is None else upto
        outputs = []
        current = inputs
        for layer in self.layers[:last + 1]:
            current = layer.forward(current, tape)
            outputs.append(current)
        return outputs

    def to_dict(self) -> List[Dict]:
        return [layer.to_dict() for layer in self.layers]

    @classmethod
    def from_dict(cls, payload: List[Dict]) -> "Network":
        return cls([DenseLayer.from_dict(item) for item in payload])


# ==================== Reverse mode ====================

class GradientTape:
    """Records a forward chain of dense layers and replays it in reverse.

    Gradients come back aligned 1:1 with `params`; parameters that no
    recorded layer touched get exact zeros.
    """

    def __init__(self, params: Sequence[np.ndarray]):
        self.params = list(params)
        self._records: List[Tuple[DenseLayer, np.ndarray, np.ndarray, np.ndarray]] = []
        self._output_grad: Optional[np.ndarray] = None
        self.loss: Optional[float] = None

    def record(self, layer: DenseLayer, inputs: np.ndarray, pre: np.ndarray, outputs: np.ndarray) -> None:
        self._records.append((layer, inputs, pre, outputs))

    def record_loss(self, value: float, output_grad: np.ndarray) -> None:
        """Register dL/d(output of the last recorded layer)."""
        self.loss = float(value)
        self._output_grad = np.asarray(output_grad, dtype=np.float64)

    def backward(self, loss_seed: float = 1.0) -> List[np.ndarray]:
        if not self._records or self._output_grad is None:
            raise StateError("backward called before a forward pass and loss were recorded")

        index = {id(p): i for i, p in enumerate(self.params)}
        grads = [np.zeros_like(p) for p in self.params]

        upstream = self._output_grad * loss_seed
        last_layer = self._records[-1][0]
        if upstream.shape != self._records[-1][3].shape:
            raise StateError(f"loss gradient shape {upstream.shape} does not match {last_layer.name} output")

        for layer, inputs, pre, outputs in reversed(self._records):
            delta = upstream * activation_derivative(pre, outputs, layer.activation)
            if id(layer.weight) in index:
                grads[index[id(layer.weight)]] += delta.T @ inputs
            if layer.bias is not None and id(layer.bias) in index:
                grads[index[id(layer.bias)]] += delta.sum(axis=0)
            upstream = delta @ layer.weight

        return grads


def backward(tape: GradientTape, loss_seed: float = 1.0) -> List[np.ndarray]:
    return tape.backward(loss_seed)


# ==================== Losses ====================

def masked_squared_error(
    predictions: np.ndarray,
    targets: np.ndarray,
    mask: Optional[np.ndarray],
    normalizer: float,
) -> Tuple[float, np.ndarray]:
    """Σ over observed entries of (pred - target)² / normalizer, and its gradient."""
    residual = predictions - targets
    if mask is not None:
        residual = np.where(mask, residual, 0.0)
    value = float(np.sum(residual * residual) / normalizer)
    return value, 2.0 * residual / normalizer


# ==================== Optimizers ====================

def _check_finite(grads: Sequence[np.ndarray], epoch: Optional[int]) -> None:
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise TrainingFailure("non-finite gradient", epoch)


def sgd_step(
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    hyper: OptimizerConfig,
    velocity: Optional[List[np.ndarray]] = None,
    epoch: Optional[int] = None,
) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """Plain / momentum SGD: v <- μv - lr·g, θ <- θ + v. Returns (new params, new velocity)."""
    _check_finite(grads, epoch)
    if velocity is None:
        velocity = [np.zeros_like(p) for p in params]
    new_velocity = [hyper.momentum * v - hyper.learning_rate * g for v, g in zip(velocity, grads)]
    return [p + v for p, v in zip(params, new_velocity)], new_velocity


class AdamState:
    def __init__(self, params: Sequence[np.ndarray]):
        self.step = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]


def adam_step(
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    hyper: OptimizerConfig,
    state: Optional[AdamState] = None,
    epoch: Optional[int] = None,
) -> Tuple[List[np.ndarray], AdamState]:
    """Bias-corrected Adam update. Returns (new params, state)."""
    _check_finite(grads, epoch)
    if state is None:
        state = AdamState(params)
    state.step += 1
    correction1 = 1.0 - hyper.beta1 ** state.step
    correction2 = 1.0 - hyper.beta2 ** state.step

    updated = []
    for i, (p, g) in enumerate(zip(params, grads)):
        state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * g
        state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * g * g
        m_hat = state.m[i] / correction1
        v_hat = state.v[i] / correction2
        updated.append(p - hyper.learning_rate * m_hat / (np.sqrt(v_hat) + hyper.eps))
    return updated, state


class Optimizer:
    """Stateful wrapper applying sgd_step / adam_step to parameter arrays in place."""

    def __init__(self, hyper: OptimizerConfig):
        self.hyper = hyper
        self._velocity: Optional[List[np.ndarray]] = None
        self._adam: Optional[AdamState] = None

    def step(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray], epoch: Optional[int] = None) -> None:
        if self.hyper.kind == OptimizerKind.SGD:
            updated, self._velocity = sgd_step(params, grads, self.hyper, self._velocity, epoch)
        else:
            updated, self._adam = adam_step(params, grads, self.hyper, self._adam, epoch)
        for p, new in zip(params, updated):
            if not np.all(np.isfinite(new)):
                raise TrainingFailure("parameters became non-finite", epoch)
            p[...] = new


LossAndGrads = Callable[[np.ndarray], Tuple[float, List[np.ndarray]]]


def run_epochs(
    params: Sequence[np.ndarray],
    loss_and_grads: LossAndGrads,
    n_samples: int,
    config: TrainingConfig,
    rng: np.random.Generator,
    on_epoch_end: Optional[Callable[[int, float], None]] = None,
    label: str = "model",
) -> List[float]:
    """Mini-batch training loop; returns the per-epoch mean loss.

    Batch order is shuffled by `rng` each epoch (full batch when
    batch_size is None or >= n_samples).
    """
    if n_samples < 1:
        raise ArgumentError("cannot train on an empty dataset")

    optimizer = Optimizer(config.optimizer)
    batch_size = n_samples if config.batch_size is None else min(config.batch_size, n_samples)
    log_every = max(settings.log_every, 1)
    history: List[float] = []

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n_samples) if batch_size < n_samples else np.arange(n_samples)
        total = 0.0
        for start in range(0, n_samples, batch_size):
            batch = order[start:start + batch_size]
            try:
                loss, grads = loss_and_grads(batch)
            except EvaluationError as e:
                raise TrainingFailure(f"{label} forward pass failed ({e})", epoch) from e
            if not np.isfinite(loss):
                raise TrainingFailure(f"{label} loss diverged ({loss})", epoch)
            optimizer.step(params, grads, epoch)
            total += loss * batch.size

        history.append(total / n_samples)
        if epoch == 1 or epoch % log_every == 0 or epoch == config.epochs:
            logger.info(f"{label} epoch {epoch}/{config.epochs}: loss={history[-1]:.6g}")
        if on_epoch_end is not None:
            on_epoch_end(epoch, history[-1])

    return history
