"""
Evaluation

Prediction error, downstream classification on learned representations,
random train/test splits, the repeated-split experiment runner and
K-fold selection of the roughness penalty.
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field
from scipy.special import log_softmax, softmax

from ..config import get_settings
from . import autoencoder, baseline_ae, fpca
from .data import FunctionalDataset, MeanCurve, center, pointwise_mean
from .errors import ArgumentError, DegenerateFitError
from .nncore import DenseLayer, GradientTape, Optimizer
from .schemas import (
    AeConfig,
    FaeConfig,
    FpcaConfig,
    OptimizerConfig,
    OptimizerKind,
    dump_model_config,
)

logger = logging.getLogger(__name__)
settings = get_settings()

ModelConfigType = Union[FaeConfig, AeConfig, FpcaConfig]
FittedModel = Union[autoencoder.FaeModel, baseline_ae.AeModel, fpca.FpcaModel]


# ==================== Metrics ====================

def mse_p(truth: FunctionalDataset, predictions: Union[np.ndarray, Sequence[np.ndarray]]) -> float:
    """(1/N) Σ_i (1/J_i) Σ_j (X_ij - X̂_ij)².

    `predictions` is either one long array aligned with truth's stacked
    observations or one array per sample.
    """
    if isinstance(predictions, np.ndarray) and predictions.ndim == 1:
        long = predictions
    else:
        parts = list(predictions)
        if len(parts) != len(truth):
            raise ArgumentError(f"{len(parts)} predictions for {len(truth)} samples")
        for sample, part in zip(truth, parts):
            if np.shape(part) != sample.values.shape:
                raise ArgumentError(f"prediction for sample {sample.sample_id!r} is not aligned with its times")
        long = np.concatenate([np.asarray(p, dtype=np.float64) for p in parts])
    if long.shape != truth.values.shape:
        raise ArgumentError(f"{long.size} predicted values for {truth.num_observations} observations")

    squared = (truth.values - long) ** 2
    per_sample = np.add.reduceat(squared, truth.offsets) / truth.lengths
    return float(per_sample.mean())


# ==================== Logistic regression ====================

class LogisticRegression:
    """Multinomial logistic regression on standardized inputs.

    Full-batch Adam on mean cross-entropy + (l2/2)·‖W‖²; weights start at
    zero so the fit is deterministic.
    """

    def __init__(self, l2: Optional[float] = None, iterations: Optional[int] = None, learning_rate: Optional[float] = None):
        self.l2 = settings.logreg_l2 if l2 is None else l2
        self.iterations = settings.logreg_iterations if iterations is None else iterations
        self.learning_rate = settings.logreg_learning_rate if learning_rate is None else learning_rate
        self.classes: Optional[np.ndarray] = None
        self.layer: Optional[DenseLayer] = None
        self._shift: Optional[np.ndarray] = None
        self._scale: Optional[np.ndarray] = None

    def _standardize(self, reps: np.ndarray) -> np.ndarray:
        return (np.asarray(reps, dtype=np.float64) - self._shift) / self._scale

    def fit(self, reps: np.ndarray, labels: np.ndarray) -> "LogisticRegression":
        reps = np.asarray(reps, dtype=np.float64)
        labels = np.asarray(labels)
        if reps.ndim != 2 or reps.shape[0] != labels.shape[0]:
            raise ArgumentError("reps must be (N, d) with one label per row")
        self.classes, targets = np.unique(labels, return_inverse=True)
        if self.classes.size < 2:
            raise DegenerateFitError(f"training labels contain a single class ({self.classes.tolist()})")

        self._shift = reps.mean(axis=0)
        scale = reps.std(axis=0)
        self._scale = np.where(scale > 0, scale, 1.0)
        x = self._standardize(reps)
        n, d = x.shape
        k = self.classes.size
        onehot = np.eye(k)[targets]

        self.layer = DenseLayer(np.zeros((k, d)), np.zeros(k), name="logits")
        params = self.layer.parameters()
        optimizer = Optimizer(OptimizerConfig(kind=OptimizerKind.ADAM, learning_rate=self.learning_rate))
        for step in range(1, self.iterations + 1):
            tape = GradientTape(params)
            logits = self.layer.forward(x, tape)
            probs = softmax(logits, axis=1)
            tape.record_loss(0.0, (probs - onehot) / n)
            grads = tape.backward()
            grads[0] = grads[0] + self.l2 * self.layer.weight
            optimizer.step(params, grads, step)
        logger.debug(f"Logistic regression on {n} samples, {k} classes: final loss {self.loss(reps, labels):.4g}")
        return self

    def loss(self, reps: np.ndarray, labels: np.ndarray) -> float:
        targets = np.searchsorted(self.classes, labels)
        log_probs = log_softmax(self.layer.forward(self._standardize(reps)), axis=1)
        penalty = 0.5 * self.l2 * float(np.sum(self.layer.weight ** 2))
        return float(-log_probs[np.arange(targets.size), targets].mean()) + penalty

    def predict(self, reps: np.ndarray) -> np.ndarray:
        if self.layer is None:
            raise ArgumentError("classifier has not been fitted")
        return self.classes[np.argmax(self.layer.forward(self._standardize(reps)), axis=1)]


def logreg_train(reps: np.ndarray, labels: np.ndarray, l2: Optional[float] = None) -> LogisticRegression:
    return LogisticRegression(l2=l2).fit(reps, labels)


def logreg_accuracy(model: LogisticRegression, reps: np.ndarray, labels: np.ndarray) -> float:
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ArgumentError("no samples to score")
    return float(np.mean(model.predict(reps) == labels))


# ==================== Splits ====================

@dataclass
class Split:
    train: np.ndarray
    test: np.ndarray


def split(dataset: Union[FunctionalDataset, int], train_fraction: float, seed: int) -> Split:
    """Seeded disjoint, exhaustive partition of sample indices."""
    n = dataset if isinstance(dataset, (int, np.integer)) else len(dataset)
    if not 0.0 < train_fraction < 1.0:
        raise ArgumentError(f"train_fraction must be in (0, 1), got {train_fraction}")
    n_train = int(round(train_fraction * n))
    if n_train == 0 or n_train == n:
        raise ArgumentError(f"train_fraction {train_fraction} leaves an empty side for {n} samples")
    order = np.random.default_rng(seed).permutation(n)
    return Split(train=np.sort(order[:n_train]), test=np.sort(order[n_train:]))


# ==================== Model families ====================

def train_model(
    dataset: FunctionalDataset,
    config: ModelConfigType,
    grid: Optional[np.ndarray] = None,
    on_epoch_end: Optional[Callable] = None,
) -> Tuple[FittedModel, List[float]]:
    """Train whichever family `config` names; returns (model, per-epoch loss history)."""
    if isinstance(config, FaeConfig):
        result = autoencoder.train(dataset, config, on_epoch_end=on_epoch_end)
        return result.model, result.history
    if isinstance(config, AeConfig):
        result = baseline_ae.ae_train(dataset, config, grid=grid, on_epoch_end=on_epoch_end)
        return result.model, result.history
    return fpca.train(dataset, config), []


def representations(model: FittedModel, dataset: FunctionalDataset) -> np.ndarray:
    if isinstance(model, autoencoder.FaeModel):
        return autoencoder.encode_dataset(model, dataset)
    if isinstance(model, baseline_ae.AeModel):
        return baseline_ae.ae_encode(model, baseline_ae.align_dataset(dataset, model.grid))
    return fpca.scores_dataset(model, dataset)


def reconstructions(model: FittedModel, dataset: FunctionalDataset) -> np.ndarray:
    """Predicted values at every sample's observed times, as one long array."""
    if isinstance(model, autoencoder.FaeModel):
        return autoencoder.forward_dataset(model, dataset).reconstruction
    if isinstance(model, baseline_ae.AeModel):
        return baseline_ae.reconstruct_dataset(model, dataset)
    return fpca.reconstruct_dataset(model, fpca.scores_dataset(model, dataset), dataset)


def curves(model: FittedModel, dataset: FunctionalDataset, eval_times) -> np.ndarray:
    """Every sample's fitted curve on a shared grid -> (N, len(eval_times))."""
    if isinstance(model, autoencoder.FaeModel):
        return autoencoder.smooth_dataset(model, dataset, eval_times)
    if isinstance(model, baseline_ae.AeModel):
        return baseline_ae.ae_smooth(model, dataset, eval_times)
    return fpca.smooth_dataset(model, dataset, eval_times)


def parameter_count(model: FittedModel) -> Optional[int]:
    if isinstance(model, fpca.FpcaModel):
        return None
    return model.parameter_count()


# ==================== Reports ====================

class CheckpointResult(BaseModel):
    epoch: int
    mse_p: float
    p_classification: Optional[float] = None


class ReplicateResult(BaseModel):
    replicate: int
    seed: int
    n_train: int
    n_test: int
    mse_p: float
    p_classification: Optional[float] = None
    final_loss: Optional[float] = None
    checkpoints: List[CheckpointResult] = Field(default_factory=list)


class MetricSummary(BaseModel):
    mean: Optional[float] = None
    sd: Optional[float] = None  # n - 1 denominator; None below two replicates


def summarize(values: Sequence[Optional[float]]) -> MetricSummary:
    present = np.array([v for v in values if v is not None], dtype=np.float64)
    if present.size == 0:
        return MetricSummary()
    sd = float(present.std(ddof=1)) if present.size > 1 else None
    return MetricSummary(mean=float(present.mean()), sd=sd)


class ExperimentReport(BaseModel):
    schema_version: int = settings.config_schema_version
    model: str
    config: Dict
    master_seed: int
    train_fraction: float
    centered: bool = False
    parameter_count: Optional[int] = None
    command: Dict = Field(default_factory=dict)
    replicates: List[ReplicateResult]
    summary: Dict[str, MetricSummary] = Field(default_factory=dict)

    def recompute_summary(self) -> "ExperimentReport":
        self.summary = {
            "mse_p": summarize([r.mse_p for r in self.replicates]),
            "p_classification": summarize([r.p_classification for r in self.replicates]),
        }
        return self


def replicate_seeds(master_seed: int, count: int) -> List[int]:
    """Independent per-replicate seeds derived from one master seed."""
    children = np.random.SeedSequence(master_seed).spawn(count)
    return [int(child.generate_state(1)[0]) for child in children]


def _classify(train_reps, train_labels, test_reps, test_labels) -> Optional[float]:
    if train_labels is None or test_labels is None:
        return None
    if np.unique(train_labels).size < 2:
        logger.warning("Skipping classification: training split holds a single class")
        return None
    return logreg_accuracy(logreg_train(train_reps, train_labels), test_reps, test_labels)


def run_replicate(
    dataset: FunctionalDataset,
    config: ModelConfigType,
    train_fraction: float,
    seed: int,
    replicate: int = 0,
    centered: bool = False,
    checkpoints: Sequence[int] = (),
) -> Tuple[ReplicateResult, FittedModel]:
    """split -> (center) -> train -> encode -> score; returns the result and the fitted model."""
    parts = split(dataset, train_fraction, seed)
    train_set, test_set = dataset.subset(parts.train), dataset.subset(parts.test)
    if centered:
        mean: MeanCurve = pointwise_mean(train_set)
        train_set, test_set = center(train_set, mean), center(test_set, mean)
    train_labels, test_labels = train_set.labels, test_set.labels

    if not isinstance(config, FpcaConfig):
        config = config.model_copy(update={"seed": seed})

    wanted = set(int(e) for e in checkpoints)
    recorded: List[CheckpointResult] = []

    def on_epoch_end(epoch: int, loss: float, model) -> None:
        if epoch in wanted:
            recorded.append(CheckpointResult(
                epoch=epoch,
                mse_p=mse_p(test_set, reconstructions(model, test_set)),
                p_classification=_classify(
                    representations(model, train_set), train_labels,
                    representations(model, test_set), test_labels,
                ),
            ))

    model, history = train_model(
        train_set, config, grid=dataset.union_grid(),
        on_epoch_end=on_epoch_end if wanted else None,
    )
    result = ReplicateResult(
        replicate=replicate,
        seed=seed,
        n_train=len(train_set),
        n_test=len(test_set),
        mse_p=mse_p(test_set, reconstructions(model, test_set)),
        p_classification=_classify(
            representations(model, train_set), train_labels,
            representations(model, test_set), test_labels,
        ),
        final_loss=history[-1] if history else None,
        checkpoints=recorded,
    )
    logger.info(
        f"Replicate {replicate} (seed {seed}): mse_p={result.mse_p:.6g}, "
        f"p_classification={result.p_classification}"
    )
    return result, model


def _run_replicate_job(job: Tuple) -> Tuple[ReplicateResult, FittedModel]:
    return run_replicate(*job)


class ExperimentRunner:
    """Repeated random-split evaluation of one model configuration."""

    def __init__(
        self,
        dataset: FunctionalDataset,
        config: ModelConfigType,
        train_fraction: float = 0.8,
        replicates: int = 10,
        seed: int = 0,
        centered: bool = False,
        checkpoints: Sequence[int] = (),
        jobs: int = 1,
    ):
        if replicates < 1:
            raise ArgumentError("replicates must be at least 1")
        self.dataset = dataset
        self.config = config
        self.train_fraction = train_fraction
        self.replicates = replicates
        self.seed = seed
        self.centered = centered
        self.checkpoints = sorted(set(int(e) for e in checkpoints))
        self.jobs = max(1, jobs)
        self.models: List[FittedModel] = []

    def run(self) -> ExperimentReport:
        seeds = replicate_seeds(self.seed, self.replicates)
        jobs = [
            (self.dataset, self.config, self.train_fraction, s, i, self.centered, self.checkpoints)
            for i, s in enumerate(seeds)
        ]
        logger.info(
            f"Running {self.replicates} replicate(s) of {self.config.model} "
            f"(train fraction {self.train_fraction}, jobs {self.jobs})"
        )
        if self.jobs > 1 and self.replicates > 1:
            with ProcessPoolExecutor(max_workers=self.jobs) as pool:
                outcomes = list(pool.map(_run_replicate_job, jobs))
        else:
            outcomes = [_run_replicate_job(job) for job in jobs]
        self.models = [model for _, model in outcomes]

        report = ExperimentReport(
            model=self.config.model,
            config=dump_model_config(self.config),
            master_seed=self.seed,
            train_fraction=self.train_fraction,
            centered=self.centered,
            parameter_count=parameter_count(outcomes[0][1]),
            replicates=[result for result, _ in outcomes],
        ).recompute_summary()
        logger.info(
            f"mse_p mean={report.summary['mse_p'].mean:.6g} sd={report.summary['mse_p'].sd}; "
            f"p_classification mean={report.summary['p_classification'].mean}"
        )
        return report


# ==================== Penalty selection ====================

class LambdaSelection(BaseModel):
    folds: int
    seed: int
    scores: Dict[str, float]  # lambda (as text) -> mean held-out mse_p
    best: float


def select_lambda(
    dataset: FunctionalDataset,
    config: FaeConfig,
    lambdas: Sequence[float],
    folds: int = 5,
    seed: int = 0,
) -> LambdaSelection:
    """K-fold cross-validated held-out MSE_p for each candidate λ."""
    if not lambdas:
        raise ArgumentError("no lambda candidates given")
    if not 2 <= folds <= len(dataset):
        raise ArgumentError(f"folds must be in [2, {len(dataset)}], got {folds}")
    order = np.random.default_rng(seed).permutation(len(dataset))
    chunks = np.array_split(order, folds)

    scores: Dict[str, float] = {}
    for lam in lambdas:
        candidate = config.model_copy(update={"lam": float(lam)})
        errors = []
        for k, held_out in enumerate(chunks):
            train_idx = np.sort(np.concatenate([c for j, c in enumerate(chunks) if j != k]))
            model = autoencoder.train(dataset.subset(train_idx), candidate).model
            held = dataset.subset(np.sort(held_out))
            errors.append(mse_p(held, reconstructions(model, held)))
        scores[repr(float(lam))] = float(np.mean(errors))
        logger.info(f"lambda={lam}: cross-validated mse_p={scores[repr(float(lam))]:.6g}")

    best_key = min(scores, key=scores.get)
    return LambdaSelection(folds=folds, seed=seed, scores=scores, best=float(best_key))
