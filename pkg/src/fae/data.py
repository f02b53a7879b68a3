"""
Functional Samples and Datasets

A FunctionalSample is one subject's (possibly irregular) observation
times and values. A FunctionalDataset stacks every observation into long
arrays so feature sums, residuals and gradients run as vectorized
segment operations instead of per-sample loops.
"""
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .basis import BasisSystem, check_domain
from .errors import ArgumentError
from .quadrature import QuadratureWeights, check_increasing, trapezoid_weights

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class FunctionalSample:
    """One subject: J >= 2 strictly increasing times, matching values, optional label."""

    times: np.ndarray
    values: np.ndarray
    label: Optional[int] = None
    sample_id: Optional[str] = None

    def __post_init__(self):
        times = check_increasing(self.times, name="sample times")
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.shape != times.shape:
            raise ArgumentError(
                f"sample {self.sample_id!r}: {times.size} times but {values.size} values"
            )
        if times.size < 2:
            raise ArgumentError(f"sample {self.sample_id!r}: needs at least two observations")
        if not np.all(np.isfinite(values)):
            raise ArgumentError(f"sample {self.sample_id!r}: non-finite values")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @cached_property
    def quad(self) -> QuadratureWeights:
        """Trapezoid weights from this subject's own timestamps."""
        return trapezoid_weights(self.times)

    @property
    def size(self) -> int:
        return int(self.times.size)

    def with_values(self, values: np.ndarray) -> "FunctionalSample":
        return FunctionalSample(self.times, values, self.label, self.sample_id)


class FunctionalDataset:
    """Ordered collection of samples with stacked observation arrays."""

    def __init__(self, samples: Sequence[FunctionalSample]):
        if len(samples) == 0:
            raise ArgumentError("dataset is empty")
        self.samples: List[FunctionalSample] = list(samples)
        self.lengths = np.array([s.size for s in self.samples], dtype=np.int64)
        self.offsets = np.concatenate([[0], np.cumsum(self.lengths)[:-1]]).astype(np.int64)
        self.times = np.concatenate([s.times for s in self.samples])
        self.values = np.concatenate([s.values for s in self.samples])
        # Quadrature weights are frozen here; training never re-derives them
        self.weights = np.concatenate([s.quad.weights for s in self.samples])
        self.segment_ids = np.repeat(np.arange(len(self.samples)), self.lengths)

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[FunctionalSample]:
        return iter(self.samples)

    def __getitem__(self, index: int) -> FunctionalSample:
        return self.samples[index]

    @property
    def num_observations(self) -> int:
        return int(self.times.size)

    @property
    def labels(self) -> Optional[np.ndarray]:
        """Integer labels, or None when any sample is unlabelled."""
        if any(s.label is None for s in self.samples):
            return None
        return np.array([s.label for s in self.samples], dtype=np.int64)

    @property
    def is_regular(self) -> bool:
        first = self.samples[0].times
        return all(s.size == first.size and np.array_equal(s.times, first) for s in self.samples)

    def union_grid(self) -> np.ndarray:
        return np.unique(self.times)

    def subset(self, indices) -> "FunctionalDataset":
        return FunctionalDataset([self.samples[i] for i in np.asarray(indices, dtype=np.int64)])

    def check_domain(self, basis: BasisSystem) -> None:
        check_domain(basis, self.times)

    def observation_rows(self, indices: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Long-array rows of the given samples plus their segment offsets in that selection."""
        indices = np.asarray(indices, dtype=np.int64)
        lengths = self.lengths[indices]
        local_offsets = np.concatenate([[0], np.cumsum(lengths)[:-1]]).astype(np.int64)
        rows = np.repeat(self.offsets[indices] - local_offsets, lengths) + np.arange(lengths.sum())
        return rows, local_offsets

    def split_long(self, long_values: np.ndarray) -> List[np.ndarray]:
        """Cut a long per-observation array back into per-sample arrays."""
        return np.split(np.asarray(long_values), self.offsets[1:])

    def with_long_values(self, long_values: np.ndarray) -> "FunctionalDataset":
        parts = self.split_long(long_values)
        return FunctionalDataset([s.with_values(v) for s, v in zip(self.samples, parts)])


def segment_sum(rows: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Sum consecutive row blocks starting at `offsets` (every block non-empty)."""
    return np.add.reduceat(rows, offsets, axis=0)


# ==================== Centering ====================

@dataclass(frozen=True)
class MeanCurve:
    """Pointwise sample mean at every distinct timestamp."""

    times: np.ndarray
    values: np.ndarray
    counts: np.ndarray = field(default_factory=lambda: np.empty(0))

    def at(self, times) -> np.ndarray:
        """Mean at arbitrary times (linear interpolation between stored timestamps)."""
        return np.interp(np.asarray(times, dtype=np.float64), self.times, self.values)

    def to_dict(self) -> dict:
        return {"times": self.times.tolist(), "values": self.values.tolist(), "counts": self.counts.tolist()}

    @classmethod
    def from_dict(cls, payload: dict) -> "MeanCurve":
        return cls(
            times=np.asarray(payload["times"], dtype=np.float64),
            values=np.asarray(payload["values"], dtype=np.float64),
            counts=np.asarray(payload.get("counts", []), dtype=np.int64),
        )


def pointwise_mean(dataset: FunctionalDataset) -> MeanCurve:
    grid, inverse = np.unique(dataset.times, return_inverse=True)
    counts = np.bincount(inverse, minlength=grid.size)
    sums = np.bincount(inverse, weights=dataset.values, minlength=grid.size)
    return MeanCurve(times=grid, values=sums / counts, counts=counts)


def center(dataset: FunctionalDataset, mean: MeanCurve) -> FunctionalDataset:
    """Subtract the mean curve from every observation."""
    return dataset.with_long_values(dataset.values - mean.at(dataset.times))


def uncenter_values(times, values, mean: MeanCurve) -> np.ndarray:
    return np.asarray(values) + mean.at(times)
