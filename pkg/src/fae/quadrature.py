"""
Quadrature Weights

Trapezoidal weights turning inner products of functions into weighted
sums over observed time points. Irregular subjects get weights from
their own timestamps.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError


@dataclass(frozen=True)
class QuadratureWeights:
    """Per-timestamp integration weights (units: time)."""

    times: np.ndarray
    weights: np.ndarray

    @property
    def total(self) -> float:
        return float(self.weights.sum())

    def integrate(self, values: np.ndarray) -> float:
        """Approximate the integral of a function sampled at `times`."""
        values = np.asarray(values, dtype=np.float64)
        if values.shape[0] != self.weights.shape[0]:
            raise ArgumentError(
                f"expected {self.weights.shape[0]} values, got {values.shape[0]}"
            )
        return float(self.weights @ values)


def check_increasing(times: np.ndarray, name: str = "times") -> np.ndarray:
    """Return `times` as a 1-D float64 array, requiring strictly increasing values."""
    times = np.asarray(times, dtype=np.float64)
    if times.ndim != 1:
        raise ArgumentError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(times)):
        raise ArgumentError(f"{name} contain non-finite values")
    if times.size > 1 and np.any(np.diff(times) <= 0):
        raise ArgumentError(f"{name} must be strictly increasing (duplicates not allowed)")
    return times


def trapezoid_weights(times) -> QuadratureWeights:
    """Trapezoid weights for a strictly increasing grid of at least two points.

    w_1 = (t_2 - t_1)/2, w_J = (t_J - t_{J-1})/2, interior w_j = (t_{j+1} - t_{j-1})/2.
    """
    times = check_increasing(times)
    if times.size < 2:
        raise ArgumentError("trapezoid rule needs at least two time points")

    gaps = np.diff(times)
    weights = np.empty_like(times)
    weights[0] = gaps[0] / 2.0
    weights[-1] = gaps[-1] / 2.0
    weights[1:-1] = (gaps[:-1] + gaps[1:]) / 2.0
    return QuadratureWeights(times=times, weights=weights)


def uniform_grid(t_min: float, t_max: float, resolution: int) -> np.ndarray:
    if resolution < 2:
        raise ArgumentError("resolution must be at least 2")
    return np.linspace(t_min, t_max, resolution)
