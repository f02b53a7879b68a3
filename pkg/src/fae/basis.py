"""
Basis Systems

B-spline and Fourier basis systems evaluable anywhere in their domain.
Design and Gram matrices built here feed the feature layer, the
coefficient layer, FPCA and the data generator.
"""
import logging
from enum import Enum
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import DomainError
from .quadrature import check_increasing, trapezoid_weights, uniform_grid

logger = logging.getLogger(__name__)

# Slack (relative to domain width) for time points that land a rounding
# error outside the domain, e.g. after a CSV round-trip.
DOMAIN_SLACK = 1e-12


class BasisKind(str, Enum):
    BSPLINE = "bspline"
    FOURIER = "fourier"


class BasisSystem(BaseModel):
    """A family of `num_basis` known functions on a closed interval.

    B-spline knots are equally spaced interior knots with the boundary knots
    repeated `order` times, so the system is fully determined by
    (num_basis, order, domain). Fourier functions are ordered
    (1, sin 2πt̃, cos 2πt̃, sin 4πt̃, ...) on the domain-normalized time t̃ and
    scaled to be orthonormal.
    """

    model_config = ConfigDict(frozen=True)

    kind: BasisKind = BasisKind.BSPLINE
    domain: Tuple[float, float] = (0.0, 1.0)
    num_basis: int = Field(gt=0)
    order: int = Field(default=4, gt=0)

    @model_validator(mode="after")
    def _check_shape(self):
        t_min, t_max = self.domain
        if not t_min < t_max:
            raise ValueError(f"domain must satisfy t_min < t_max, got {self.domain}")
        if self.kind == BasisKind.BSPLINE and self.num_basis < self.order:
            raise ValueError(
                f"B-spline basis needs num_basis >= order ({self.num_basis} < {self.order})"
            )
        return self

    @property
    def t_min(self) -> float:
        return float(self.domain[0])

    @property
    def t_max(self) -> float:
        return float(self.domain[1])

    @property
    def knots(self) -> np.ndarray:
        """Full clamped knot vector (B-spline only), length num_basis + order."""
        if self.kind != BasisKind.BSPLINE:
            return np.empty(0)
        interior = np.linspace(self.t_min, self.t_max, self.num_basis - self.order + 2)[1:-1]
        return np.concatenate([
            np.full(self.order, self.t_min),
            interior,
            np.full(self.order, self.t_max),
        ])

    def describe(self) -> str:
        if self.kind == BasisKind.BSPLINE:
            return f"bspline(M={self.num_basis}, order={self.order}, domain={self.domain})"
        return f"fourier(M={self.num_basis}, domain={self.domain})"


def bspline(num_basis: int, order: int = 4, domain: Tuple[float, float] = (0.0, 1.0)) -> BasisSystem:
    return BasisSystem(kind=BasisKind.BSPLINE, num_basis=num_basis, order=order, domain=domain)


def fourier(num_basis: int, domain: Tuple[float, float] = (0.0, 1.0)) -> BasisSystem:
    return BasisSystem(kind=BasisKind.FOURIER, num_basis=num_basis, order=1, domain=domain)


# ==================== Evaluation ====================

def check_domain(basis: BasisSystem, times: np.ndarray) -> np.ndarray:
    slack = DOMAIN_SLACK * (basis.t_max - basis.t_min)
    outside = (times < basis.t_min - slack) | (times > basis.t_max + slack)
    if np.any(outside):
        bad = times[outside][0]
        raise DomainError(f"t={bad!r} outside basis domain [{basis.t_min}, {basis.t_max}]")
    return np.clip(times, basis.t_min, basis.t_max)


def _safe_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """num/den with the Cox-de Boor convention 0/0 = 0 (zero-width knot spans)."""
    out = np.zeros(np.broadcast_shapes(num.shape, den.shape))
    np.divide(num, den, out=out, where=np.broadcast_to(den != 0, out.shape))
    return out


def _bspline_values(knots: np.ndarray, order: int, times: np.ndarray) -> np.ndarray:
    n_knots = knots.size
    t = times[:, None]

    # Order 1: half-open interval indicators
    values = ((knots[None, :-1] <= t) & (t < knots[None, 1:])).astype(np.float64)

    # Right endpoint takes the left limit so the last function equals 1 there
    at_end = times >= knots[-1]
    if np.any(at_end):
        last_span = np.flatnonzero(knots[:-1] < knots[1:])[-1]
        values[at_end] = 0.0
        values[at_end, last_span] = 1.0

    for k in range(2, order + 1):
        left_den = knots[k - 1:n_knots - 1] - knots[:n_knots - k]
        right_den = knots[k:] - knots[1:n_knots - k + 1]
        left = _safe_ratio(t - knots[None, :n_knots - k], left_den[None, :]) * values[:, :-1]
        right = _safe_ratio(knots[None, k:] - t, right_den[None, :]) * values[:, 1:]
        values = left + right

    return values


def _fourier_values(basis: BasisSystem, times: np.ndarray) -> np.ndarray:
    width = basis.t_max - basis.t_min
    scaled = (times - basis.t_min) / width
    values = np.empty((times.size, basis.num_basis))
    values[:, 0] = 1.0 / np.sqrt(width)
    norm = np.sqrt(2.0 / width)
    for m in range(1, basis.num_basis):
        frequency = 2.0 * np.pi * ((m + 1) // 2)
        if m % 2 == 1:
            values[:, m] = norm * np.sin(frequency * scaled)
        else:
            values[:, m] = norm * np.cos(frequency * scaled)
    return values


def basis_values(basis: BasisSystem, times) -> np.ndarray:
    """Evaluate every basis function at each time (any order) -> (len(times), M)."""
    times = np.atleast_1d(np.asarray(times, dtype=np.float64))
    times = check_domain(basis, times)
    if basis.kind == BasisKind.BSPLINE:
        return _bspline_values(basis.knots, basis.order, times)
    return _fourier_values(basis, times)


def evaluate(basis: BasisSystem, t: float) -> np.ndarray:
    """(φ_1(t), ..., φ_M(t)) at a single time point."""
    return basis_values(basis, [float(t)])[0]


def design_matrix(basis: BasisSystem, times) -> np.ndarray:
    """Row j is evaluate(basis, t_j); times must be strictly increasing."""
    times = check_increasing(times)
    return basis_values(basis, times)


def gram_matrix(basis: BasisSystem, resolution: int) -> np.ndarray:
    """G[m, n] ≈ ∫ φ_m φ_n by the trapezoid rule on `resolution` uniform points."""
    grid = uniform_grid(basis.t_min, basis.t_max, resolution)
    weights = trapezoid_weights(grid).weights
    values = basis_values(basis, grid)
    gram = values.T @ (values * weights[:, None])
    return (gram + gram.T) / 2.0


def expand(basis: BasisSystem, coefficients: np.ndarray, times) -> np.ndarray:
    """Σ_m c_m φ_m(t) for one coefficient vector (M,) or a stack (N, M)."""
    values = basis_values(basis, times)
    return np.asarray(coefficients) @ values.T
