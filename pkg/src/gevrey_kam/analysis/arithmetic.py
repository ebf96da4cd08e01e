from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from gevrey_kam.analysis.fourier import MAX_DIMENSION, lattice_ball, l1_norms
from gevrey_kam.errors import ConfigError, DimensionError

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
SILVER = np.sqrt(2.0) - 1.0

RATIONAL_TOL = 1e-12


@dataclass(frozen=True)
class DiophantineParams:
    gamma: float
    tau: float

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError(f"gamma must lie in (0, 1), got {self.gamma}")
        if not self.tau > 0.0:
            raise ConfigError(f"tau must be positive, got {self.tau}")

    def require_dimension(self, d: int) -> None:
        if not self.tau > d:
            raise ConfigError(f"tau must exceed the dimension {d}, got {self.tau}")


@dataclass(frozen=True)
class ArithmeticCheck:
    """Outcome of an exhaustive small-divisor scan.

    `witness` is the first failing index in scan order; an exact hit (distance below 1e-12)
    takes priority and sets `rational`.
    """

    passed: bool
    witness: tuple[int, ...] | None = None
    rational: bool = False
    margin: float = float("inf")

    def __bool__(self) -> bool:
        return self.passed


def as_frequency(alpha: float | Sequence[float]) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(alpha, dtype=float))
    if arr.ndim != 1 or not 1 <= arr.size <= MAX_DIMENSION:
        raise DimensionError(f"frequency must have 1..{MAX_DIMENSION} components")
    return arr


def torus_distance(x: float | np.ndarray) -> np.ndarray | float:
    """|x|_T = distance from x to the nearest integer."""
    arr = np.asarray(x, dtype=float)
    out = np.abs(arr - np.rint(arr))
    return float(out) if out.ndim == 0 else out


def enumerate_modes(dimension: int, radius: int, include_zero: bool = False) -> np.ndarray:
    """Integer vectors with |n|_1 <= radius ordered by l1 norm, ties by descending entries."""
    ball = lattice_ball(dimension, radius)
    if not include_zero:
        ball = ball[l1_norms(ball) > 0]
    keys = [-ball[:, i] for i in range(dimension - 1, -1, -1)] + [l1_norms(ball)]
    return ball[np.lexsort(keys)]


def _scan(distances: np.ndarray, bounds: np.ndarray, modes: np.ndarray) -> ArithmeticCheck:
    exact = np.flatnonzero(distances <= RATIONAL_TOL)
    ratios = distances / bounds
    margin = float(np.min(ratios, initial=np.inf))
    if exact.size:
        return ArithmeticCheck(False, tuple(int(v) for v in modes[exact[0]]), True, margin)
    bad = np.flatnonzero(distances < bounds)
    if bad.size:
        return ArithmeticCheck(False, tuple(int(v) for v in modes[bad[0]]), False, margin)
    return ArithmeticCheck(True, None, False, margin)


def diophantine_check(
    alpha: float | Sequence[float], params: DiophantineParams, radius: int
) -> ArithmeticCheck:
    """|<n,alpha>|_T >= gamma / |n|^tau for all 0 < |n|_1 <= radius."""
    a = as_frequency(alpha)
    params.require_dimension(a.size)
    modes = enumerate_modes(a.size, radius)
    distances = np.asarray(torus_distance(modes @ a))
    bounds = params.gamma / l1_norms(modes).astype(float) ** params.tau
    return _scan(distances, bounds, modes)


def dc_alpha_check(
    phi: float, alpha: float | Sequence[float], kappa: float, tau: float, radius: int
) -> ArithmeticCheck:
    """|2 phi - <m,alpha>|_T >= kappa / (1 + |m|)^tau for all |m|_1 <= radius, m = 0 included."""
    a = as_frequency(alpha)
    modes = enumerate_modes(a.size, radius, include_zero=True)
    distances = np.asarray(torus_distance(2.0 * phi - modes @ a))
    bounds = kappa / (1.0 + l1_norms(modes).astype(float)) ** tau
    return _scan(distances, bounds, modes)


def rational_label(
    phi: float, alpha: float | Sequence[float], radius: int, tol: float = RATIONAL_TOL
) -> tuple[int, ...] | None:
    """Smallest k with 2 phi = <k,alpha> mod 1 within `tol`, if any."""
    a = as_frequency(alpha)
    modes = enumerate_modes(a.size, radius, include_zero=True)
    hit = np.flatnonzero(np.asarray(torus_distance(2.0 * phi - modes @ a)) <= tol)
    if hit.size == 0:
        return None
    return tuple(int(v) for v in modes[hit[0]])
