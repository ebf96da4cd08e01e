from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from gevrey_kam.analysis.cocycle import Cocycle, degree, torus_grid
from gevrey_kam.analysis.fourier import FourierSeries, FrequencyLattice, GevreyParams
from gevrey_kam.analysis.grid import SampleGrid
from gevrey_kam.analysis.lie import canonical_norm, exp_real, from_su11, inv_sl2, to_su11, z_matrix
from gevrey_kam.errors import DimensionError

FactorKind = Literal["constant", "exp", "rotation", "series"]


@dataclass(frozen=True)
class Factor:
    """One factor of a conjugacy: a constant, e^{Y(theta)}, Z_n(theta) or a generic series."""

    kind: FactorKind
    matrix: np.ndarray | None = None
    series: FourierSeries | None = None
    mode: tuple[int, ...] | None = None

    def evaluate(self, theta: np.ndarray) -> np.ndarray:
        if self.kind == "constant":
            assert self.matrix is not None
            return np.broadcast_to(self.matrix, theta.shape[:-1] + (2, 2))
        if self.kind == "exp":
            assert self.series is not None
            return exp_real(self.series.evaluate(theta))
        if self.kind == "rotation":
            assert self.mode is not None
            return z_matrix(np.asarray(self.mode), theta)
        assert self.series is not None
        return np.real(self.series.evaluate(theta))

    @property
    def half_period(self) -> bool:
        if self.kind == "rotation":
            return True
        return self.series is not None and self.series.lattice.half_period

    @property
    def index_radius(self) -> int:
        """Index radius of the factor on the half lattice."""
        if self.kind == "rotation":
            assert self.mode is not None
            return int(np.sum(np.abs(self.mode)))
        if self.series is None:
            return 0
        scale = 1 if self.series.lattice.half_period else 2
        return scale * self.series.support_radius


@dataclass(frozen=True)
class Conjugacy:
    """Ordered product B = F_1 F_2 ... F_m evaluated exactly, factor by factor.

    Composition appends factors, so conjugating first by B and then by C is `B @ C`.
    """

    dimension: int
    factors: tuple[Factor, ...] = field(default_factory=tuple)

    @classmethod
    def identity(cls, dimension: int) -> Conjugacy:
        return cls(dimension)

    @classmethod
    def constant(cls, matrix: np.ndarray, dimension: int) -> Conjugacy:
        return cls(dimension, (Factor("constant", matrix=np.real(np.asarray(matrix))),))

    @classmethod
    def exp(cls, y: FourierSeries) -> Conjugacy:
        if y.is_zero():
            return cls(y.lattice.dimension)
        return cls(y.lattice.dimension, (Factor("exp", series=y),))

    @classmethod
    def rotation(cls, mode: Sequence[int]) -> Conjugacy:
        n = tuple(int(v) for v in mode)
        if not any(n):
            return cls(len(n))
        return cls(len(n), (Factor("rotation", mode=n),))

    @classmethod
    def series(cls, b: FourierSeries) -> Conjugacy:
        return cls(b.lattice.dimension, (Factor("series", series=b),))

    def __matmul__(self, other: Conjugacy) -> Conjugacy:
        if other.dimension != self.dimension:
            raise DimensionError("cannot compose conjugacies on tori of different dimension")
        return Conjugacy(self.dimension, self.factors + other.factors)

    @property
    def lattice(self) -> FrequencyLattice:
        return FrequencyLattice(self.dimension, any(f.half_period for f in self.factors))

    def is_identity(self) -> bool:
        return not self.factors

    def evaluate(self, theta: np.ndarray | Sequence[float]) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        out = np.broadcast_to(np.eye(2), theta.shape[:-1] + (2, 2)).copy()
        for factor in self.factors:
            out = out @ factor.evaluate(theta)
        return out

    @property
    def degree(self) -> tuple[int, ...]:
        total = np.zeros(self.dimension, dtype=np.int64)
        for factor in self.factors:
            if factor.kind == "rotation":
                assert factor.mode is not None
                total += np.asarray(factor.mode)
            elif factor.kind == "series":
                assert factor.series is not None
                total += np.asarray(degree(factor.series))
        return tuple(int(v) for v in total)

    def natural_radius(self, buffer: int = 8) -> int:
        return sum(f.index_radius for f in self.factors) + buffer

    def fit(self, radius: int | None = None) -> FourierSeries:
        """Fourier coefficients of B on its own lattice up to index radius `radius`."""
        lattice = self.lattice
        if radius is None:
            radius = self.natural_radius()
            if not lattice.half_period:
                radius = (radius + 1) // 2
        grid = SampleGrid.for_radius(lattice, radius)
        values = self.evaluate(grid.points)
        return grid.fit(values, radius, "matrix").prune(1e-300)

    def gevrey_norm(self, p: GevreyParams, radius: int | None = None) -> float:
        return self.fit(radius).gevrey_norm(p)

    def sup_norm(self, n: int = 64) -> float:
        theta = torus_grid(self.dimension, n, self.lattice.period)
        return float(np.max(canonical_norm(self.evaluate(theta))))

    def exp_deviation_bound(self, p: GevreyParams) -> float:
        """Bound on |B - Id|_p for a product of constants and exponentials.

        Uses |e^Y - Id| <= e^{|Y|} - 1 and the Banach-algebra property.
        """
        total = 1.0
        for factor in self.factors:
            if factor.kind == "exp":
                assert factor.series is not None
                total *= np.exp(factor.series.gevrey_norm(p))
            elif factor.kind == "constant":
                assert factor.matrix is not None
                total *= 1.0 + float(canonical_norm(factor.matrix - np.eye(2)))
            else:
                return float("inf")
        return float(total - 1.0)


def rotate_series(f: FourierSeries, mode: Sequence[int]) -> FourierSeries:
    """Series of theta -> Z_n(theta)^-1 f(theta) Z_n(theta) for an integer vector n.

    In su(1,1) coordinates the diagonal is fixed and the off-diagonal entries move by -n and
    +n, so the result stays on the lattice of `f`.
    """
    n = np.asarray(mode, dtype=np.int64)
    if f.is_zero() or not np.any(n):
        return f
    shift = n * (2 if f.lattice.half_period else 1)
    u = to_su11(np.asarray(f.coeffs))
    diag, upper, lower = (np.zeros_like(u) for _ in range(3))
    diag[:, 0, 0], diag[:, 1, 1] = u[:, 0, 0], u[:, 1, 1]
    upper[:, 0, 1] = u[:, 0, 1]
    lower[:, 1, 0] = u[:, 1, 0]
    parts = [(f.modes, diag), (f.modes - shift, upper), (f.modes + shift, lower)]
    modes = np.concatenate([m for m, _ in parts])
    coeffs = np.concatenate([from_su11(c) for _, c in parts])
    return FourierSeries(f.lattice, modes, coeffs, "matrix")


def conjugation_residual(
    alpha: np.ndarray,
    A: np.ndarray,
    f: FourierSeries,
    B: Conjugacy,
    A_plus: np.ndarray,
    f_plus: FourierSeries,
    n: int = 64,
    theta: np.ndarray | None = None,
) -> float:
    """max over a grid of ||B(theta+alpha)^-1 A e^{f} B(theta) - A_plus e^{f_plus}||."""
    before = Cocycle.factorized(alpha, A, f)
    after = Cocycle.factorized(alpha, A_plus, f_plus)
    if theta is None:
        theta = torus_grid(before.dimension, n, B.lattice.period)
    lhs = inv_sl2(B.evaluate(theta + before.alpha)) @ before.matrices(theta) @ B.evaluate(theta)
    return float(np.max(canonical_norm(lhs - after.matrices(theta))))
