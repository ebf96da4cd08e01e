from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from gevrey_kam.analysis.fourier import (
    TWO_PI,
    FourierSeries,
    FrequencyLattice,
    ValueKind,
    l1_norms,
    lattice_ball,
)
from gevrey_kam.errors import DimensionError, LatticeMismatchError

_AXES = "abc"


@dataclass(frozen=True)
class SampleGrid:
    """Uniform tensor grid on T^d (period 1) or 2T^d (period 2).

    `values` samples a series on the grid and `fit` recovers the coefficients of grid data
    by a direct separable DFT, so pointwise nonlinear matrix work can be pulled back into
    coefficient space.
    """

    lattice: FrequencyLattice
    size: int

    def __post_init__(self) -> None:
        if self.size < 2:
            raise DimensionError(f"grid needs at least 2 points per axis, got {self.size}")

    @classmethod
    def for_radius(cls, lattice: FrequencyLattice, radius: int, minimum: int = 16) -> SampleGrid:
        """Smallest even grid resolving index radius `radius` without aliasing."""
        size = max(minimum, 2 * int(radius) + 2)
        return cls(lattice, size + (size % 2))

    @property
    def dimension(self) -> int:
        return self.lattice.dimension

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.size,) * self.dimension

    @property
    def count(self) -> int:
        return self.size**self.dimension

    @cached_property
    def points(self) -> np.ndarray:
        axis = self.lattice.period * np.arange(self.size) / self.size
        mesh = np.meshgrid(*([axis] * self.dimension), indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def values(self, f: FourierSeries) -> np.ndarray:
        """Evaluate `f` at every grid point, shape (count,) + value shape."""
        if f.lattice.dimension != self.dimension:
            raise DimensionError("series and grid dimensions differ")
        if f.lattice.half_period and not self.lattice.half_period:
            raise LatticeMismatchError("cannot sample a 2T^d series on a T^d grid")
        vshape = f.value_shape
        if f.size == 0:
            return np.zeros((self.count,) + vshape, dtype=np.complex128)
        j = np.arange(self.size)
        step = self.lattice.period / self.size
        freqs = f.lattice.frequencies(f.modes)
        factors = [
            np.exp(1j * TWO_PI * np.outer(freqs[:, a], j) * step) for a in range(self.dimension)
        ]
        axes = _AXES[: self.dimension]
        value_idx = "xy" if f.kind == "matrix" else ""
        spec = "m" + value_idx + "," + ",".join("m" + ax for ax in axes) + "->" + axes + value_idx
        out = np.einsum(spec, f.coeffs, *factors)
        out = out.reshape((self.count,) + vshape)
        if f.kind == "scalar-real":
            return out.real
        return out

    def fit(self, values: np.ndarray, radius: int, kind: ValueKind = "matrix") -> FourierSeries:
        """Coefficients |k|_1 <= radius of grid data (index units of this grid's lattice)."""
        if 2 * radius + 1 > self.size:
            raise DimensionError(f"grid of size {self.size} cannot resolve radius {radius}")
        vshape = (2, 2) if kind == "matrix" else ()
        data = np.asarray(values, dtype=np.complex128).reshape(self.shape + vshape)
        ks = np.arange(-radius, radius + 1)
        kernel = np.exp(-1j * TWO_PI * np.outer(ks, np.arange(self.size)) / self.size) / self.size
        for a in range(self.dimension):
            data = np.moveaxis(np.tensordot(kernel, data, axes=([1], [a])), 0, a)
        ball = lattice_ball(self.dimension, radius)
        coeffs = data[tuple((ball + radius).T)]
        keep = l1_norms(ball) <= radius
        return FourierSeries(self.lattice, ball[keep], coeffs[keep], kind)

    def sup_norm(self, f: FourierSeries) -> float:
        vals = self.values(f)
        if f.kind == "matrix":
            return float(2.0 * np.max(np.abs(vals), initial=0.0))
        return float(np.max(np.abs(vals), initial=0.0))
