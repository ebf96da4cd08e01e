from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Literal, Mapping, Sequence

import numpy as np

from gevrey_kam.errors import ConfigError, DimensionError, LatticeMismatchError

ValueKind = Literal["scalar-real", "scalar-complex", "matrix"]
IndexPredicate = Callable[[np.ndarray], np.ndarray]

MAX_DIMENSION = 3
TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class FrequencyLattice:
    """Z^d (period 1) or (1/2)Z^d (period 2); index k on the half lattice means frequency k/2."""

    dimension: int
    half_period: bool = False

    def __post_init__(self) -> None:
        if not 1 <= self.dimension <= MAX_DIMENSION:
            raise DimensionError(f"dimension must be in 1..{MAX_DIMENSION}, got {self.dimension}")

    @property
    def period(self) -> float:
        return 2.0 if self.half_period else 1.0

    def frequencies(self, modes: np.ndarray) -> np.ndarray:
        modes = np.asarray(modes, dtype=float)
        return modes / 2.0 if self.half_period else modes

    def index_of(self, frequency: Sequence[float]) -> np.ndarray:
        scaled = np.asarray(frequency, dtype=float) * (2.0 if self.half_period else 1.0)
        index = np.rint(scaled).astype(np.int64)
        if np.max(np.abs(scaled - index), initial=0.0) > 1e-12:
            raise LatticeMismatchError(f"frequency {list(frequency)} is not on this lattice")
        return index

    def halved(self) -> FrequencyLattice:
        return FrequencyLattice(self.dimension, True)


@dataclass(frozen=True)
class GevreyParams:
    nu: float
    r: float

    def __post_init__(self) -> None:
        if not 0.0 < self.nu < 1.0:
            raise ConfigError(f"Gevrey exponent nu must lie in (0, 1), got {self.nu}")
        if not self.r > 0.0:
            raise ConfigError(f"Gevrey width r must be positive, got {self.r}")

    def with_width(self, r: float) -> GevreyParams:
        return GevreyParams(self.nu, r)

    def weights(self, frequency_l1: np.ndarray) -> np.ndarray:
        return np.exp(self.r * (TWO_PI * np.asarray(frequency_l1, dtype=float)) ** self.nu)


def _value_shape(kind: ValueKind) -> tuple[int, ...]:
    return (2, 2) if kind == "matrix" else ()


def _merge(modes: np.ndarray, coeffs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if modes.shape[0] == 0:
        return modes.copy(), coeffs.copy()
    uniq, inverse = np.unique(modes, axis=0, return_inverse=True)
    merged = np.zeros((uniq.shape[0],) + coeffs.shape[1:], dtype=np.complex128)
    np.add.at(merged, inverse.reshape(-1), coeffs)
    flat = merged.reshape(merged.shape[0], -1)
    keep = np.any(flat != 0, axis=1)
    return uniq[keep], merged[keep]


def coefficient_norms(coeffs: np.ndarray, kind: ValueKind) -> np.ndarray:
    """|c| for scalars, the canonical norm 2*max|c_ij| for 2x2 matrices."""
    if kind == "matrix":
        return 2.0 * np.max(np.abs(coeffs).reshape(coeffs.shape[0], -1), axis=1, initial=0.0)
    return np.abs(coeffs)


class FourierSeries:
    """Immutable finitely supported Fourier series on T^d or 2T^d.

    Coefficients are stored densely over a sorted, duplicate-free list of integer modes.
    Scalar values are complex numbers, matrix values are 2x2 complex matrices.
    """

    __slots__ = ("lattice", "kind", "modes", "coeffs")

    lattice: FrequencyLattice
    kind: ValueKind
    modes: np.ndarray
    coeffs: np.ndarray

    def __init__(
        self,
        lattice: FrequencyLattice,
        modes: np.ndarray | Sequence[Sequence[int]],
        coeffs: np.ndarray | Sequence,
        kind: ValueKind = "scalar-complex",
    ) -> None:
        d = lattice.dimension
        modes_arr = np.asarray(modes, dtype=np.int64).reshape(-1, d)
        coeffs_arr = np.asarray(coeffs, dtype=np.complex128).reshape(
            (modes_arr.shape[0],) + _value_shape(kind)
        )
        modes_arr, coeffs_arr = _merge(modes_arr, coeffs_arr)
        modes_arr.setflags(write=False)
        coeffs_arr.setflags(write=False)
        object.__setattr__(self, "lattice", lattice)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "modes", modes_arr)
        object.__setattr__(self, "coeffs", coeffs_arr)

    def __setattr__(self, name: str, value: object) -> None:
        raise AttributeError("FourierSeries is immutable")

    # construction

    @classmethod
    def zero(cls, lattice: FrequencyLattice, kind: ValueKind = "scalar-complex") -> FourierSeries:
        empty = np.zeros((0,) + _value_shape(kind))
        return cls(lattice, np.zeros((0, lattice.dimension)), empty, kind)

    @classmethod
    def constant(
        cls, lattice: FrequencyLattice, value: complex | np.ndarray, kind: ValueKind | None = None
    ) -> FourierSeries:
        arr = np.asarray(value, dtype=np.complex128)
        if kind is None:
            if arr.shape == (2, 2):
                kind = "matrix"
            else:
                kind = "scalar-real" if arr.imag == 0 else "scalar-complex"
        return cls(lattice, np.zeros((1, lattice.dimension)), arr[None, ...], kind)

    @classmethod
    def from_mapping(
        cls, lattice: FrequencyLattice, coeffs: Mapping[tuple[int, ...], complex | np.ndarray],
        kind: ValueKind = "scalar-complex",
    ) -> FourierSeries:
        if not coeffs:
            return cls.zero(lattice, kind)
        keys = list(coeffs.keys())
        return cls(lattice, np.array(keys), np.array([coeffs[k] for k in keys]), kind)

    @classmethod
    def from_rows(
        cls, rows: Iterable[Sequence[float]], dimension: int, half_period: bool = False
    ) -> FourierSeries:
        """Scalar series from `[k_1, ..., k_d, re, im]` rows."""
        lattice = FrequencyLattice(dimension, half_period)
        rows = [list(row) for row in rows]
        for row in rows:
            if len(row) != dimension + 2:
                raise DimensionError(f"series row {row} does not have {dimension} + 2 entries")
        if not rows:
            return cls.zero(lattice, "scalar-real")
        arr = np.array(rows, dtype=float)
        series = cls(lattice, arr[:, :dimension], arr[:, dimension] + 1j * arr[:, dimension + 1])
        if series.conjugate_symmetry_defect() <= 1e-15 * max(1.0, series.max_coefficient()):
            return series.with_kind("scalar-real")
        return series

    @classmethod
    def cosine(
        cls, lattice: FrequencyLattice, mode: Sequence[int], amplitude: float
    ) -> FourierSeries:
        """amplitude * cos(2 pi <freq(mode), theta>)."""
        k = np.asarray(mode, dtype=np.int64)
        return cls(lattice, np.stack([k, -k]), [amplitude / 2.0, amplitude / 2.0], "scalar-real")

    # basic properties

    @property
    def value_shape(self) -> tuple[int, ...]:
        return _value_shape(self.kind)

    @property
    def size(self) -> int:
        return int(self.modes.shape[0])

    def is_zero(self) -> bool:
        return self.size == 0

    @property
    def support_radius(self) -> int:
        """Largest l1 norm of a stored index vector."""
        if self.size == 0:
            return 0
        return int(np.max(np.sum(np.abs(self.modes), axis=1)))

    @property
    def frequency_radius(self) -> float:
        return self.support_radius / (2.0 if self.lattice.half_period else 1.0)

    def frequency_l1(self) -> np.ndarray:
        return self.lattice.frequencies(np.abs(self.modes)).sum(axis=1)

    def coefficient_norms(self) -> np.ndarray:
        return coefficient_norms(self.coeffs, self.kind)

    def max_coefficient(self) -> float:
        return float(np.max(self.coefficient_norms(), initial=0.0))

    def coefficient(self, mode: Sequence[int]) -> complex | np.ndarray:
        k = np.asarray(mode, dtype=np.int64)
        hit = np.flatnonzero(np.all(self.modes == k, axis=1))
        if hit.size == 0:
            return np.zeros(self.value_shape, dtype=np.complex128) if self.kind == "matrix" else 0j
        return self.coeffs[hit[0]].copy() if self.kind == "matrix" else complex(self.coeffs[hit[0]])

    def average(self) -> complex | np.ndarray:
        return self.coefficient((0,) * self.lattice.dimension)

    def with_kind(self, kind: ValueKind) -> FourierSeries:
        if _value_shape(kind) != self.value_shape:
            raise LatticeMismatchError(f"cannot retag {self.kind} series as {kind}")
        return FourierSeries(self.lattice, self.modes, self.coeffs, kind)

    def to_rows(self) -> list[list[float]]:
        if self.kind == "matrix":
            raise LatticeMismatchError("row format is defined for scalar series only")
        return [
            [int(x) for x in k] + [float(c.real), float(c.imag)]
            for k, c in zip(self.modes, self.coeffs)
        ]

    # evaluation

    def evaluate(self, theta: np.ndarray | Sequence[float]) -> np.ndarray:
        theta_arr = np.asarray(theta, dtype=float)
        if theta_arr.shape[-1:] != (self.lattice.dimension,):
            raise DimensionError(
                f"theta has trailing dimension {theta_arr.shape[-1:]}, "
                f"expected {self.lattice.dimension}"
            )
        phases = np.exp(1j * TWO_PI * (theta_arr @ self.lattice.frequencies(self.modes).T))
        if self.kind == "matrix":
            values = np.einsum("...m,mij->...ij", phases, self.coeffs)
        else:
            values = phases @ self.coeffs
        if self.kind == "scalar-real":
            return np.real(values)
        return values

    # norms and operators

    def gevrey_norm(self, p: GevreyParams) -> float:
        if self.size == 0:
            return 0.0
        return float(np.sum(self.coefficient_norms() * p.weights(self.frequency_l1())))

    def truncate(self, n: float) -> FourierSeries:
        lattice = self.lattice
        return self.project(
            lambda modes: lattice.frequencies(np.abs(modes)).sum(axis=1) <= n + 1e-12
        )

    def project(self, predicate: IndexPredicate) -> FourierSeries:
        if self.size == 0:
            return self
        mask = np.asarray(predicate(self.modes), dtype=bool).reshape(-1)
        return FourierSeries(self.lattice, self.modes[mask], self.coeffs[mask], self.kind)

    def shift(self, alpha: np.ndarray | Sequence[float]) -> FourierSeries:
        """Series of theta -> f(theta + alpha)."""
        phases = np.exp(1j * TWO_PI * (self.lattice.frequencies(self.modes) @ np.asarray(alpha)))
        phases = phases.reshape((-1,) + (1,) * len(self.value_shape))
        return FourierSeries(self.lattice, self.modes, self.coeffs * phases, self.kind)

    def map_coefficients(
        self, fn: Callable[[np.ndarray], np.ndarray], kind: ValueKind | None = None
    ) -> FourierSeries:
        return FourierSeries(self.lattice, self.modes, fn(np.array(self.coeffs)), kind or self.kind)

    def conjugate_symmetry_defect(self) -> float:
        """max |c(k) - conj(c(-k))|, zero for real-valued series."""
        if self.size == 0:
            return 0.0
        reflected = FourierSeries(self.lattice, -self.modes, np.conj(self.coeffs), self.kind)
        diff = self - reflected
        return float(np.max(np.abs(diff.coeffs), initial=0.0))

    def symmetrize(self) -> FourierSeries:
        """Closest real-valued series: (c(k) + conj(c(-k))) / 2."""
        if self.size == 0:
            return self
        reflected = FourierSeries(self.lattice, -self.modes, np.conj(self.coeffs), self.kind)
        out = (self + reflected) * 0.5
        if self.kind == "scalar-complex":
            return out.with_kind("scalar-real")
        return out

    def prune(self, floor: float) -> FourierSeries:
        if self.size == 0:
            return self
        keep = self.coefficient_norms() > floor
        return FourierSeries(self.lattice, self.modes[keep], self.coeffs[keep], self.kind)

    def to_half_period(self) -> FourierSeries:
        if self.lattice.half_period:
            return self
        return FourierSeries(self.lattice.halved(), 2 * self.modes, self.coeffs, self.kind)

    def max_difference(self, other: FourierSeries) -> float:
        return (self - other).max_coefficient()

    # arithmetic

    def _check_lattice(self, other: FourierSeries) -> None:
        if self.lattice != other.lattice:
            raise LatticeMismatchError(f"{self.lattice} vs {other.lattice}")

    def _sum_kind(self, other: FourierSeries) -> ValueKind:
        if self.value_shape != other.value_shape:
            raise LatticeMismatchError(f"cannot add {self.kind} and {other.kind} series")
        if self.kind == other.kind:
            return self.kind
        return "scalar-complex"

    def __add__(self, other: FourierSeries) -> FourierSeries:
        self._check_lattice(other)
        kind = self._sum_kind(other)
        return FourierSeries(
            self.lattice,
            np.concatenate([self.modes, other.modes]),
            np.concatenate([self.coeffs, other.coeffs]),
            kind,
        )

    def __neg__(self) -> FourierSeries:
        return FourierSeries(self.lattice, self.modes, -self.coeffs, self.kind)

    def __sub__(self, other: FourierSeries) -> FourierSeries:
        return self + (-other)

    def __mul__(self, scalar: complex) -> FourierSeries:
        kind = self.kind
        if kind == "scalar-real" and np.imag(scalar) != 0:
            kind = "scalar-complex"
        return FourierSeries(self.lattice, self.modes, self.coeffs * scalar, kind)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return (
            f"FourierSeries(kind={self.kind}, d={self.lattice.dimension}, "
            f"half_period={self.lattice.half_period}, modes={self.size}, "
            f"radius={self.support_radius})"
        )


def gevrey_norm(f: FourierSeries, p: GevreyParams) -> float:
    return f.gevrey_norm(p)


def truncate(f: FourierSeries, n: float) -> FourierSeries:
    return f.truncate(n)


def project(f: FourierSeries, predicate: IndexPredicate) -> FourierSeries:
    return f.project(predicate)


def evaluate(f: FourierSeries, theta: np.ndarray | Sequence[float]) -> np.ndarray:
    return f.evaluate(theta)


def series_product(f: FourierSeries, g: FourierSeries) -> FourierSeries:
    """Coefficient convolution; matrix-valued factors multiply as matrices (f on the left)."""
    f._check_lattice(g)
    if f.kind == "matrix" or g.kind == "matrix":
        kind: ValueKind = "matrix"
    elif f.kind == "scalar-real" and g.kind == "scalar-real":
        kind = "scalar-real"
    else:
        kind = "scalar-complex"
    if f.size == 0 or g.size == 0:
        return FourierSeries.zero(f.lattice, kind)
    modes = (f.modes[:, None, :] + g.modes[None, :, :]).reshape(-1, f.lattice.dimension)
    if f.kind == "matrix" and g.kind == "matrix":
        coeffs = np.einsum("aij,bjk->abik", f.coeffs, g.coeffs).reshape(-1, 2, 2)
    elif f.kind == "matrix":
        coeffs = (f.coeffs[:, None, :, :] * g.coeffs[None, :, None, None]).reshape(-1, 2, 2)
    elif g.kind == "matrix":
        coeffs = (f.coeffs[:, None, None, None] * g.coeffs[None, :, :, :]).reshape(-1, 2, 2)
    else:
        coeffs = np.outer(f.coeffs, g.coeffs).reshape(-1)
    return FourierSeries(f.lattice, modes, coeffs, kind)


def l1_norms(modes: np.ndarray) -> np.ndarray:
    return np.sum(np.abs(np.asarray(modes)), axis=-1)


def lattice_ball(dimension: int, radius: int) -> np.ndarray:
    """All integer vectors with |k|_1 <= radius, lexicographically sorted."""
    axis = np.arange(-radius, radius + 1)
    grids = np.meshgrid(*([axis] * dimension), indexing="ij")
    pts = np.stack([g.reshape(-1) for g in grids], axis=1)
    return pts[l1_norms(pts) <= radius]
