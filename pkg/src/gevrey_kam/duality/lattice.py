from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np
import pandas as pd

from gevrey_kam.analysis.arithmetic import as_frequency
from gevrey_kam.analysis.fourier import TWO_PI, FourierSeries
from gevrey_kam.errors import ConfigError, DimensionError, WindowOverflowError

log = logging.getLogger(__name__)

MAX_SITES = 2_000_000
SYMMETRY_TOL = 1e-14


def box_sites(dimension: int, window: int) -> np.ndarray:
    """All n with |n|_inf <= window, in the C order of a (2W+1)^d array."""
    side = 2 * window + 1
    return np.indices((side,) * dimension).reshape(dimension, -1).T - window


def _check_sites(dimension: int, window: int, cap: int) -> None:
    sites = (2 * window + 1) ** dimension
    if sites > cap:
        raise WindowOverflowError(
            f"window {window} on Z^{dimension} needs {sites} sites, cap is {cap}"
        )


@dataclass(frozen=True, eq=False)
class LatticeVector:
    """Finitely supported u on Z^d; entries outside |n|_inf <= window are zero."""

    entries: np.ndarray
    window: int

    def __post_init__(self) -> None:
        arr = np.asarray(self.entries, dtype=np.complex128)
        side = 2 * self.window + 1
        if self.window < 0 or arr.ndim < 1 or any(s != side for s in arr.shape):
            raise DimensionError(f"entries of shape {arr.shape} do not fill a window {self.window}")
        object.__setattr__(self, "entries", arr)

    @classmethod
    def zeros(cls, dimension: int, window: int) -> LatticeVector:
        return cls(np.zeros((2 * window + 1,) * dimension, dtype=np.complex128), window)

    @classmethod
    def delta(
        cls, dimension: int, window: int = 0, site: Sequence[int] | None = None
    ) -> LatticeVector:
        site = tuple(site) if site is not None else (0,) * dimension
        window = max(window, max((abs(s) for s in site), default=0))
        u = cls.zeros(dimension, window)
        u.entries[tuple(s + window for s in site)] = 1.0
        return u

    @classmethod
    def from_sites(
        cls,
        sites: np.ndarray,
        values: np.ndarray,
        window: int | None = None,
        cap: int = MAX_SITES,
    ) -> LatticeVector:
        sites = np.asarray(sites, dtype=np.int64)
        reach = int(np.max(np.abs(sites), initial=0))
        window = reach if window is None else window
        if reach > window:
            raise ConfigError(f"site with |n|_inf = {reach} lies outside window {window}")
        _check_sites(sites.shape[1], window, cap)
        u = cls.zeros(sites.shape[1], window)
        np.add.at(u.entries, tuple((sites + window).T), np.asarray(values, dtype=np.complex128))
        return u

    @property
    def dimension(self) -> int:
        return int(self.entries.ndim)

    def sites(self) -> np.ndarray:
        return box_sites(self.dimension, self.window)

    def values(self) -> np.ndarray:
        return self.entries.reshape(-1)

    def at(self, site: Sequence[int]) -> complex:
        idx = tuple(int(s) + self.window for s in site)
        if any(not 0 <= i <= 2 * self.window for i in idx):
            return 0j
        return complex(self.entries[idx])

    def norm(self) -> float:
        return float(np.linalg.norm(self.values()))

    def normalized(self) -> LatticeVector:
        n = self.norm()
        if n == 0.0:
            raise ConfigError("cannot normalize the zero vector")
        return LatticeVector(self.entries / n, self.window)

    def padded(self, window: int) -> LatticeVector:
        if window < self.window:
            raise ConfigError(f"cannot shrink window {self.window} to {window}")
        pad = window - self.window
        return LatticeVector(np.pad(self.entries, pad), window)

    def shifted(self, m: Sequence[int]) -> LatticeVector:
        """(T u)(n) = u(n - m)."""
        m = np.asarray(m, dtype=np.int64)
        out = self.padded(self.window + int(np.max(np.abs(m), initial=0)))
        axes = tuple(range(self.dimension))
        return LatticeVector(np.roll(out.entries, tuple(int(x) for x in m), axis=axes), out.window)

    def inner(self, other: LatticeVector) -> complex:
        """<u, w> = sum u(n) conj(w(n))."""
        w = max(self.window, other.window)
        return complex(np.vdot(other.padded(w).values(), self.padded(w).values()))

    def __sub__(self, other: LatticeVector) -> LatticeVector:
        w = max(self.window, other.window)
        return LatticeVector(self.padded(w).entries - other.padded(w).entries, w)

    def __mul__(self, scalar: complex) -> LatticeVector:
        return LatticeVector(self.entries * scalar, self.window)

    __rmul__ = __mul__

    def distance(self, other: LatticeVector) -> float:
        return (self - other).norm()

    def shell_max(self) -> float:
        """max |u(n)| over the boundary |n|_inf = window."""
        sites = self.sites()
        shell = np.max(np.abs(sites), axis=1) == self.window
        return float(np.max(np.abs(self.values()[shell]), initial=0.0))

    def with_unit_phase(self) -> LatticeVector:
        """Rotate by a unimodular constant so the largest entry is real and positive."""
        vals = self.values()
        if vals.size == 0 or not np.any(vals):
            return self
        big = vals[int(np.argmax(np.abs(vals)))]
        return self * (np.conj(big) / abs(big))

    def to_frame(self, floor: float = 0.0) -> pd.DataFrame:
        """Rows `n_1..n_d, re, im` for |u(n)| > floor."""
        vals = self.values()
        keep = np.abs(vals) > floor
        sites = self.sites()[keep]
        frame = pd.DataFrame(sites, columns=[f"n{i + 1}" for i in range(self.dimension)])
        frame["re"] = vals[keep].real
        frame["im"] = vals[keep].imag
        return frame


@dataclass(frozen=True)
class LongRangeOperator:
    """(L u)_n = sum_k v_hat(n - k) u_k + 2 lam cos 2 pi (phi + <n, alpha>) u_n."""

    v_hat: FourierSeries
    lam: float
    alpha: np.ndarray
    phi: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "alpha", as_frequency(self.alpha))
        object.__setattr__(self, "phi", float(self.phi) % 1.0)
        if self.v_hat.kind == "matrix" or self.v_hat.lattice.half_period:
            raise DimensionError("v_hat must be a scalar series on T^d")
        if self.v_hat.lattice.dimension != self.alpha.size:
            raise DimensionError(
                f"v_hat lives on T^{self.v_hat.lattice.dimension}, "
                f"frequency has {self.alpha.size} components"
            )
        if not self.lam > 0.0:
            raise ConfigError(f"coupling must be positive, got {self.lam}")
        defect = self.v_hat.conjugate_symmetry_defect()
        if defect > SYMMETRY_TOL * max(1.0, self.v_hat.max_coefficient()):
            raise ConfigError(f"v_hat is not conjugate-symmetric (defect {defect:.3e})")

    @property
    def dimension(self) -> int:
        return int(self.alpha.size)

    @property
    def hop_radius(self) -> int:
        if self.v_hat.is_zero():
            return 0
        return int(np.max(np.abs(self.v_hat.modes)))

    def at_phase(self, phi: float) -> LongRangeOperator:
        return LongRangeOperator(self.v_hat, self.lam, self.alpha, phi)

    def diagonal(self, sites: np.ndarray) -> np.ndarray:
        return 2.0 * self.lam * np.cos(TWO_PI * (self.phi + sites @ self.alpha))


def long_range_apply(L: LongRangeOperator, u: LatticeVector, cap: int = MAX_SITES) -> LatticeVector:
    """Exact L u on the window grown by the hop radius of v_hat."""
    if u.dimension != L.dimension:
        raise DimensionError(f"vector on Z^{u.dimension}, operator on Z^{L.dimension}")
    window = u.window + L.hop_radius
    _check_sites(L.dimension, window, cap)
    src = u.padded(window)
    axes = tuple(range(L.dimension))
    out = L.diagonal(src.sites()).reshape(src.entries.shape) * src.entries
    # nonzero entries sit at least hop_radius inside the box, so rolls never wrap them
    for k, c in zip(L.v_hat.modes, L.v_hat.coeffs):
        out = out + c * np.roll(src.entries, tuple(int(x) for x in k), axis=axes)
    return LatticeVector(out, window)


def phase_covariance_defect(L: LongRangeOperator, u: LatticeVector, m: Sequence[int]) -> float:
    """|| L_{phi+<m,alpha>} S u - S L_phi u || with (S u)(n) = u(n + m)."""
    back = [-int(x) for x in m]
    moved = L.at_phase(L.phi + float(np.dot(m, L.alpha)))
    lhs = long_range_apply(moved, u.shifted(back))
    rhs = long_range_apply(L, u).shifted(back)
    return lhs.distance(rhs)


@dataclass(frozen=True)
class GoodnessReport:
    good: bool
    worst_ratio: float
    witness: tuple[int, ...] | None
    checked: int
    nu: float
    N: int
    C: float
    eps: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "good": self.good,
            "worst_ratio": self.worst_ratio,
            "witness": list(self.witness) if self.witness is not None else None,
            "checked_sites": self.checked,
            "nu": self.nu,
            "N": self.N,
            "C": self.C,
            "eps": self.eps,
        }


def good_eigenfunction_test(
    u: LatticeVector, nu: float, N: int, C: float, eps: float
) -> GoodnessReport:
    """|u(n)| <= e^{-C eps |n|^nu} for every stored site with |n|_1 >= (1 - eps) N."""
    sites = u.sites()
    size = np.sum(np.abs(sites), axis=1).astype(float)
    tail = size >= (1.0 - eps) * N
    vals = np.abs(u.values()[tail])
    ratios = vals * np.exp(C * eps * size[tail] ** nu)
    if ratios.size == 0:
        return GoodnessReport(True, 0.0, None, 0, nu, N, C, eps)
    worst = int(np.argmax(ratios))
    witness = tuple(int(x) for x in sites[tail][worst])
    ratio = float(ratios[worst])
    return GoodnessReport(ratio <= 1.0, ratio, witness, int(ratios.size), nu, N, C, eps)
