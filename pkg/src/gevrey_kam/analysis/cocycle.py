from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Literal, Protocol, Sequence

import numpy as np

from gevrey_kam.analysis.arithmetic import as_frequency, torus_distance
from gevrey_kam.analysis.fourier import TWO_PI, FourierSeries, FrequencyLattice
from gevrey_kam.analysis.lie import exp_mat, inv_sl2
from gevrey_kam.config import RotationControls, UHControls
from gevrey_kam.errors import DegenerateColumnError, DimensionError, NonHomotopicError

log = logging.getLogger(__name__)

UHVerdict = Literal["UH", "not-UH", "undecided"]
Window = Literal["weighted", "flat"]

RENORM_EVERY = 32


class MatrixField(Protocol):
    """Anything that evaluates to 2x2 matrices on T^d or 2T^d."""

    @property
    def lattice(self) -> FrequencyLattice: ...

    def evaluate(self, theta: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class FactorizedField:
    """theta -> A0 exp(f(theta))."""

    A0: np.ndarray
    f: FourierSeries

    @property
    def lattice(self) -> FrequencyLattice:
        return self.f.lattice

    def evaluate(self, theta: np.ndarray) -> np.ndarray:
        return self.A0 @ exp_mat(self.f.evaluate(theta))


@dataclass(frozen=True)
class ConjugatedField:
    """theta -> B(theta + alpha)^-1 A(theta) B(theta)."""

    A: MatrixField
    B: MatrixField
    alpha: np.ndarray

    @property
    def lattice(self) -> FrequencyLattice:
        return self.B.lattice if self.B.lattice.half_period else self.A.lattice

    def evaluate(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        b_next = inv_sl2(self.B.evaluate(theta + self.alpha))
        return b_next @ self.A.evaluate(theta) @ self.B.evaluate(theta)


@dataclass(frozen=True)
class Cocycle:
    """Quasi-periodic cocycle (alpha, A); A0 and f are kept when A = A0 exp(f)."""

    alpha: np.ndarray
    A: MatrixField
    A0: np.ndarray | None = None
    f: FourierSeries | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "alpha", as_frequency(self.alpha))
        if self.A.lattice.dimension != self.alpha.size:
            raise DimensionError(
                f"frequency has {self.alpha.size} components, field lives on "
                f"T^{self.A.lattice.dimension}"
            )

    @classmethod
    def constant(cls, alpha: float | Sequence[float], A0: np.ndarray) -> Cocycle:
        freq = as_frequency(alpha)
        lattice = FrequencyLattice(freq.size)
        A0 = np.asarray(A0, dtype=float)
        series = FourierSeries.constant(lattice, A0, "matrix")
        return cls(freq, series, A0, FourierSeries.zero(lattice, "matrix"))

    @classmethod
    def factorized(
        cls, alpha: float | Sequence[float], A0: np.ndarray, f: FourierSeries
    ) -> Cocycle:
        A0 = np.asarray(A0, dtype=float)
        return cls(as_frequency(alpha), FactorizedField(A0, f), A0, f)

    @property
    def dimension(self) -> int:
        return int(self.alpha.size)

    @property
    def lattice(self) -> FrequencyLattice:
        return self.A.lattice

    def matrices(self, theta: np.ndarray) -> np.ndarray:
        return np.real(self.A.evaluate(np.asarray(theta, dtype=float)))

    def conjugate(self, B: MatrixField) -> Cocycle:
        return Cocycle(self.alpha, ConjugatedField(self.A, B, self.alpha))

    def unimodularity_defect(self, n: int = 64) -> float:
        theta = torus_grid(self.dimension, n, self.lattice.period)
        return float(np.max(np.abs(np.linalg.det(self.matrices(theta)) - 1.0)))


@dataclass(frozen=True)
class LyapunovEstimate:
    value: float
    stderr: float
    n_iter: int
    n_samples: int


@dataclass(frozen=True)
class RotationEstimate:
    value: float
    error: float
    n_iter: int
    window: Window


@dataclass(frozen=True)
class UHReport:
    verdict: UHVerdict
    min_growth: float
    min_angle: float
    n_win: int


@dataclass(frozen=True)
class DegreeShiftReport:
    rho: float
    rho_conjugated: float
    degree: tuple[int, ...]
    discrepancy: float


def torus_grid(dimension: int, n: int, period: float = 1.0) -> np.ndarray:
    """Tensor grid with about n points on [0, period)^d."""
    m = max(1, int(np.ceil(n ** (1.0 / dimension))))
    axis = period * np.arange(m) / m
    mesh = np.meshgrid(*([axis] * dimension), indexing="ij")
    return np.stack([g.reshape(-1) for g in mesh], axis=1)


def sample_points(dimension: int, n: int, seed: int = 0, period: float = 1.0) -> np.ndarray:
    return period * np.random.default_rng(seed).random((n, dimension))


def wrap_angle(x: np.ndarray) -> np.ndarray:
    return (x + np.pi) % TWO_PI - np.pi


def polar_angle(m: np.ndarray) -> np.ndarray:
    """Angle of the rotation factor of M in clockwise R_phi units times 2 pi."""
    return np.arctan2(m[..., 0, 1] - m[..., 1, 0], m[..., 0, 0] + m[..., 1, 1])


def birkhoff_weights(n: int, window: Window = "weighted") -> np.ndarray:
    if window == "flat":
        return np.ones(n)
    t = (np.arange(n) + 0.5) / n
    return np.exp(-1.0 / (t * (1.0 - t)))


# iteration


def iterate(c: Cocycle, theta: np.ndarray | Sequence[float], n: int) -> np.ndarray:
    """A_n(theta); negative n multiplies adjugate inverses backwards along the orbit."""
    theta = np.asarray(theta, dtype=float)
    out = np.broadcast_to(np.eye(2), theta.shape[:-1] + (2, 2)).copy()
    if n >= 0:
        for j in range(n):
            out = c.matrices(theta + j * c.alpha) @ out
    else:
        for j in range(1, -n + 1):
            out = inv_sl2(c.matrices(theta - j * c.alpha)) @ out
    return out


def renormalized_product(
    c: Cocycle, theta: np.ndarray, n: int
) -> tuple[np.ndarray, np.ndarray]:
    """(A_n(theta) / ||A_n(theta)||, log ||A_n(theta)||), rescaling every 32 steps."""
    theta = np.asarray(theta, dtype=float)
    mats = np.broadcast_to(np.eye(2), theta.shape[:-1] + (2, 2)).copy()
    logs = np.zeros(theta.shape[:-1])
    for j in range(n):
        mats = c.matrices(theta + j * c.alpha) @ mats
        if (j + 1) % RENORM_EVERY == 0 or j == n - 1:
            scale = np.linalg.norm(mats, ord=2, axis=(-2, -1))
            logs += np.log(scale)
            mats = mats / scale[..., None, None]
    return mats, logs


def lyapunov_exponent(
    c: Cocycle, n_iter: int, n_samples: int = 16, seed: int = 0
) -> LyapunovEstimate:
    if n_iter < 1:
        raise ValueError("n_iter must be at least 1")
    theta = sample_points(c.dimension, n_samples, seed, c.lattice.period)
    _, logs = renormalized_product(c, theta, n_iter)
    per_sample = logs / n_iter
    stderr = float(np.std(per_sample, ddof=1) / np.sqrt(n_samples)) if n_samples > 1 else 0.0
    return LyapunovEstimate(float(np.mean(per_sample)), stderr, n_iter, n_samples)


# rotation number


def rotation_average(
    step: Callable[[int], np.ndarray],
    batch: int,
    n_iter: int,
    window: Window = "weighted",
    omega_ref: np.ndarray | float | None = None,
) -> np.ndarray:
    """Averaged clockwise angle increment (in turns) of the projective action.

    `step(k)` returns the batch of matrices applied at time k. Each increment is lifted
    next to the polar angle of its matrix, which is itself taken on the branch closest to
    `omega_ref` when one is given.
    """
    w = birkhoff_weights(n_iter, window)
    x = np.zeros((batch, 2))
    x[:, 0] = 1.0
    acc = np.zeros(batch)
    for k in range(n_iter):
        m = step(k)
        y = np.einsum("bij,bj->bi", m, x)
        omega = polar_angle(m)
        if omega_ref is not None:
            omega = omega_ref + wrap_angle(omega - omega_ref)
        turn = np.arctan2(x[:, 1], x[:, 0]) - np.arctan2(y[:, 1], y[:, 0])
        acc += w[k] * (omega + wrap_angle(turn - omega))
        x = y / np.linalg.norm(y, axis=1, keepdims=True)
    return acc / (TWO_PI * w.sum())


def rotation_number(
    c: Cocycle,
    controls: RotationControls | None = None,
    seed: int = 0,
    check_homotopy: bool = True,
) -> RotationEstimate:
    """Fibered rotation number mod 1, clockwise, so that rho(alpha, R_phi) = phi."""
    controls = controls or RotationControls()
    if check_homotopy:
        deg = degree(c.A)
        if any(deg):
            raise NonHomotopicError(deg)
    period = c.lattice.period
    ref = polar_angle(np.mean(c.matrices(torus_grid(c.dimension, 64, period)), axis=0))
    theta0 = sample_points(c.dimension, controls.n_samples, seed, period)
    lifts = rotation_average(
        lambda k: c.matrices(theta0 + k * c.alpha),
        controls.n_samples,
        controls.n_iter,
        controls.window,
        float(ref),
    )
    bias = 1.0 / controls.n_iter if controls.window == "flat" else 1.0 / controls.n_iter**2
    return RotationEstimate(
        float(np.mean(lifts) % 1.0), float(np.ptp(lifts)) + bias, controls.n_iter, controls.window
    )


def degree_shift_check(
    c: Cocycle, B: MatrixField, controls: RotationControls | None = None, seed: int = 0
) -> DegreeShiftReport:
    """Compare rho(alpha, B(.+alpha)^-1 A B) against rho(alpha, A) - <deg B, alpha>/2."""
    deg = degree(B)
    rho = rotation_number(c, controls, seed).value
    rho_conj = rotation_number(c.conjugate(B), controls, seed).value
    expected = rho - float(np.dot(deg, c.alpha)) / 2.0
    return DegreeShiftReport(rho, rho_conj, deg, float(torus_distance(rho_conj - expected)))


# topology and hyperbolicity


def degree(B: MatrixField, grid: int = 64, max_grid: int = 8192) -> tuple[int, ...]:
    """Winding of the first column along each coordinate loop, in units of Z_n loops."""
    lattice = B.lattice
    d, period = lattice.dimension, lattice.period
    out = []
    for axis in range(d):
        n = grid
        while True:
            theta = np.zeros((n + 1, d))
            theta[:, axis] = np.linspace(0.0, period, n + 1)
            col = np.real(B.evaluate(theta))[:, :, 0]
            if np.min(np.hypot(col[:, 0], col[:, 1])) < 1e-12:
                raise DegenerateColumnError(f"first column vanishes along axis {axis}")
            jumps = wrap_angle(np.diff(-np.arctan2(col[:, 1], col[:, 0])))
            if np.max(np.abs(jumps)) <= np.pi / 2:
                break
            if n >= max_grid:
                raise DegenerateColumnError(f"winding along axis {axis} not resolved at {n} points")
            n *= 2
        turns = float(np.sum(jumps)) / TWO_PI
        out.append(int(round(turns * 2.0 / period)))
    return tuple(out)


def is_uniformly_hyperbolic(c: Cocycle, controls: UHControls | None = None) -> UHReport:
    """Finite-window cone test on a theta grid.

    UH needs uniform growth above `growth` and an unstable/stable angle of at least `cone`
    at every grid point; growth below the threshold anywhere gives not-UH.
    """
    controls = controls or UHControls()
    n = controls.n_win
    theta = torus_grid(c.dimension, controls.grid, c.lattice.period)
    fwd, logs_fwd = renormalized_product(c, theta, n)
    back, logs_back = renormalized_product(c, theta - n * c.alpha, n)
    min_growth = float(np.min(np.minimum(logs_fwd, logs_back))) / n
    if min_growth < controls.growth:
        return UHReport("not-UH", min_growth, 0.0, n)
    u = np.linalg.svd(back)[0][..., :, 0]
    s = np.linalg.svd(fwd)[2][..., 1, :]
    cos = np.clip(np.abs(np.sum(u * s, axis=-1)), 0.0, 1.0)
    min_angle = float(np.min(np.arccos(cos)))
    verdict: UHVerdict = "UH" if min_angle >= controls.cone else "undecided"
    return UHReport(verdict, min_growth, min_angle, n)
