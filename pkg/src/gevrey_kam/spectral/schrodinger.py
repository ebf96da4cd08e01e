from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from joblib import Parallel, delayed
from scipy.linalg import eigvalsh_tridiagonal

from gevrey_kam.analysis.arithmetic import as_frequency
from gevrey_kam.analysis.cocycle import (
    Cocycle,
    RotationEstimate,
    rotation_average,
    sample_points,
    torus_grid,
)
from gevrey_kam.analysis.fourier import FourierSeries, FrequencyLattice, GevreyParams
from gevrey_kam.analysis.grid import SampleGrid
from gevrey_kam.analysis.lie import N_LOWER, canonical_norm, exp_real, log_real
from gevrey_kam.config import ProblemSpec, RotationControls
from gevrey_kam.errors import ConfigError, DimensionError, FitResidualError, check_contract

log = logging.getLogger(__name__)

FACTOR_TOL = 1e-10
FIT_BUFFER = 4
MAX_SECTION = 4096
MONOTONE_SLACK = 1e-9


@dataclass(frozen=True)
class SchrodingerProblem:
    """(H u)_n = u_{n+1} + u_{n-1} + v(theta + n alpha) u_n with v real."""

    v: FourierSeries
    alpha: np.ndarray
    p: GevreyParams
    lam: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "alpha", as_frequency(self.alpha))
        if self.v.kind == "matrix":
            raise DimensionError("the potential must be scalar-valued")
        if self.v.lattice.dimension != self.alpha.size:
            raise DimensionError(
                f"potential lives on T^{self.v.lattice.dimension}, "
                f"frequency has {self.alpha.size} components"
            )
        if self.v.conjugate_symmetry_defect() > 1e-14 * max(1.0, self.v.max_coefficient()):
            raise ConfigError("the potential must be real-valued")

    @classmethod
    def amo(cls, lam: float, alpha: float | Sequence[float], p: GevreyParams) -> SchrodingerProblem:
        """v = 2 lam cos(2 pi theta_1)."""
        a = as_frequency(alpha)
        mode = [1] + [0] * (a.size - 1)
        v = FourierSeries.cosine(FrequencyLattice(a.size), mode, 2.0 * lam)
        return cls(v, a, p, lam)

    @classmethod
    def from_spec(cls, spec: ProblemSpec, p: GevreyParams) -> SchrodingerProblem:
        return cls(spec.series().symmetrize(), np.asarray(spec.alpha), p)

    @property
    def dimension(self) -> int:
        return int(self.alpha.size)

    @property
    def eps0(self) -> float:
        """|v|_{r0}."""
        return self.v.gevrey_norm(self.p)

    def v_bound(self) -> float:
        """sup |v| <= sum |v_k|."""
        return float(np.sum(np.abs(self.v.coeffs)))

    def energy_range(self, margin: float = 0.1) -> tuple[float, float]:
        bound = self.v_bound()
        return -2.0 - bound - margin, 2.0 + bound + margin

    def potential(self, theta: np.ndarray) -> np.ndarray:
        return np.real(self.v.evaluate(theta))

    def matrices(self, energy: float, theta: np.ndarray) -> np.ndarray:
        vals = self.potential(np.asarray(theta, dtype=float))
        out = np.zeros(vals.shape + (2, 2))
        out[..., 0, 0] = energy - vals
        out[..., 0, 1] = -1.0
        out[..., 1, 0] = 1.0
        return out


def free_matrix(energy: float) -> np.ndarray:
    """A_E = (E, -1; 1, 0)."""
    return np.array([[energy, -1.0], [1.0, 0.0]])


def schrodinger_cocycle(
    prob: SchrodingerProblem, energy: float, tol: float = FACTOR_TOL
) -> Cocycle:
    """(alpha, S_E) stored as A_E e^{f}.

    A_E^-1 S_E = (1, 0; v, 1), so log(A_E^-1 S_E) is sampled on a grid resolving the support
    of v and refit; the fit is accepted only if A_E e^f reproduces S_E within `tol`.
    """
    A_E = free_matrix(energy)
    lattice = prob.v.lattice
    if prob.v.is_zero():
        return Cocycle.factorized(prob.alpha, A_E, FourierSeries.zero(lattice, "matrix"))
    radius = prob.v.support_radius + FIT_BUFFER
    grid = SampleGrid.for_radius(lattice, radius)
    theta = grid.points
    A_inv = np.array([[0.0, 1.0], [-1.0, energy]])
    logs = log_real(A_inv @ prob.matrices(energy, theta))
    f = grid.fit(logs, radius, "matrix").prune(1e-15 * max(1.0, prob.v.max_coefficient()))
    f = f.symmetrize()
    check = torus_grid(prob.dimension, 64) + 0.5 / 64
    direct = prob.matrices(energy, check)
    rebuilt = A_E @ exp_real(f.evaluate(check))
    residual = float(np.max(canonical_norm(rebuilt - direct)))
    if residual > tol:
        raise FitResidualError(
            f"A_E e^f misses S_E by {residual:.3e} at E={energy:.10g} (radius {radius})"
        )
    return Cocycle.factorized(prob.alpha, A_E, f)


def potential_generator(prob: SchrodingerProblem) -> FourierSeries:
    """The exact sl(2,R) series v N with A_E e^{v N} = S_E."""
    return prob.v.map_coefficients(lambda c: c[:, None, None] * N_LOWER, "matrix")


# rotation numbers and the IDS


def schrodinger_rotation(
    prob: SchrodingerProblem,
    energies: np.ndarray | Sequence[float],
    controls: RotationControls | None = None,
    seed: int = 0,
) -> list[RotationEstimate]:
    """Clockwise rotation numbers of (alpha, S_E) for a batch of energies in one orbit sweep."""
    controls = controls or RotationControls()
    e = np.atleast_1d(np.asarray(energies, dtype=float))
    if e.size == 0:
        return []
    ns = controls.n_samples
    theta0 = sample_points(prob.dimension, ns, seed)
    v_mean = float(np.mean(prob.potential(torus_grid(prob.dimension, 64))))
    ref = np.repeat(np.arctan2(-2.0, e - v_mean), ns)
    mats = np.zeros((e.size, ns, 2, 2))
    mats[..., 0, 1] = -1.0
    mats[..., 1, 0] = 1.0

    def step(k: int) -> np.ndarray:
        mats[..., 0, 0] = e[:, None] - prob.potential(theta0 + k * prob.alpha)[None, :]
        return mats.reshape(-1, 2, 2)

    lifts = rotation_average(step, e.size * ns, controls.n_iter, controls.window, ref)
    lifts = lifts.reshape(e.size, ns)
    bias = 1.0 / controls.n_iter if controls.window == "flat" else 1.0 / controls.n_iter**2
    values = np.mean(lifts, axis=1) % 1.0
    errors = np.ptp(lifts, axis=1) + bias
    return [
        RotationEstimate(float(v), float(err), controls.n_iter, controls.window)
        for v, err in zip(values, errors)
    ]


def rotation_scan(
    prob: SchrodingerProblem,
    energies: np.ndarray | Sequence[float],
    controls: RotationControls | None = None,
    seed: int = 0,
    threads: int = 1,
) -> list[RotationEstimate]:
    """schrodinger_rotation over chunks of the energy grid, one chunk per worker, in order."""
    e = np.asarray(energies, dtype=float)
    chunks = [c for c in np.array_split(e, max(1, min(threads, e.size))) if c.size]
    if len(chunks) <= 1:
        return schrodinger_rotation(prob, e, controls, seed)
    parts = Parallel(n_jobs=threads, prefer="threads")(
        delayed(schrodinger_rotation)(prob, c, controls, seed) for c in chunks
    )
    return [est for part in parts for est in part]


def spectral_rotation(rho: float) -> float:
    """rho_spec = -rho mod 1 folded to [0, 1/2]."""
    x = float(-rho % 1.0)
    return min(x, 1.0 - x)


def ids_from_rotation(rho: float) -> float:
    return 1.0 - 2.0 * spectral_rotation(rho)


def ids(
    prob: SchrodingerProblem,
    energy: float,
    controls: RotationControls | None = None,
    seed: int = 0,
) -> float:
    """N(E) = 1 - 2 rho_spec(E)."""
    est = schrodinger_rotation(prob, [energy], controls, seed)[0]
    return ids_from_rotation(est.value)


@dataclass(frozen=True)
class IdsCurve:
    energies: np.ndarray
    rho: np.ndarray
    errors: np.ndarray
    values: np.ndarray


def ids_curve(
    prob: SchrodingerProblem,
    energies: np.ndarray | Sequence[float],
    controls: RotationControls | None = None,
    seed: int = 0,
    threads: int = 1,
) -> IdsCurve:
    """N on an increasing energy grid; monotonicity is checked against the estimate errors."""
    e = np.asarray(energies, dtype=float)
    if np.any(np.diff(e) <= 0):
        raise ConfigError("energy grid must be strictly increasing")
    est = rotation_scan(prob, e, controls, seed, threads)
    rho = np.array([x.value for x in est])
    errors = np.array([x.error for x in est])
    values = np.array([ids_from_rotation(x) for x in rho])
    if e.size > 1:
        drops = values[:-1] - values[1:]
        slack = np.maximum(MONOTONE_SLACK, 4.0 * (errors[:-1] + errors[1:]))
        worst = int(np.argmax(drops - slack))
        check_contract("N nondecreasing", float(drops[worst]), float(slack[worst]))
    return IdsCurve(e, rho, errors, values)


# finite sections


def finite_section_spectrum(
    prob: SchrodingerProblem, theta: Sequence[float], size: int
) -> np.ndarray:
    """Eigenvalues of the size x size Dirichlet truncation at phase theta, ascending."""
    if not 1 <= size <= MAX_SECTION:
        raise ConfigError(f"finite section size must be in 1..{MAX_SECTION}, got {size}")
    th = np.asarray(theta, dtype=float).reshape(prob.dimension)
    n = np.arange(size)[:, None]
    diagonal = prob.potential(th[None, :] + n * prob.alpha[None, :])
    if size == 1:
        return np.sort(diagonal)
    return eigvalsh_tridiagonal(diagonal, np.ones(size - 1))


def finite_section_union(
    prob: SchrodingerProblem, size: int, phases: int = 8, threads: int = 1
) -> np.ndarray:
    """Sorted union of finite-section spectra over equispaced phases along the first axis."""
    thetas = [np.eye(prob.dimension)[0] * j / phases for j in range(phases)]
    spectra = Parallel(n_jobs=max(1, threads), prefer="threads")(
        delayed(finite_section_spectrum)(prob, th, size) for th in thetas
    )
    log.info(f"GAPS: finite sections size={size} phases={phases}")
    return np.sort(np.concatenate(spectra))
