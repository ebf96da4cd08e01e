from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import product
from typing import Any, Literal, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy.optimize import brentq

from gevrey_kam.analysis.arithmetic import DiophantineParams, as_frequency, torus_distance
from gevrey_kam.analysis.cocycle import torus_grid
from gevrey_kam.analysis.fourier import TWO_PI, FourierSeries, GevreyParams
from gevrey_kam.analysis.lie import canonical_norm, classify
from gevrey_kam.config import KamControls, RotationControls
from gevrey_kam.duality.lattice import (
    MAX_SITES,
    LatticeVector,
    LongRangeOperator,
    good_eigenfunction_test,
    long_range_apply,
)
from gevrey_kam.errors import (
    ConfigError,
    DegenerateColumnError,
    GevreyKamError,
    NotEllipticError,
    check_contract,
)
from gevrey_kam.kam.conjugacy import Conjugacy
from gevrey_kam.kam.endgames import DiophantineReduction, reduce_diophantine
from gevrey_kam.spectral.schrodinger import SchrodingerProblem, ids, schrodinger_cocycle

log = logging.getLogger(__name__)

DEGENERATE_TOL = 1e-12
ENVELOPE_SLACK = 1e-9
SWEEP_FACTOR = 10.0
SWEEP_FLOOR = 1e-13
ENERGY_XTOL = 1e-13
PRUNE_REL = 1e-15

Branch = Literal[1, -1]


def dual_problem(
    v: FourierSeries, lam: float, alpha: float | Sequence[float], p0: GevreyParams
) -> SchrodingerProblem:
    """The Schrodinger side: potential v / lam."""
    return SchrodingerProblem(v * (1.0 / lam), as_frequency(alpha), p0, None)


def energy_for_rotation(
    prob: SchrodingerProblem,
    rho_spec: float,
    controls: RotationControls | None = None,
    seed: int = 0,
) -> float:
    """E with N(E) = 1 - 2 rho_spec, solved on the monotone IDS."""
    target = 1.0 - 2.0 * rho_spec
    lo, hi = prob.energy_range()
    return float(
        brentq(lambda e: ids(prob, e, controls, seed) - target, lo, hi, xtol=ENERGY_XTOL)
    )


def dual_reduction(
    prob: SchrodingerProblem,
    energy: float,
    r: float,
    dioph: DiophantineParams,
    kappa: float,
    dc_tau: float,
    controls: KamControls | None = None,
    rotation: RotationControls | None = None,
    scan_radius: int = 50,
    seed: int = 0,
) -> DiophantineReduction:
    cocycle = schrodinger_cocycle(prob, energy)
    assert cocycle.A0 is not None and cocycle.f is not None
    return reduce_diophantine(
        cocycle.A0, cocycle.f, prob.alpha, prob.p, r, dioph, kappa, dc_tau,
        controls, rotation, scan_radius, seed,
    )


def diagonal_frame(A: np.ndarray) -> tuple[np.ndarray, float]:
    """(M, psi) with M in SL(2,C) and M^-1 A M = diag(e^{i 2 pi psi}, e^{-i 2 pi psi}).

    psi lies in (0, 1/2); the second column of M is proportional to the conjugate of the first.
    """
    A = np.real(np.asarray(A, dtype=float))
    kind = classify(A)
    if kind != "elliptic":
        raise NotEllipticError(kind, float(np.trace(A)))
    values, vectors = np.linalg.eig(A)
    i = int(np.argmax(values.imag))
    v1 = vectors[:, i]
    det = v1[0] * np.conj(v1[1]) - v1[1] * np.conj(v1[0])
    M = np.stack([v1, np.conj(v1) / det], axis=1)
    psi = float(np.angle(values[i]) / TWO_PI)
    return M, psi


@dataclass(frozen=True)
class DualEigenfunction:
    u: LatticeVector
    operator: LongRangeOperator
    energy: float
    energy_scaled: float
    m_prime: tuple[int, ...]
    offset: tuple[float, ...]
    column: int
    residual: float
    z_norm: float
    norm_lower_bound: float
    envelope_ratio: float
    boundary: float
    parity_leak: float

    @property
    def phase(self) -> float:
        return self.operator.phi

    def to_dict(self) -> dict[str, Any]:
        return {
            "energy": self.energy,
            "energy_scaled": self.energy_scaled,
            "phase": self.phase,
            "m_prime": list(self.m_prime),
            "offset": list(self.offset),
            "column": self.column,
            "window": self.u.window,
            "residual": self.residual,
            "z_norm": self.z_norm,
            "norm_lower_bound": self.norm_lower_bound,
            "envelope_ratio": self.envelope_ratio,
            "boundary": self.boundary,
            "parity_leak": self.parity_leak,
        }


def _frame_sup(B: Conjugacy, M: np.ndarray) -> float:
    n = 256 if B.dimension == 1 else 32**B.dimension
    theta = torus_grid(B.dimension, n, B.lattice.period)
    return float(np.max(canonical_norm(B.evaluate(theta) @ M)))


def dual_eigenfunction(
    B: Conjugacy,
    A_final: np.ndarray,
    v: FourierSeries,
    lam: float,
    alpha: float | Sequence[float],
    energy: float,
    m_prime: Sequence[int] | None = None,
    p: GevreyParams | None = None,
    branch: Branch = 1,
    radius: int | None = None,
    cap: int = MAX_SITES,
) -> DualEigenfunction:
    """Normalized eigenvector of L_{v,alpha,phi} built from a conjugacy to a constant.

    With B(theta+alpha)^-1 S_E B(theta) = A_final and A_final diagonalized to
    diag(e^{i2pi psi}, e^{-i2pi psi}), the first entry b of the chosen column of B M gives
    z(theta) = e^{i2pi<m',theta>} b(theta), whose Fourier coefficients solve
    L u = lam E u at phase phi = psi - <m',alpha> (plus <s,alpha> when B has odd degree and
    the coefficients sit on Z^d + s). `branch = -1` uses the e^{-i2pi psi} column.
    """
    a = as_frequency(alpha)
    d = a.size
    mp = np.zeros(d, dtype=np.int64) if m_prime is None else np.asarray(m_prime, dtype=np.int64)
    M, psi = diagonal_frame(A_final)
    fitted = B.fit(radius)
    lattice = fitted.lattice
    BM = FourierSeries(lattice, fitted.modes, fitted.coeffs @ M, "matrix")
    sup = _frame_sup(B, M)

    order = [0, 1] if branch == 1 else [1, 0]
    column, b, z_norm = order[0], BM.coeffs[:, 0, 0], 0.0
    for col in order:
        b = BM.coeffs[:, 0, col]
        z_norm = float(np.linalg.norm(b))
        if z_norm > DEGENERATE_TOL * sup:
            column = col
            break
        log.warning(f"DUALITY: column {col + 1} of B M is numerically zero, trying the other")
    else:
        raise DegenerateColumnError(f"both columns of B M vanish (sup |B M| = {sup:.3e})")
    signed_psi = psi if column == 0 else -psi

    modes = fitted.modes
    parity = np.zeros(d, dtype=np.int64)
    on_class = np.ones(modes.shape[0], dtype=bool)
    if lattice.half_period:
        parity = np.mod(np.asarray(B.degree, dtype=np.int64), 2)
        on_class = np.all(np.mod(modes - parity, 2) == 0, axis=1)
    leak = float(np.max(np.abs(b[~on_class]), initial=0.0)) / z_norm
    # drop fit noise so the window ends where the coefficients do
    keep = on_class & (np.abs(b) > PRUNE_REL * z_norm)
    if lattice.half_period:
        sites = (modes[keep] - parity) // 2 + mp
        frequencies = modes[keep] / 2.0
    else:
        sites = modes[keep] + mp
        frequencies = modes[keep].astype(float)
    offset = parity / 2.0
    kept = b[keep] / np.linalg.norm(b[keep])
    phase = (signed_psi - float(mp @ a) + float(offset @ a)) % 1.0

    u = LatticeVector.from_sites(sites, kept, cap=cap).with_unit_phase()
    operator = LongRangeOperator(v, lam, a, phase)
    scaled = lam * energy
    residual = (long_range_apply(operator, u, cap) - u * scaled).norm()

    envelope = float("nan")
    if p is not None:
        weight = np.exp(-p.r * (TWO_PI * np.sum(np.abs(frequencies), axis=1)) ** p.nu)
        bound = np.sqrt(2.0) * BM.gevrey_norm(p) ** 2 * weight
        envelope = float(np.max(np.abs(kept) / bound, initial=0.0))
        check_contract("dual eigenfunction envelope", envelope, 1.0 + ENVELOPE_SLACK)
    lower = 1.0 / (np.sqrt(2.0) * sup)
    if z_norm < lower * (1.0 - 1e-9):
        log.warning(f"DUALITY: ||z||={z_norm:.3e} below the determinant bound {lower:.3e}")
    log.info(
        f"DUALITY: eigenfunction phi={phase:.12g} m'={mp.tolist()} window={u.window} "
        f"residual={residual:.3e} envelope={envelope:.3e} boundary={u.shell_max():.3e}"
    )
    return DualEigenfunction(
        u,
        operator,
        float(energy),
        float(scaled),
        tuple(int(x) for x in mp),
        tuple(float(x) for x in offset),
        column + 1,
        float(residual),
        z_norm,
        float(lower),
        envelope,
        u.shell_max(),
        leak,
    )


def phase_covariance(first: DualEigenfunction, second: DualEigenfunction) -> tuple[float, float]:
    """(vector defect, phase defect) between two eigenfunctions whose m' differ by m.

    second.u should equal first.u moved by m, at phase first.phase - <m, alpha>.
    """
    m = np.asarray(second.m_prime) - np.asarray(first.m_prime)
    moved = first.u.shifted(m).with_unit_phase()
    vector = moved.distance(second.u.with_unit_phase())
    expected = first.phase - float(m @ first.operator.alpha)
    return vector, float(torus_distance(second.phase - expected))


def census_sites(dimension: int, box: int) -> list[tuple[int, ...]]:
    return [tuple(m) for m in product(range(-box, box + 1), repeat=dimension)]


def _census_row(
    prob: SchrodingerProblem,
    v: FourierSeries,
    lam: float,
    phi: float,
    m: tuple[int, ...],
    r: float,
    dioph: DiophantineParams,
    kappa: float,
    dc_tau: float,
    good: tuple[int, float, float],
    controls: KamControls | None,
    rotation: RotationControls | None,
    seed: int,
) -> dict[str, Any]:
    x = (phi + float(np.dot(m, prob.alpha))) % 1.0
    branch: Branch = 1 if x <= 0.5 else -1
    row: dict[str, Any] = {"phi": phi, "m": " ".join(str(k) for k in m), "target": x}
    try:
        energy = energy_for_rotation(prob, min(x, 1.0 - x), rotation, seed)
        red = dual_reduction(prob, energy, r, dioph, kappa, dc_tau, controls, rotation, seed=seed)
        eig = dual_eigenfunction(
            red.B, red.A_final, v, lam, prob.alpha, energy, m, prob.p.with_width(r), branch
        )
    except GevreyKamError as e:
        log.warning(f"DUALITY: census phi={phi:.6g} m={list(m)} skipped: {e}")
        row.update(
            energy=float("nan"), phase=float("nan"), residual=float("nan"),
            good=False, status=type(e).__name__,
        )
        return row
    N, C, eps = good
    report = good_eigenfunction_test(eig.u, prob.p.nu, N, C, eps)
    row.update(
        energy=energy, phase=eig.phase, residual=eig.residual, good=report.good, status="ok"
    )
    return row


def goodness_census(
    v: FourierSeries,
    lam: float,
    alpha: float | Sequence[float],
    p0: GevreyParams,
    r: float,
    dioph: DiophantineParams,
    kappa: float,
    dc_tau: float,
    phases: Sequence[float],
    box: int,
    good: tuple[int, float, float],
    controls: KamControls | None = None,
    rotation: RotationControls | None = None,
    seed: int = 0,
    threads: int = 1,
) -> pd.DataFrame:
    """For each phase, which m in the box give good eigenfunctions with rho_spec = phi + <m,alpha>.

    Diagnostic only; `good` is (N, C, eps).
    """
    prob = dual_problem(v, lam, alpha, p0)
    jobs = [(phi, m) for phi in phases for m in census_sites(prob.dimension, box)]

    def run(job: tuple[float, tuple[int, ...]]) -> dict[str, Any]:
        phi, m = job
        return _census_row(
            prob, v, lam, phi, m, r, dioph, kappa, dc_tau, good, controls, rotation, seed
        )

    rows = Parallel(n_jobs=max(1, threads), prefer="threads")(delayed(run)(job) for job in jobs)
    frame = pd.DataFrame(rows)
    for phi, group in frame.groupby("phi", sort=True):
        log.info(
            f"DUALITY: census phi={phi:.6g} good {int(group['good'].sum())}/{len(group)} sites"
        )
    return frame


def coupling_sweep(
    v: FourierSeries,
    couplings: Sequence[float],
    alpha: float | Sequence[float],
    p0: GevreyParams,
    r: float,
    dioph: DiophantineParams,
    kappa: float,
    dc_tau: float,
    energy: float | None = None,
    rho_spec: float | None = None,
    controls: KamControls | None = None,
    rotation: RotationControls | None = None,
    seed: int = 0,
) -> pd.DataFrame:
    """Reduction residual against the eigen-residual ||L u - lam E u|| / lam across couplings.

    Ordered by decreasing reduction residual, each eigen-residual may exceed an earlier one
    by at most a factor 10.
    """
    if (energy is None) == (rho_spec is None):
        raise ConfigError("give exactly one of energy, rho_spec")
    rows = []
    for lam in couplings:
        prob = dual_problem(v, lam, alpha, p0)
        if rho_spec is not None:
            e = energy_for_rotation(prob, rho_spec, rotation, seed)
        else:
            assert energy is not None
            e = energy
        red = dual_reduction(prob, e, r, dioph, kappa, dc_tau, controls, rotation, seed=seed)
        eig = dual_eigenfunction(red.B, red.A_final, v, lam, alpha, e)
        rows.append(
            {
                "coupling": float(lam),
                "energy": e,
                "reduction_residual": red.residual,
                "eigen_residual": eig.residual,
                "scaled_residual": eig.residual / lam,
            }
        )
    frame = pd.DataFrame(rows)
    ordered = frame.sort_values("reduction_residual", ascending=False, kind="stable")
    scaled = np.maximum(ordered["scaled_residual"].to_numpy(), SWEEP_FLOOR)
    running = np.minimum.accumulate(scaled)
    worst = float(np.max(scaled / running, initial=1.0))
    log.info(f"DUALITY: sweep over {len(frame)} couplings, worst growth factor {worst:.3g}")
    check_contract("eigen-residual follows the reduction residual", worst, SWEEP_FACTOR)
    return frame
