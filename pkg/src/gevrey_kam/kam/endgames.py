from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from gevrey_kam.analysis.arithmetic import (
    DiophantineParams,
    as_frequency,
    dc_alpha_check,
    torus_distance,
)
from gevrey_kam.analysis.cocycle import (
    Cocycle,
    is_uniformly_hyperbolic,
    rotation_number,
    sample_points,
)
from gevrey_kam.analysis.fourier import TWO_PI, FourierSeries, GevreyParams
from gevrey_kam.analysis.lie import (
    classify,
    elliptic_normal_form,
    exp_real,
    inv_sl2,
    log_real,
    rotation,
    sl2_coordinates,
)
from gevrey_kam.config import KamControls, RotationControls, UHControls
from gevrey_kam.errors import (
    DimensionError,
    DiophantineError,
    EndgameError,
    RotationMismatchError,
    UniformlyHyperbolicError,
    check_contract,
)
from gevrey_kam.kam.conjugacy import Conjugacy, conjugation_residual, rotate_series
from gevrey_kam.kam.iteration import (
    END_TO_END_SAMPLES,
    END_TO_END_TOL,
    KamTrace,
    almost_reduce,
    width_schedule,
)

log = logging.getLogger(__name__)

PHI_FLOOR = 1e-12


@dataclass(frozen=True)
class Absorption:
    B: Conjugacy
    A: np.ndarray
    f: FourierSeries


def absorb_resonance(
    A: np.ndarray,
    f: FourierSeries,
    alpha: float | Sequence[float],
    n: Sequence[int],
    tol: float,
) -> Absorption:
    """Conjugate (alpha, A e^f) by P^-1 Z_n where P A P^-1 = R_xi and 2 xi = <n,alpha> mod 1."""
    a = as_frequency(alpha)
    kind = classify(A)
    if kind != "elliptic":
        raise RotationMismatchError(f"cannot absorb degree {tuple(n)}: constant part is {kind}")
    data = elliptic_normal_form(A)
    mismatch = float(torus_distance(2.0 * data.xi - float(np.dot(n, a))))
    if mismatch > tol:
        raise RotationMismatchError(
            f"2 xi = {2 * data.xi:.12g} is {mismatch:.3e} away from <{tuple(n)}, alpha>"
        )
    P, P_inv = data.P, inv_sl2(data.P)
    f_rot = rotate_series(f.map_coefficients(lambda c: P @ c @ P_inv), n)
    A_rot = rotation(data.xi - float(np.dot(n, a)) / 2.0)
    B = Conjugacy.constant(P_inv, a.size) @ Conjugacy.rotation(n)
    return Absorption(B, A_rot, f_rot)


@dataclass(frozen=True)
class ParabolicForm:
    """C^-1 A C = sign exp((0, phi; defect, 0)) with C a rotation."""

    C: np.ndarray
    A_final: np.ndarray
    phi: float
    defect: float
    sign: int


def parabolic_normal_form(A: np.ndarray) -> ParabolicForm:
    """Rotate log(+-A) so its H component vanishes and the lower entry is as small as possible.

    For nilpotent log the result is exactly (0, phi; 0, 0) with |phi| = 2|t|. A log that is
    already a multiple of J takes the zero rotation.
    """
    A = np.real(np.asarray(A, dtype=float))
    sign = 1 if float(np.trace(A)) >= 0.0 else -1
    a = log_real(sign * A)
    x, y, z = (float(v) for v in sl2_coordinates(a))
    rho = float(np.hypot(x, y))
    if rho == 0.0:
        C = np.eye(2)
    else:
        s = 1.0 if z >= 0.0 else -1.0
        beta = float(np.angle(x - 1j * y))
        C = rotation((beta + s * np.pi / 2.0) / 2.0 / TWO_PI)
    a_rot = inv_sl2(C) @ a @ C
    return ParabolicForm(C, sign * exp_real(a_rot), float(a_rot[0, 1]), float(a_rot[1, 0]), sign)


@dataclass(frozen=True)
class RationalReduction:
    Z_tilde: Conjugacy
    A_final: np.ndarray
    f_final: FourierSeries
    phi: float
    phi_bound: float
    defect: float
    sign: int
    degree: tuple[int, ...]
    rho: float
    residual: float
    trace: KamTrace


def reduce_rational(
    A0: np.ndarray,
    f0: FourierSeries,
    alpha: float | Sequence[float],
    k: Sequence[int],
    p0: GevreyParams,
    r: float,
    dioph: DiophantineParams,
    controls: KamControls | None = None,
    rotation_controls: RotationControls | None = None,
    uh_controls: UHControls | None = None,
    label_tol: float = 1e-5,
    seed: int = 0,
) -> RationalReduction:
    """Reduce a cocycle with 2 rho = <k,alpha> mod 1 to a constant parabolic (1, phi; 0, 1).

    The returned Z_tilde is defined on 2T^d, has degree k and carries A0 e^{f0} to
    A_final e^{f_final} with f_final below the underflow floor.
    """
    controls = controls or KamControls()
    a = as_frequency(alpha)
    k = tuple(int(v) for v in k)
    if len(k) != a.size:
        raise DimensionError(f"gap label {k} does not match frequency dimension {a.size}")
    c = Cocycle.factorized(a, A0, f0)
    uh = is_uniformly_hyperbolic(c, uh_controls)
    if uh.verdict == "UH":
        raise UniformlyHyperbolicError(
            f"cocycle is uniformly hyperbolic (growth {uh.min_growth:.3e})"
        )
    rho = rotation_number(c, rotation_controls, seed)
    tol = max(2.0 * rho.error, label_tol)
    mismatch = float(torus_distance(2.0 * rho.value - float(np.dot(k, a))))
    if mismatch > tol:
        raise RotationMismatchError(
            f"2 rho = {2 * rho.value:.10g} is {mismatch:.3e} away from <{k}, alpha> (tol {tol:.1e})"
        )

    trace = almost_reduce(A0, f0, a, p0, r, dioph, controls, seed=seed)
    B, A, f = trace.B, trace.A_final, trace.f_final
    remaining = tuple(int(x) for x in np.subtract(k, trace.degree))
    if any(remaining):
        absorbed = absorb_resonance(A, f, a, remaining, tol)
        B, A, f = B @ absorbed.B, absorbed.A, absorbed.f
        log.info(f"ENDGAME: absorbed remaining degree {remaining}")

    form = parabolic_normal_form(A)
    C, C_inv = form.C, inv_sl2(form.C)
    Z_tilde = B @ Conjugacy.constant(C, a.size)
    f_final = f.map_coefficients(lambda m: C_inv @ m @ C)
    eps0 = f0.gevrey_norm(p0)
    k_l1 = float(np.sum(np.abs(k)))
    phi_bound = (
        controls.rational_slack * eps0**0.6 * np.exp(-r * (TWO_PI * k_l1) ** p0.nu) + PHI_FLOOR
    )
    theta = sample_points(a.size, END_TO_END_SAMPLES, seed, Z_tilde.lattice.period)
    residual = conjugation_residual(a, A0, f0, Z_tilde, form.A_final, f_final, theta=theta)
    degree = Z_tilde.degree
    log.info(
        f"ENDGAME: rational k={k} phi={form.phi:.3e} (bound {phi_bound:.3e}) "
        f"defect={form.defect:.3e} degree={degree} residual={residual:.3e}"
    )
    check_contract("deg Z_tilde = k", float(np.max(np.abs(np.subtract(degree, k)))), 0.0)
    check_contract("|phi| <= slack eps0^(3/5) e^(-r|2 pi k|^nu)", abs(form.phi), phi_bound)
    check_contract("rational end-to-end residual", residual, END_TO_END_TOL)
    return RationalReduction(
        Z_tilde,
        form.A_final,
        f_final,
        form.phi,
        phi_bound,
        form.defect,
        form.sign,
        degree,
        rho.value,
        residual,
        trace,
    )


@dataclass(frozen=True)
class DiophantineReduction:
    B: Conjugacy
    A_final: np.ndarray
    rho: float
    rho_final: float
    last_resonant_step: int | None
    tail_deviation: float
    tail_bound: float
    residual: float
    trace: KamTrace


def reduce_diophantine(
    A0: np.ndarray,
    f0: FourierSeries,
    alpha: float | Sequence[float],
    p0: GevreyParams,
    r: float,
    dioph: DiophantineParams,
    kappa: float,
    dc_tau: float,
    controls: KamControls | None = None,
    rotation_controls: RotationControls | None = None,
    scan_radius: int = 50,
    seed: int = 0,
) -> DiophantineReduction:
    """Reduce a cocycle whose rotation number is Diophantine with respect to alpha.

    Past the last resonant step only non-resonant steps occur, and their composed
    conjugacy stays within 4 eps_j^(1/2) of the identity.
    """
    controls = controls or KamControls()
    a = as_frequency(alpha)
    c = Cocycle.factorized(a, A0, f0)
    rho = rotation_number(c, rotation_controls, seed)
    check = dc_alpha_check(rho.value, a, kappa, dc_tau, scan_radius)
    if not check.passed:
        raise DiophantineError(
            f"rho = {rho.value:.10g} is not in DC_alpha({kappa}, {dc_tau}): "
            f"fails at m = {check.witness}"
        )

    trace = almost_reduce(A0, f0, a, p0, r, dioph, controls, seed=seed)
    widths = width_schedule(p0.r, r, len(trace.steps))
    leftover = trace.f_final.gevrey_norm(p0.with_width(widths[-1]))
    if leftover > controls.residual_tol:
        raise EndgameError(
            f"perturbation {leftover:.3e} still above {controls.residual_tol:.1e} "
            f"after {len(trace.steps)} steps"
        )
    A_final = trace.A_final
    kind = classify(A_final)
    if kind != "elliptic":
        raise EndgameError(f"reduced constant is {kind}, expected elliptic for Diophantine rho")

    resonant = trace.resonant_steps
    last = resonant[-1].step if resonant else None
    start = 0 if last is None else last + 1
    tail = Conjugacy.identity(a.size)
    for step_conjugacy in trace.conjugacies[start:]:
        tail = tail @ step_conjugacy
    tail_deviation = tail.exp_deviation_bound(p0.with_width(r))
    tail_bound = 4.0 * trace.steps[start].eps ** 0.5 if start < len(trace.steps) else 0.0
    check_contract("|Z_bar - Id| <= 4 eps_j^(1/2)", tail_deviation, tail_bound)

    rho_final = float(elliptic_normal_form(A_final).xi % 1.0)
    expected = rho.value - trace.rho_shift()
    drift = float(torus_distance(rho_final - expected))
    if drift > max(10.0 * rho.error, 1e-6):
        raise RotationMismatchError(
            f"rho(A_final) = {rho_final:.10g} differs from rho - <deg B,alpha>/2 by {drift:.3e}"
        )
    theta = sample_points(a.size, END_TO_END_SAMPLES, seed, trace.B.lattice.period)
    zero = FourierSeries.zero(f0.lattice, "matrix")
    residual = conjugation_residual(a, A0, f0, trace.B, A_final, zero, theta=theta)
    log.info(
        f"ENDGAME: diophantine rho={rho.value:.10g} rho_final={rho_final:.10g} "
        f"tail={tail_deviation:.3e} residual={residual:.3e}"
    )
    check_contract("diophantine end-to-end residual", residual, END_TO_END_TOL)
    return DiophantineReduction(
        trace.B, A_final, rho.value, rho_final, last, tail_deviation, tail_bound, residual, trace
    )

