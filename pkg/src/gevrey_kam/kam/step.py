from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from gevrey_kam.analysis.arithmetic import DiophantineParams, as_frequency
from gevrey_kam.analysis.fourier import TWO_PI, FourierSeries, GevreyParams
from gevrey_kam.analysis.lie import (
    EllipticData,
    canonical_norm,
    classify,
    elliptic_normal_form,
    exp_real,
    inv_sl2,
    log_real,
    rotation,
    to_su11,
)
from gevrey_kam.config import KamControls
from gevrey_kam.errors import SmallnessGateError, check_contract
from gevrey_kam.kam.conjugacy import Conjugacy, conjugation_residual, rotate_series
from gevrey_kam.kam.elimination import eliminate_nonresonant, series_bch
from gevrey_kam.kam.resonance import (
    effective_window,
    elimination_eta,
    find_resonance,
    resonance_window,
    smallness_bound,
)

log = logging.getLogger(__name__)

StepCase = Literal["trivial", "non-resonant", "resonant"]


def numerical_floor(eps: float, controls: KamControls) -> float:
    """Round-off level of one step's coefficient arithmetic on a perturbation of size eps."""
    return controls.floor_factor * float(np.finfo(float).eps) * eps


@dataclass(frozen=True)
class Su11Data:
    """A = sign e^a with M a M^-1 = (i t, mu; conj(mu), -i t)."""

    sign: int
    a: np.ndarray
    t: float
    mu: complex

    @classmethod
    def of(cls, A: np.ndarray) -> Su11Data:
        sign = 1 if float(np.trace(A)) >= 0.0 else -1
        a = log_real(sign * np.asarray(A, dtype=float))
        u = to_su11(a)
        return cls(sign, a, float(np.imag(u[0, 0])), complex(u[0, 1]))


@dataclass(frozen=True)
class StepResult:
    """B(theta+alpha)^-1 A e^{f(theta)} B(theta) = A_plus e^{f_plus(theta)}."""

    case: StepCase
    B: Conjugacy
    A_plus: np.ndarray
    f_plus: FourierSeries
    eps: float
    eps_plus: float
    window: int
    n_window: float
    n_star: tuple[int, ...] | None = None
    eta: tuple[float, ...] = ()
    residual: float = 0.0
    norms: dict[str, float] = field(default_factory=dict)
    gates: dict[str, bool] = field(default_factory=dict)
    su11: Su11Data | None = None


def absorb_constant(
    A: np.ndarray, f_re: FourierSeries, controls: KamControls
) -> tuple[np.ndarray, FourierSeries]:
    """A e^{f_re} = (A e^c) e^{f_plus} with c the average of f_re."""
    if f_re.is_zero():
        return A, f_re
    c = np.real(np.asarray(f_re.average()))
    constant = FourierSeries.constant(f_re.lattice, -c, "matrix")
    f_plus = series_bch(constant, f_re).prune(controls.underflow)
    return A @ exp_real(c), f_plus


def _nonresonant(
    A: np.ndarray,
    f: FourierSeries,
    alpha: np.ndarray,
    p: GevreyParams,
    eps: float,
    window: int,
    controls: KamControls,
) -> tuple[Conjugacy, np.ndarray, FourierSeries, tuple[float, ...], dict[str, float]]:
    eta = elimination_eta(A, eps, controls)
    elim = eliminate_nonresonant(A, f, alpha, eta, p, controls, window)
    A_plus, f_plus = absorb_constant(A, elim.f_re, controls)
    norms = {"Y": elim.Y.gevrey_norm(p), "min_divisor": elim.min_divisor}
    return Conjugacy.exp(elim.Y), A_plus, f_plus, (eta,), norms


def _resonant(
    f: FourierSeries,
    alpha: np.ndarray,
    p: GevreyParams,
    window: int,
    data: EllipticData,
    n_star: tuple[int, ...],
    controls: KamControls,
) -> tuple[Conjugacy, np.ndarray, FourierSeries, tuple[float, ...], dict[str, float]]:
    d = alpha.size
    P, P_inv = data.P, inv_sl2(data.P)
    A1 = rotation(data.xi)
    f1 = f.map_coefficients(lambda c: P @ c @ P_inv)
    eta1 = elimination_eta(A1, f1.gevrey_norm(p), controls)
    first = eliminate_nonresonant(A1, f1, alpha, eta1, p, controls, window)

    A2 = rotation(data.xi - float(np.dot(n_star, alpha)) / 2.0)
    f2 = rotate_series(first.f_re, n_star)
    eps2 = f2.gevrey_norm(p)
    etas = (eta1,)
    Y2 = FourierSeries.zero(f.lattice, "matrix")
    f_re2 = f2
    if eps2 > 0.0:
        eta2 = elimination_eta(A2, eps2, controls, rotated=True)
        second = eliminate_nonresonant(A2, f2, alpha, eta2, p, controls, window, rotated=True)
        Y2, f_re2, etas = second.Y, second.f_re, (eta1, eta2)
    A_plus, f_plus = absorb_constant(A2, f_re2, controls)
    B = (
        Conjugacy.constant(P_inv, d)
        @ Conjugacy.exp(first.Y)
        @ Conjugacy.rotation(n_star)
        @ Conjugacy.exp(Y2)
    )
    norms = {"Y": first.Y.gevrey_norm(p), "Y_rotated": Y2.gevrey_norm(p), "P": canonical_norm(P)}
    return B, A_plus, f_plus, etas, norms


def kam_step(
    A: np.ndarray,
    f: FourierSeries,
    alpha: float | Sequence[float],
    p: GevreyParams,
    r_plus: float,
    dioph: DiophantineParams,
    controls: KamControls | None = None,
    step: int = 0,
    window: int | None = None,
) -> StepResult:
    """One KAM step from width p.r to r_plus.

    Non-resonant: B = e^Y. Resonant at n*: B = P^-1 e^{Y1} Z_{n*} e^{Y2}, which is defined
    on 2T^d and has degree n*.
    """
    controls = controls or KamControls()
    a = as_frequency(alpha)
    A = np.real(np.asarray(A, dtype=float))
    p_plus = p.with_width(r_plus)
    eps = f.gevrey_norm(p)
    if eps <= controls.underflow:
        return StepResult(
            "trivial", Conjugacy.identity(a.size), A, f, eps, f.gevrey_norm(p_plus), 0, 0.0
        )
    if eps >= 1.0:
        raise SmallnessGateError("eps < 1", eps, 1.0)

    n_window = resonance_window(eps, p.r, r_plus, p.nu)
    n_eff = window
    if n_eff is None:
        n_eff = effective_window(n_window, step, controls, f.support_radius)
    bound = smallness_bound(A, p.r, r_plus, p.nu, dioph, controls)
    gates = {"smallness": eps <= bound}
    if not gates["smallness"]:
        if controls.enforce_gates:
            raise SmallnessGateError("smallness", eps, bound)
        log.warning(f"KAM: step {step} smallness gate off: eps={eps:.3e} > {bound:.3e}")

    data: EllipticData | None = None
    n_star = None
    if classify(A) == "elliptic":
        data = elliptic_normal_form(A)
        n_star = find_resonance(data.xi, a, n_eff, eps**controls.sigma)

    if n_star is None:
        B, A_plus, f_plus, etas, norms = _nonresonant(A, f, a, p, eps, n_eff, controls)
    else:
        assert data is not None
        B, A_plus, f_plus, etas, norms = _resonant(f, a, p, n_eff, data, n_star, controls)

    eps_plus = f_plus.gevrey_norm(p_plus)
    residual = conjugation_residual(a, A, f, B, A_plus, f_plus)
    norms = {"f": eps, "f_plus": eps_plus, **norms}
    check_contract("step residual", residual, controls.residual_tol)
    # below the round-off floor eps^2 is not measurable
    check_contract("|f_plus| <= eps^2", eps_plus, max(eps**2, numerical_floor(eps, controls)))

    su11: Su11Data | None = None
    if n_star is None:
        shift = float(canonical_norm(A_plus - A))
        deviation = B.exp_deviation_bound(p_plus)
        norms.update({"A_shift": shift, "B_deviation": deviation})
        check_contract("||A_plus - A|| <= 4||A|| eps", shift, 4.0 * float(canonical_norm(A)) * eps)
        check_contract("|B - Id| <= 2 eps^(1/2)", deviation, 2.0 * eps**0.5)
        case: StepCase = "non-resonant"
    else:
        su11 = Su11Data.of(A_plus)
        n_l1 = float(np.sum(np.abs(n_star)))
        mu_bound = eps**0.75 * np.exp(-p.r * (TWO_PI * n_l1) ** p.nu)
        mismatch = float(np.max(np.abs(np.subtract(B.degree, n_star))))
        threshold = eps**controls.sigma
        norms.update(
            {
                "a_plus": float(canonical_norm(su11.a)),
                "t_plus": abs(su11.t),
                "mu_plus": abs(su11.mu),
                "B_sup": B.sup_norm(),
                "B_bound": 32.0
                / np.sqrt(dioph.gamma)
                * float(canonical_norm(A)) ** 0.5
                * n_l1 ** (dioph.tau / 2.0)
                * np.exp(r_plus * (np.pi * n_l1) ** p.nu),
            }
        )
        check_contract("deg B = n*", mismatch, 0.0)
        check_contract("||a_plus|| <= 4 eps^sigma", norms["a_plus"], 4.0 * threshold)
        check_contract("|t_plus| <= eps^sigma", norms["t_plus"], threshold)
        check_contract("|mu_plus| <= eps^(3/4) e^(-r|2 pi n*|^nu)", norms["mu_plus"], mu_bound)
        case = "resonant"

    log.info(
        f"KAM: step {step} {case} eps={eps:.3e} -> {eps_plus:.3e} window={n_eff} "
        f"n*={n_star} residual={residual:.3e}"
    )
    return StepResult(
        case,
        B,
        A_plus,
        f_plus,
        eps,
        eps_plus,
        n_eff,
        n_window,
        n_star,
        etas,
        residual,
        norms,
        gates,
        su11,
    )
