from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from gevrey_kam.analysis.arithmetic import as_frequency
from gevrey_kam.analysis.fourier import TWO_PI, FourierSeries, GevreyParams, series_product
from gevrey_kam.analysis.lie import (
    BCH_RADIUS,
    H,
    J,
    S,
    from_sl2_coordinates,
    inv_sl2,
    sl2_coordinates,
)
from gevrey_kam.config import KamControls
from gevrey_kam.errors import (
    BCHConvergenceError,
    EliminationError,
    SmallDivisorError,
    SmallnessGateError,
    check_contract,
)
from gevrey_kam.kam.conjugacy import Conjugacy, conjugation_residual
from gevrey_kam.kam.resonance import ResonanceSets, elimination_eta

log = logging.getLogger(__name__)

SINGULAR_FLOOR = 1e-14


@dataclass(frozen=True)
class Elimination:
    """e^{-Y(theta+alpha)} A e^{f(theta)} e^{Y(theta)} = A e^{f_re(theta)}."""

    Y: FourierSeries
    f_re: FourierSeries
    sets: ResonanceSets
    eps: float
    residual: float
    iterations: int
    last_update: float
    eta_tilde: float
    min_divisor: float

    @property
    def constant(self) -> np.ndarray:
        """Real average of f_re, the part absorbed into the constant."""
        if self.f_re.is_zero():
            return np.zeros((2, 2))
        return np.real(np.asarray(self.f_re.average()))


def sup_bound(f: FourierSeries) -> float:
    """Sum of coefficient norms, an upper bound for the sup norm."""
    return float(np.sum(f.coefficient_norms())) if f.size else 0.0


def series_commutator(x: FourierSeries, y: FourierSeries) -> FourierSeries:
    return series_product(x, y) - series_product(y, x)


def series_bch(x: FourierSeries, y: FourierSeries, radius: int | None = None) -> FourierSeries:
    """log(e^X e^Y) through degree three, computed on coefficients.

    Working on coefficients keeps the relative accuracy of perturbations far below machine
    epsilon, which a pointwise exp/log on a grid would round away.
    """
    s = sup_bound(x) + sup_bound(y)
    if s > BCH_RADIUS:
        raise BCHConvergenceError(f"sup ||X|| + sup ||Y|| = {s:.3e} exceeds {BCH_RADIUS}")
    out = x + y
    xy = series_commutator(x, y)
    if not xy.is_zero():
        third = series_commutator(x, xy) - series_commutator(y, xy)
        out = out + xy * 0.5 + third * (1.0 / 12.0)
    if radius is not None:
        out = out.truncate(radius)
    return out


def ad_matrix(A: np.ndarray) -> np.ndarray:
    """Matrix of X -> A^-1 X A in (h, s, j) coordinates."""
    basis = np.stack([H, S, J])
    return sl2_coordinates(inv_sl2(A) @ basis @ A).T


def solve_modes(
    g: FourierSeries, T: np.ndarray, alpha: np.ndarray
) -> tuple[FourierSeries, float, tuple[int, ...]]:
    """Solve e^{i 2 pi <n,alpha>} T y(n) - y(n) = g(n) mode by mode.

    Returns the solution, the smallest singular value met and the mode where it occurred.
    """
    if g.is_zero():
        return g, float("inf"), ()
    phases = np.exp(1j * TWO_PI * (g.lattice.frequencies(g.modes) @ alpha))
    L = phases[:, None, None] * T[None, :, :] - np.eye(3)
    sigma = np.linalg.svd(L, compute_uv=False)[:, -1]
    worst = int(np.argmin(sigma))
    worst_mode = tuple(int(v) for v in g.modes[worst])
    if sigma[worst] < SINGULAR_FLOOR:
        raise SmallDivisorError(worst_mode, float(sigma[worst]), SINGULAR_FLOOR)
    coords = sl2_coordinates(g.coeffs)
    y = np.linalg.solve(L, coords[..., None])[..., 0]
    solution = FourierSeries(g.lattice, g.modes, from_sl2_coordinates(y), "matrix")
    return solution, float(sigma[worst]), worst_mode


def log_conjugated(
    A: np.ndarray, f: FourierSeries, Y: FourierSeries, alpha: np.ndarray, radius: int
) -> FourierSeries:
    """log(A^-1 e^{-Y(theta+alpha)} A e^{f(theta)} e^{Y(theta)}) through degree three."""
    a_inv = inv_sl2(A)
    y_hat = Y.shift(alpha).map_coefficients(lambda c: a_inv @ c @ A)
    inner = series_bch(-y_hat, f, radius)
    return series_bch(inner, Y, radius)


def eliminate_nonresonant(
    A: np.ndarray,
    f: FourierSeries,
    alpha: float | Sequence[float],
    eta: float,
    p: GevreyParams,
    controls: KamControls | None = None,
    window: float = float("inf"),
    rotated: bool = False,
) -> Elimination:
    """Conjugate the non-resonant modes of f away by e^Y.

    Y solves the fixed point Pi_nr log(A^-1 e^{-Y(.+alpha)} A e^f e^Y) = 0 by quasi-Newton
    steps with the linearized operator frozen at Y = 0. `rotated` selects the eta floor of the
    near-identity regime used after a Z rotation.
    """
    controls = controls or KamControls()
    a = as_frequency(alpha)
    A = np.real(np.asarray(A, dtype=float))
    sets = ResonanceSets.for_matrix(A, a, eta, window)
    eps = f.gevrey_norm(p)
    zero = FourierSeries.zero(f.lattice, "matrix")
    if eps == 0.0:
        return Elimination(zero, f, sets, 0.0, 0.0, 0, 0.0, sets.eta_tilde(A), float("inf"))

    floor = 0.5 * elimination_eta(A, eps, controls, rotated)
    if eta < floor:
        raise SmallnessGateError("eta-floor", floor, eta)

    T = ad_matrix(A)
    reach = f.support_radius if not np.isfinite(window) else max(f.support_radius, int(window))
    keep = 2 * reach + controls.fit_buffer
    Y = zero
    min_divisor = float("inf")
    update = float("inf")
    for iteration in range(1, controls.fp_max_iter + 1):
        G = log_conjugated(A, f, Y, a, keep)
        increment, sigma, _ = solve_modes(G.project(sets.eliminable), T, a)
        min_divisor = min(min_divisor, sigma)
        Y = (Y + increment).prune(controls.underflow)
        update = increment.max_coefficient()
        scale = max(Y.max_coefficient(), controls.underflow)
        log.debug(f"ELIM: [{iteration}] update={update:.3e} |Y|max={scale:.3e}")
        if update <= controls.fp_tol * scale or update <= controls.underflow:
            break
    else:
        raise EliminationError(
            f"fixed point not reached in {controls.fp_max_iter} iterations", update
        )

    G = log_conjugated(A, f, Y, a, keep).prune(controls.underflow)
    f_re = G.project(sets.resonant)
    residual = conjugation_residual(a, A, f, Conjugacy.exp(Y), A, f_re)
    y_norm, re_norm = Y.gevrey_norm(p), f_re.gevrey_norm(p)
    log.info(
        f"ELIM: eta={eta:.3e} eps={eps:.3e} |Y|={y_norm:.3e} |f_re|={re_norm:.3e} "
        f"iterations={iteration} residual={residual:.3e}"
    )
    check_contract("elimination |Y| <= eps^(1/2)", y_norm, eps**0.5)
    check_contract("elimination |f_re| <= 2 eps", re_norm, 2.0 * eps)
    check_contract("elimination residual", residual, controls.residual_tol)
    return Elimination(
        Y, f_re, sets, eps, residual, iteration, update, sets.eta_tilde(A), min_divisor
    )
