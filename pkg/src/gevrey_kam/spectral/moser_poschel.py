from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Literal, Sequence

import numpy as np

from gevrey_kam.analysis.arithmetic import DiophantineParams, as_frequency
from gevrey_kam.analysis.fourier import TWO_PI, FourierSeries, GevreyParams, series_product
from gevrey_kam.analysis.grid import SampleGrid
from gevrey_kam.analysis.lie import algebra_normal_form, canonical_norm, exp_real
from gevrey_kam.config import KamControls, RotationControls, UHControls
from gevrey_kam.errors import GevreyKamError, SmallnessGateError, check_contract
from gevrey_kam.kam.conjugacy import Conjugacy
from gevrey_kam.kam.elimination import ad_matrix, solve_modes
from gevrey_kam.kam.endgames import reduce_rational
from gevrey_kam.spectral.gaps import GapRecord
from gevrey_kam.spectral.schrodinger import SchrodingerProblem, schrodinger_cocycle

log = logging.getLogger(__name__)

EdgeKind = Literal["open", "collapsed", "inconclusive"]

COLLAPSE_FLOOR = 1e-14
DET_TOL = 1e-12
FIT_BUFFER = 6
MAX_ORDER = 60

_UNITS = np.eye(4).reshape(4, 2, 2)


def averaging_constant(gamma: float, tau: float, R: float, nu: float) -> float:
    """D_R = sup_{n != 0} 4 gamma^-3 |n|^{3 tau} e^{-(R/2)(2 pi |n|)^nu}.

    log of the summand is unimodal in |n| with its maximum at
    x* = (6 tau / (R nu (2 pi)^nu))^(1/nu), so only the integers around x* compete.
    """
    x_star = (6.0 * tau / (R * nu * TWO_PI**nu)) ** (1.0 / nu)
    candidates = {1.0, max(1.0, np.floor(x_star)), max(1.0, np.ceil(x_star))}
    logs = [
        np.log(4.0) - 3.0 * np.log(gamma) + 3.0 * tau * np.log(n) - R / 2.0 * (TWO_PI * n) ** nu
        for n in candidates
    ]
    with np.errstate(over="ignore"):
        return float(np.exp(max(logs)))


def _entry(Z: FourierSeries, i: int, j: int) -> FourierSeries:
    return Z.map_coefficients(lambda c: c[:, i, j], "scalar-complex")


def _mean(f: FourierSeries) -> float:
    return float(np.real(f.average()))


@dataclass(frozen=True)
class MoserPoschelData:
    """Averages of the first row of Z and the constant part b0 - delta b1 they produce."""

    c: float
    z11sq: float
    z11z12: float
    z12sq: float
    b0: np.ndarray
    b1: np.ndarray
    M: FourierSeries

    @classmethod
    def of(cls, Z: FourierSeries, c: float) -> MoserPoschelData:
        z11, z12 = _entry(Z, 0, 0), _entry(Z, 0, 1)
        sq11 = series_product(z11, z11)
        cross = series_product(z11, z12)
        sq12 = series_product(z12, z12)
        lattice = Z.lattice
        pieces = [(cross, 0), (sq12, 1), (-sq11, 2), (-cross, 3)]
        M = FourierSeries.zero(lattice, "matrix")
        for entry, unit in pieces:
            M = M + series_product(entry, FourierSeries.constant(lattice, _UNITS[unit], "matrix"))
        p, m, q = _mean(sq11), _mean(cross), _mean(sq12)
        b0 = np.array([[0.0, c], [0.0, 0.0]])
        b1 = np.array([[m - c * p / 2.0, -c * m + q], [-p, -m + c * p / 2.0]])
        return cls(c, p, m, q, b0, b1, M.prune(0.0))

    @property
    def gram(self) -> float:
        """[z11^2][z12^2] - [z11 z12]^2."""
        return self.z11sq * self.z12sq - self.z11z12**2

    @property
    def d_linear(self) -> float:
        return -self.c * self.z11sq

    @property
    def d_quadratic(self) -> float:
        return self.gram - self.c**2 * self.z11sq**2 / 4.0

    def d(self, delta: float) -> float:
        """det(b0 - delta b1) in closed form."""
        return delta * self.d_linear + delta**2 * self.d_quadratic

    def P(self) -> FourierSeries:
        """P = B M with B = (1, c; 0, 1), the first-order energy derivative after conjugation."""
        B = np.array([[1.0, self.c], [0.0, 1.0]])
        return self.M.map_coefficients(lambda m: B @ m)


def _high_exp(b: np.ndarray, order: int = 3) -> np.ndarray:
    """sum_{k >= order} b^k / k!."""
    out = np.zeros((2, 2))
    term = np.eye(2)
    for k in range(1, MAX_ORDER):
        term = term @ b / k
        if k < order:
            continue
        out = out + term
        if float(np.max(np.abs(term))) <= 1e-18 * max(1.0, float(np.max(np.abs(out)))):
            break
    return out


@dataclass(frozen=True)
class AveragingStep:
    """Z~(theta+alpha)^-1 (B - delta P) Z~(theta) = e^{b0 - delta b1} + delta^2 P1(theta)."""

    Z_tilde: Conjugacy
    data: MoserPoschelData
    delta: float
    R: float
    D_R: float
    Z_norm: float
    gate: float
    d_value: float
    Z_deviation: float
    P1: FourierSeries
    P1_norm: float
    P1_bound: float

    @property
    def b(self) -> np.ndarray:
        return self.data.b0 - self.delta * self.data.b1


def _as_series(Z: FourierSeries | Conjugacy) -> FourierSeries:
    return Z.fit() if isinstance(Z, Conjugacy) else Z


def moser_poschel_step(
    Z: FourierSeries | Conjugacy,
    c: float,
    delta: float,
    R: float,
    alpha: float | Sequence[float],
    dioph: DiophantineParams,
    nu: float,
) -> AveragingStep:
    """One averaging step for B - delta P with B = (1, c; 0, 1).

    Y solves B^-1 Y(.+alpha) B - Y = G - [G] with G = -delta B^-1 P, and Z~ = e^Y. The
    remainder P1 is summed order by order in Y on a grid, so nothing of size delta^2 is
    obtained by cancellation.
    """
    a = as_frequency(alpha)
    Zs = _as_series(Z)
    pR = GevreyParams(nu, R)
    z_norm = Zs.gevrey_norm(pR)
    D = averaging_constant(dioph.gamma, dioph.tau, R, nu)
    gate = 1.0 / (4.0 * D * z_norm**2) if z_norm > 0.0 else float("inf")
    if not 0.0 < delta < gate:
        raise SmallnessGateError("averaging", delta, gate)

    data = MoserPoschelData.of(Zs, c)
    cs_gap = data.z11z12**2 - data.z11sq * data.z12sq
    cs_scale = 1e-12 * max(1.0, data.z11sq * data.z12sq)
    check_contract("Cauchy-Schwarz on averages", cs_gap, cs_scale)
    b = data.b0 - delta * data.b1
    d_closed = data.d(delta)
    check_contract("d(delta) = det(b0 - delta b1)", abs(d_closed - np.linalg.det(b)), DET_TOL)

    B = np.array([[1.0, c], [0.0, 1.0]])
    P = data.P()
    mean_gap = np.real(P.average()) - data.b1 - (data.b0 @ data.b1 + data.b1 @ data.b0) / 2.0
    check_contract(
        "[P] = b1 + (b0 b1 + b1 b0)/2",
        float(canonical_norm(mean_gap)),
        1e-12 * max(1.0, P.max_coefficient()),
    )
    G1 = -data.M
    G1 = G1 - FourierSeries.constant(G1.lattice, G1.average(), "matrix")
    Y1, _, _ = solve_modes(G1.prune(0.0), ad_matrix(B), a)
    Y = (Y1 * delta).symmetrize()

    radius = 3 * max(P.support_radius, 1) + FIT_BUFFER
    grid = SampleGrid.for_radius(Zs.lattice, radius)
    theta = grid.points
    y = np.real(Y.evaluate(theta))
    y_hat = np.real(Y.evaluate(theta + a))
    P_vals = np.real(P.evaluate(theta))
    left = [np.broadcast_to(np.eye(2), y.shape).copy()]
    right = [left[0].copy()]
    remainder = np.zeros_like(y)
    for k in range(2, MAX_ORDER):
        while len(left) <= k:
            n = len(left)
            left.append(left[-1] @ (-y_hat) / n)
            right.append(right[-1] @ y / n)
        first = sum(left[m] @ B @ right[k - m] for m in range(k + 1))
        second = sum(left[m] @ P_vals @ right[k - 1 - m] for m in range(k))
        term = first / delta**2 - second / delta
        remainder = remainder + term
        if float(np.max(np.abs(term))) <= 1e-17 * max(1.0, float(np.max(np.abs(remainder)))):
            break
    constant = -data.b1 @ data.b1 / 2.0 - _high_exp(b) / delta**2
    P1 = grid.fit(remainder + constant, radius, "matrix").symmetrize()
    half = GevreyParams(nu, R / 2.0)
    P1_norm = P1.gevrey_norm(half)
    P1_bound = 8.0 * (2.0 + D) ** 2 * z_norm**4 + c**2 * z_norm**2 / delta

    Z_tilde = Conjugacy.exp(Y)
    deviation_values = exp_real(y) - np.eye(2)
    Z_deviation = grid.fit(deviation_values, radius, "matrix").gevrey_norm(half)
    check_contract("|Z~ - Id|_{R/2} < 1", Z_deviation, 1.0)
    check_contract("|P1|_{R/2} <= 8(2 + D_R)^2 |Z|^4 + c^2 |Z|^2 / delta", P1_norm, P1_bound)
    log.info(
        f"MP: delta={delta:.3e} c={c:.3e} d={d_closed:.3e} |Z|_R={z_norm:.3e} D_R={D:.3e} "
        f"|Z~-Id|={Z_deviation:.3e} |P1|={P1_norm:.3e} (bound {P1_bound:.3e})"
    )
    return AveragingStep(
        Z_tilde,
        data,
        delta,
        R,
        D,
        z_norm,
        gate,
        d_closed,
        Z_deviation,
        P1,
        P1_norm,
        P1_bound,
    )


# gap edges


@dataclass(frozen=True)
class EdgeVerdict:
    k: tuple[int, ...]
    energy: float
    verdict: EdgeKind
    reason: str = ""
    c: float = float("nan")
    chi: float = float("nan")
    delta1: float = float("nan")
    R: float = float("nan")
    D_R: float = float("nan")
    Z_norm: float = float("nan")
    d_delta1: float = float("nan")
    rho_lower: float = float("nan")
    diagnostics: dict[str, Any] = field(default_factory=dict)

    @property
    def length_bound(self) -> float | None:
        """An open edge certifies |G_k| <= delta1."""
        return self.delta1 if self.verdict == "open" else None

    def to_row(self) -> dict[str, Any]:
        return {
            "k": " ".join(str(v) for v in self.k),
            "E": self.energy,
            "verdict": self.verdict,
            "reason": self.reason,
            "c": self.c,
            "chi": self.chi,
            "delta1": self.delta1,
            "R": self.R,
            "D_R": self.D_R,
            "Z_norm": self.Z_norm,
            "d_delta1": self.d_delta1,
            "rho_lower": self.rho_lower,
        }


def edge_parameters(r0: float, r: float, R: float | None = None) -> tuple[float, float]:
    """chi = (r~ - r)/(6 r~) with r~ = (r0 + r)/2, and R defaulting to chi/(1 - chi) r/8."""
    r_tilde = (r0 + r) / 2.0
    chi = (r_tilde - r) / (6.0 * r_tilde)
    return chi, R if R is not None else chi / (1.0 - chi) * r / 8.0


def edge_verdict(
    Z: FourierSeries | Conjugacy,
    c: float,
    alpha: float | Sequence[float],
    p0: GevreyParams,
    r: float,
    dioph: DiophantineParams,
    chi_kappa: float = 0.1,
    R: float | None = None,
    k: Sequence[int] = (),
    energy: float = float("nan"),
) -> EdgeVerdict:
    """Run the averaging argument at a parabolic edge with constant (1, c; 0, 1).

    The verdict is open when the rotation number of e^{b0 - delta1 b1} + delta1^2 P1 is
    certified away from zero, which bounds the gap length by delta1 = c^(1 - chi).
    """
    label = tuple(int(v) for v in k)
    if abs(c) <= COLLAPSE_FLOOR:
        log.info(f"MP: gap {label} collapsed, c={c:.3e}")
        return EdgeVerdict(label, energy, "collapsed", "c below floor", c)
    chi, R = edge_parameters(p0.r, r, R)
    base = {"k": label, "energy": energy, "c": c, "chi": chi, "R": R}

    def inconclusive(reason: str, **extra: Any) -> EdgeVerdict:
        log.info(f"MP: gap {label} inconclusive: {reason}")
        return EdgeVerdict(verdict="inconclusive", reason=reason, **base, **extra)

    if not 0.0 < c < 1.0:
        return inconclusive(f"parabolic coefficient c={c:.3e} outside (0, 1)")
    delta1 = c ** (1.0 - chi)
    Zs = _as_series(Z)
    try:
        step = moser_poschel_step(Zs, c, delta1, R, alpha, dioph, p0.nu)
    except SmallnessGateError as e:
        return inconclusive(f"averaging gate: delta1={delta1:.3e} >= {e.bound:.3e}", delta1=delta1)
    except GevreyKamError as e:
        return inconclusive(f"{type(e).__name__}: {e}", delta1=delta1)

    data = step.data
    z_sup = SampleGrid.for_radius(Zs.lattice, Zs.support_radius + 4).sup_norm(Zs)
    b = step.b
    diagnostics: dict[str, Any] = {
        "kappa": chi_kappa,
        "kappa_condition": c ** (chi_kappa / 2.0) * z_sup <= 0.25,
        "average_ratio": data.z11sq / data.gram if data.gram > 0 else float("inf"),
        "average_ratio_bound": 0.5 * c ** (-chi_kappa),
        "gram": data.gram,
        "gram_bound": 8.0 * c ** (2.0 * chi_kappa),
        "d_above_quarter_9c2": step.d_value >= 9.0 * c**2 / 4.0,
        "b_norm": float(canonical_norm(b)),
        "b_norm_bound": c + delta1 * (1.0 + c) * step.Z_norm**2,
        "Z_deviation": step.Z_deviation,
        "P1_norm": step.P1_norm,
        "P1_bound": step.P1_bound,
    }
    numbers = {
        "delta1": delta1,
        "D_R": step.D_R,
        "Z_norm": step.Z_norm,
        "d_delta1": step.d_value,
        "diagnostics": diagnostics,
    }
    if step.d_value <= 0.0:
        return inconclusive(f"d(delta1) = {step.d_value:.3e} <= 0", **numbers)

    conj, omega = algebra_normal_form(b)
    frame = float(canonical_norm(conj))
    diagnostics["frame_norm"] = frame
    diagnostics["frame_bound"] = 2.0 * (float(canonical_norm(b)) / np.sqrt(step.d_value)) ** 0.5
    rho_main = abs(omega) / TWO_PI
    perturbation = delta1**2 * frame**2 * step.P1_norm
    rho_lower = rho_main - perturbation
    diagnostics["rho_main"] = rho_main
    diagnostics["rho_perturbation"] = perturbation
    if not rho_lower > 0.0:
        return inconclusive(
            f"rotation lower bound {rho_main:.3e} - {perturbation:.3e} is not positive",
            rho_lower=rho_lower,
            **numbers,
        )
    log.info(f"MP: gap {label} open, |G| <= delta1 = {delta1:.3e} (rho >= {rho_lower:.3e})")
    return EdgeVerdict(verdict="open", rho_lower=rho_lower, **base, **numbers)


def gap_edge_openness(
    prob: SchrodingerProblem,
    gap: GapRecord,
    r: float,
    dioph: DiophantineParams,
    chi_kappa: float = 0.1,
    R: float | None = None,
    kam: KamControls | None = None,
    rotation: RotationControls | None = None,
    uh: UHControls | None = None,
    label_tol: float = 1e-5,
    seed: int = 0,
) -> EdgeVerdict:
    """Reduce S_{E_plus} to (1, c; 0, 1) with degree k and judge the edge from there."""
    cocycle = schrodinger_cocycle(prob, gap.E_plus)
    assert cocycle.A0 is not None and cocycle.f is not None
    try:
        red = reduce_rational(
            cocycle.A0,
            cocycle.f,
            prob.alpha,
            gap.k,
            prob.p,
            r,
            dioph,
            kam,
            rotation,
            uh,
            label_tol,
            seed,
        )
    except GevreyKamError as e:
        reason = f"reduction failed: {type(e).__name__}: {e}"
        log.warning(f"MP: gap {gap.k} at E={gap.E_plus:.10g}: {reason}")
        return EdgeVerdict(gap.k, gap.E_plus, "inconclusive", reason)
    if abs(red.defect) > 0.0:
        log.info(f"MP: gap {gap.k} normal form lower entry {red.defect:.3e} dropped")
    return edge_verdict(
        red.Z_tilde,
        red.phi,
        prob.alpha,
        prob.p,
        r,
        dioph,
        chi_kappa,
        R,
        gap.k,
        gap.E_plus,
    )
