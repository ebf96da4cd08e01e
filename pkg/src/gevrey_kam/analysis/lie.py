from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from gevrey_kam.errors import (
    BCHConvergenceError,
    LatticeMismatchError,
    NotEllipticError,
    PrincipalBranchError,
)

Classification = Literal["elliptic", "parabolic", "hyperbolic"]

TWO_PI = 2.0 * np.pi

I2 = np.eye(2)
J = np.array([[0.0, 1.0], [-1.0, 0.0]])
H = np.array([[1.0, 0.0], [0.0, -1.0]])
S = np.array([[0.0, 1.0], [1.0, 0.0]])
N_LOWER = np.array([[0.0, 0.0], [1.0, 0.0]])

# M J M^-1 = diag(i, -i); conjugation into su(1,1)
M = np.array([[1.0, -1.0j], [1.0, 1.0j]]) / (1.0 + 1.0j)
M_INV = np.linalg.inv(M)

PARABOLIC_TOL = 1e-10
BCH_RADIUS = 0.25
_SERIES_SWITCH = 1e-3


def _bch_majorant_coefficients(degree: int = 40) -> np.ndarray:
    """Taylor coefficients of -log(2 - e^s) up to `degree`."""
    u = np.zeros(degree + 1)
    fact = 1.0
    for n in range(1, degree + 1):
        fact *= n
        u[n] = 1.0 / fact
    out = np.zeros(degree + 1)
    power = np.zeros(degree + 1)
    power[0] = 1.0
    for m in range(1, degree + 1):
        power = np.convolve(power, u)[: degree + 1]
        out += power / m
    return out


BCH_MAJORANT = _bch_majorant_coefficients()


def canonical_norm(a: np.ndarray) -> np.ndarray | float:
    """2 * max |a_ij| over the trailing 2x2 axes."""
    arr = np.abs(np.asarray(a))
    out = 2.0 * arr.reshape(arr.shape[:-2] + (4,)).max(axis=-1)
    return float(out) if out.ndim == 0 else out


def commutator(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return x @ y - y @ x


def inv_sl2(a: np.ndarray) -> np.ndarray:
    """Inverse of a (batched) unimodular matrix via the adjugate."""
    a = np.asarray(a)
    out = np.empty_like(a)
    out[..., 0, 0] = a[..., 1, 1]
    out[..., 1, 1] = a[..., 0, 0]
    out[..., 0, 1] = -a[..., 0, 1]
    out[..., 1, 0] = -a[..., 1, 0]
    return out


def rotation(phi: np.ndarray | float) -> np.ndarray:
    """R_phi = exp(2 pi phi J) = (cos, sin; -sin, cos)."""
    phi = np.asarray(phi, dtype=float)
    c, s = np.cos(TWO_PI * phi), np.sin(TWO_PI * phi)
    out = np.empty(phi.shape + (2, 2))
    out[..., 0, 0] = c
    out[..., 0, 1] = s
    out[..., 1, 0] = -s
    out[..., 1, 1] = c
    return out


def z_matrix(n: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Z_n(theta) = R_{<n,theta>/2}, a loop of degree n on 2T^d."""
    return rotation(np.asarray(theta, dtype=float) @ np.asarray(n, dtype=float) / 2.0)


def to_su11(a: np.ndarray) -> np.ndarray:
    return M @ a @ M_INV


def from_su11(a: np.ndarray) -> np.ndarray:
    return M_INV @ a @ M


def is_sl2r_algebra(b: np.ndarray, tol: float = 1e-12) -> bool:
    b = np.asarray(b)
    scale = max(1.0, float(np.max(np.abs(b))))
    return bool(
        np.max(np.abs(np.imag(b))) <= tol * scale and abs(np.trace(np.real(b))) <= tol * scale
    )


def m_conjugate(b: np.ndarray) -> np.ndarray:
    """M B M^-1 for B = (x, y+z; y-z, -x) in sl(2,R), giving (iz, x-iy; x+iy, -iz)."""
    if not is_sl2r_algebra(b):
        raise LatticeMismatchError("m_conjugate expects a real trace-free matrix")
    return to_su11(np.real(np.asarray(b)))


def m_conjugate_inverse(u: np.ndarray) -> np.ndarray:
    out = from_su11(np.asarray(u, dtype=np.complex128))
    scale = max(1.0, float(np.max(np.abs(out))))
    if np.max(np.abs(out.imag)) > 1e-12 * scale:
        raise LatticeMismatchError("matrix is not in su(1,1)")
    return out.real


def sl2_coordinates(x: np.ndarray) -> np.ndarray:
    """(h, s, j) with x = h H + s S + j J, trailing axis of length 3."""
    x = np.asarray(x)
    h = x[..., 0, 0]
    s = (x[..., 0, 1] + x[..., 1, 0]) / 2.0
    j = (x[..., 0, 1] - x[..., 1, 0]) / 2.0
    return np.stack([h, s, j], axis=-1)


def from_sl2_coordinates(c: np.ndarray) -> np.ndarray:
    c = np.asarray(c)
    return c[..., 0, None, None] * H + c[..., 1, None, None] * S + c[..., 2, None, None] * J


def exp_mat(x: np.ndarray) -> np.ndarray:
    """Batched 2x2 matrix exponential, e^{t/2}(cosh(s) I + sinh(s)/s X0)."""
    x = np.asarray(x, dtype=np.complex128)
    half_trace = (x[..., 0, 0] + x[..., 1, 1]) / 2.0
    x0 = x - half_trace[..., None, None] * I2
    s = np.sqrt(-np.linalg.det(x0) + 0j)
    small = np.abs(s) < _SERIES_SWITCH
    s_safe = np.where(small, 1.0, s)
    s2 = s * s
    sinhc = np.where(small, 1.0 + s2 / 6.0 + s2 * s2 / 120.0, np.sinh(s_safe) / s_safe)
    out = np.cosh(s)[..., None, None] * I2 + sinhc[..., None, None] * x0
    return np.exp(half_trace)[..., None, None] * out


def exp_real(x: np.ndarray) -> np.ndarray:
    return np.real(exp_mat(x))


def log_mat(a: np.ndarray) -> np.ndarray:
    """Batched principal logarithm.

    Raises PrincipalBranchError when an eigenvalue lies on the closed negative real axis.
    """
    a = np.asarray(a, dtype=np.complex128)
    h = (a[..., 0, 0] + a[..., 1, 1]) / 2.0
    det = np.linalg.det(a)
    delta = np.sqrt(h * h - det + 0j)
    lam1, lam2 = h + delta, h - delta
    for lam in (lam1, lam2):
        on_axis = (lam.real <= 0.0) & (np.abs(lam.imag) <= 1e-7 * np.maximum(1.0, np.abs(lam)))
        if np.any(on_axis):
            raise PrincipalBranchError(
                "eigenvalue on the closed negative real axis, principal log undefined"
            )
    close = np.abs(delta) < _SERIES_SWITCH * np.abs(h)
    h_safe = np.where(h == 0, 1.0, h)
    x = delta / h_safe
    x2 = x * x
    b_series = (1.0 + x2 / 3.0 + x2 * x2 / 5.0 + x2 * x2 * x2 / 7.0) / h_safe
    a_series = np.log(h_safe) + 0.5 * np.log(1.0 - x2 + 0j)
    d_safe = np.where(close, 1.0, lam1 - lam2)
    log1, log2 = np.log(lam1), np.log(lam2)
    b_exact = (log1 - log2) / d_safe
    a_exact = (log1 + log2) / 2.0
    coef_a = np.where(close, a_series, a_exact)
    coef_b = np.where(close, b_series, b_exact)
    return coef_a[..., None, None] * I2 + coef_b[..., None, None] * (a - h[..., None, None] * I2)


def log_real(a: np.ndarray) -> np.ndarray:
    return np.real(log_mat(a))


def bch_remainder_bound(s: float, order: int = 3) -> float:
    """Majorant for the BCH terms of total degree > order at ||X|| + ||Y|| = s."""
    if s > BCH_RADIUS:
        raise BCHConvergenceError(f"||X|| + ||Y|| = {s:.3e} exceeds the BCH radius {BCH_RADIUS}")
    powers = s ** np.arange(BCH_MAJORANT.size)
    head = float(np.sum(BCH_MAJORANT[order + 1 :] * powers[order + 1 :]))
    ratio = s / np.log(2.0)
    tail = float(BCH_MAJORANT[-1] * powers[-1] * ratio / (1.0 - ratio))
    return head + tail


def bch(x: np.ndarray, y: np.ndarray, order: int = 3, check: bool = True) -> np.ndarray:
    """log(e^X e^Y) truncated after degree 2 or 3, batched over leading axes."""
    if order not in (2, 3):
        raise ValueError("order must be 2 or 3")
    if check:
        s = float(np.max(canonical_norm(x) + canonical_norm(y)))
        if s > BCH_RADIUS:
            raise BCHConvergenceError(
                f"||X|| + ||Y|| = {s:.3e} exceeds the BCH radius {BCH_RADIUS}"
            )
    xy = commutator(x, y)
    out = x + y + 0.5 * xy
    if order == 3:
        out = out + (commutator(x, xy) - commutator(y, xy)) / 12.0
    return out


def bch_product(x: np.ndarray, y: np.ndarray, order: int = 3) -> tuple[np.ndarray, float]:
    """Truncated BCH product of two constant matrices and a bound on what was dropped."""
    z = bch(x, y, order)
    if np.max(np.abs(commutator(x, y)), initial=0.0) == 0.0:
        return z, 0.0
    s = float(canonical_norm(x)) + float(canonical_norm(y))
    return z, bch_remainder_bound(s, order)


def classify(a: np.ndarray, tol: float = PARABOLIC_TOL) -> Classification:
    t = abs(float(np.real(np.trace(a))))
    if abs(t - 2.0) <= tol:
        return "parabolic"
    return "elliptic" if t < 2.0 else "hyperbolic"


def _complex_structure_conjugator(k: np.ndarray) -> np.ndarray:
    """P in SL(2,R) with P K P^-1 = J for K^2 = -I and K_12 > 0."""
    x = np.sqrt(-k[1, 0])
    return np.array([[x, k[0, 0] / x], [0.0, 1.0 / x]])


@dataclass(frozen=True)
class EllipticData:
    """P A P^-1 = R_xi; eigenvalues of A are e^{+-i 2 pi xi}."""

    xi: float
    P: np.ndarray

    @property
    def angle(self) -> float:
        return abs(self.xi)

    def norm_bound(self, a: np.ndarray) -> float:
        sin = abs(np.sin(TWO_PI * self.xi))
        return 16.0 * max(0.5, float(np.sqrt(float(canonical_norm(a)) / (2.0 * sin))))

    def residual(self, a: np.ndarray) -> float:
        return float(np.max(np.abs(self.P @ a @ inv_sl2(self.P) - rotation(self.xi))))


def elliptic_normal_form(a: np.ndarray) -> EllipticData:
    """Real P with det P = 1 and P A P^-1 = R_xi, xi in (-1/2, 1/2) signed like A_12."""
    a = np.real(np.asarray(a))
    kind = classify(a)
    if kind != "elliptic":
        raise NotEllipticError(kind, float(np.trace(a)))
    t = float(np.trace(a)) / 2.0
    s = float(np.sign(a[0, 1]) * np.sqrt(1.0 - t * t))
    k = (a - t * I2) / s
    xi = float(np.arctan2(s, t) / TWO_PI)
    return EllipticData(xi, _complex_structure_conjugator(k))


def algebra_normal_form(b: np.ndarray) -> tuple[np.ndarray, float]:
    """(P, omega) with P b P^-1 = omega J for b in sl(2,R) with det b > 0."""
    b = np.real(np.asarray(b))
    det = float(np.linalg.det(b))
    if det <= 0.0:
        kind = "parabolic" if det == 0.0 else "hyperbolic"
        raise NotEllipticError(kind, 2.0 * float(np.cosh(np.sqrt(max(-det, 0.0)))))
    omega = float(np.sign(b[0, 1]) * np.sqrt(det))
    return _complex_structure_conjugator(b / omega), omega


def ad_eigenvalues(a: np.ndarray) -> np.ndarray:
    """Eigenvalues {1, lambda^2, lambda^-2} of Ad_A on sl(2)."""
    lam = np.linalg.eigvals(np.asarray(a, dtype=np.complex128))[0]
    return np.array([1.0 + 0j, lam**2, lam**-2])


def is_sl2r(a: np.ndarray, tol: float = 1e-10) -> bool:
    a = np.asarray(a)
    return bool(np.max(np.abs(np.imag(a))) <= tol and abs(np.linalg.det(np.real(a)) - 1.0) <= tol)
