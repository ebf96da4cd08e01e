from __future__ import annotations

import numpy as np
import pytest

from gevrey_kam.analysis.arithmetic import torus_distance
from gevrey_kam.analysis.cocycle import (
    Cocycle,
    degree,
    degree_shift_check,
    is_uniformly_hyperbolic,
    iterate,
    lyapunov_exponent,
    rotation_number,
)
from gevrey_kam.analysis.fourier import FourierSeries, FrequencyLattice
from gevrey_kam.analysis.lie import H, I2, rotation
from gevrey_kam.config import RotationControls
from gevrey_kam.errors import DegenerateColumnError, NonHomotopicError


def _schrodinger(alpha: float, energy: float, lam: float) -> Cocycle:
    lattice = FrequencyLattice(1)
    coeffs = {
        (0,): np.array([[energy, -1.0], [1.0, 0.0]]),
        (1,): np.array([[-lam, 0.0], [0.0, 0.0]]),
        (-1,): np.array([[-lam, 0.0], [0.0, 0.0]]),
    }
    return Cocycle(np.array([alpha]), FourierSeries.from_mapping(lattice, coeffs, "matrix"))


def _z_loop(n: int) -> FourierSeries:
    """Z_n = R_{n theta / 2} as a series on 2T."""
    lattice = FrequencyLattice(1, half_period=True)
    plus = np.array([[1.0, -1j], [1j, 1.0]]) / 2.0
    return FourierSeries(lattice, [[n], [-n]], [plus, plus.conj()], "matrix")


def _wobbly(alpha: float) -> Cocycle:
    lattice = FrequencyLattice(1)
    f = FourierSeries.from_mapping(
        lattice, {(1,): 0.03 * H, (-1,): 0.03 * H, (2,): 0.01j * H, (-2,): -0.01j * H}, "matrix"
    )
    return Cocycle.factorized([alpha], rotation(0.3), f)


def test_iterate_identity_and_powers(golden: float) -> None:
    a = np.array([[2.0, 1.0], [1.0, 1.0]])
    c = Cocycle.constant(golden, a)
    np.testing.assert_allclose(iterate(c, [0.2], 0), I2)
    np.testing.assert_allclose(iterate(c, [0.2], 3), a @ a @ a, atol=1e-12)


def test_iterate_cocycle_law(golden: float, rng: np.random.Generator) -> None:
    c = _schrodinger(golden, 0.4, 0.7)
    theta = rng.random((6, 1))
    five = iterate(c, theta, 5)
    split = iterate(c, theta + 3 * golden, 2) @ iterate(c, theta, 3)
    np.testing.assert_allclose(five, split, atol=1e-9)
    back = iterate(c, theta + 4 * golden, -4) @ iterate(c, theta, 4)
    np.testing.assert_allclose(back, np.broadcast_to(I2, back.shape), atol=1e-9)


def test_unimodular(golden: float) -> None:
    assert _schrodinger(golden, 1.1, 0.3).unimodularity_defect() < 1e-10
    assert _wobbly(golden).unimodularity_defect() < 1e-10


def test_lyapunov_of_rotation_vanishes(golden: float) -> None:
    est = lyapunov_exponent(Cocycle.constant(golden, rotation(0.17)), 2000, 4)
    assert abs(est.value) < 2e-3


def test_lyapunov_of_hyperbolic_constant(golden: float) -> None:
    est = lyapunov_exponent(Cocycle.constant(golden, np.diag([2.0, 0.5])), 500, 4)
    assert est.value == pytest.approx(np.log(2.0), abs=1e-6)


@pytest.mark.slow
def test_lyapunov_supercritical_almost_mathieu(golden: float) -> None:
    est = lyapunov_exponent(_schrodinger(golden, 0.0, 2.0), 20000, 8)
    assert est.value == pytest.approx(np.log(2.0), abs=5e-2)


def test_rotation_number_of_rotations(rng: np.random.Generator) -> None:
    controls = RotationControls(n_iter=64, n_samples=2)
    for _ in range(20):
        alpha, phi = rng.random(), rng.random()
        est = rotation_number(Cocycle.constant(alpha, rotation(phi)), controls)
        assert torus_distance(est.value - phi) < 1e-10
    assert rotation_number(Cocycle.constant(0.3, I2), controls).value == pytest.approx(0.0)


def test_free_cocycle_rotation_is_clockwise(golden: float) -> None:
    # eigen-angle 0.2 of (E, -1; 1, 0) at E = 2 cos(0.4 pi), measured clockwise as -0.2
    energy = 2.0 * np.cos(2.0 * np.pi * 0.2)
    est = rotation_number(_schrodinger(golden, energy, 0.0), RotationControls(n_iter=2000))
    assert torus_distance(est.value + 0.2) < 1e-6


def test_rotation_number_perturbation_bound(golden: float) -> None:
    c = _wobbly(golden)
    theta = np.linspace(0, 1, 256, endpoint=False)[:, None]
    sup = float(np.max(np.abs(c.matrices(theta) - rotation(0.3))))
    est = rotation_number(c, RotationControls(n_iter=4000))
    assert torus_distance(est.value - 0.3) < 2 * sup


def test_rotation_number_refuses_nonzero_degree(golden: float) -> None:
    lattice = FrequencyLattice(1)
    plus = np.array([[1.0, -1j], [1j, 1.0]]) / 2.0
    loop = FourierSeries(lattice, [[1], [-1]], [plus, plus.conj()], "matrix")
    with pytest.raises(NonHomotopicError):
        rotation_number(Cocycle(np.array([golden]), loop))


def test_degree_cases() -> None:
    lattice = FrequencyLattice(1, half_period=True)
    assert degree(FourierSeries.constant(lattice, I2, "matrix")) == (0,)
    assert degree(_z_loop(1)) == (1,)
    assert degree(_z_loop(-3)) == (-3,)


def test_degree_is_additive() -> None:
    from gevrey_kam.analysis.fourier import series_product

    assert degree(series_product(_z_loop(2), _z_loop(-5))) == (-3,)


def test_degree_degenerate_column() -> None:
    lattice = FrequencyLattice(1)
    singular = FourierSeries.constant(lattice, np.array([[0.0, 1.0], [0.0, 0.0]]), "matrix")
    with pytest.raises(DegenerateColumnError):
        degree(singular)


def test_uniform_hyperbolicity_cases(golden: float) -> None:
    assert is_uniformly_hyperbolic(Cocycle.constant(golden, np.diag([2.0, 0.5]))).verdict == "UH"
    assert is_uniformly_hyperbolic(Cocycle.constant(golden, rotation(0.3))).verdict == "not-UH"
    free_outside = Cocycle.constant(golden, np.array([[3.0, -1.0], [1.0, 0.0]]))
    assert is_uniformly_hyperbolic(free_outside).verdict == "UH"


def test_uniform_hyperbolicity_far_from_spectrum(golden: float) -> None:
    for energy in (-3.0, 2.9, 4.5):
        assert is_uniformly_hyperbolic(_schrodinger(golden, energy, 0.1)).verdict == "UH"


def test_degree_shift_of_rotation_number(golden: float) -> None:
    controls = RotationControls(n_iter=20000, n_samples=2)
    report = degree_shift_check(_wobbly(golden), _z_loop(1), controls)
    assert report.degree == (1,)
    assert report.discrepancy < 2.0 / controls.n_iter
