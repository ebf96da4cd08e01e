from __future__ import annotations

import numpy as np
import pytest

from gevrey_kam.analysis.arithmetic import DiophantineParams
from gevrey_kam.analysis.fourier import FourierSeries, FrequencyLattice, GevreyParams
from gevrey_kam.analysis.lie import H, I2, J, S, exp_real, inv_sl2, log_real, rotation, z_matrix
from gevrey_kam.config import KamControls
from gevrey_kam.errors import (
    BCHConvergenceError,
    ConfigError,
    DimensionError,
    MultipleResonanceError,
    SmallDivisorError,
    SmallnessGateError,
)
from gevrey_kam.kam.conjugacy import Conjugacy, conjugation_residual, rotate_series
from gevrey_kam.kam.elimination import (
    ad_matrix,
    eliminate_nonresonant,
    series_bch,
    solve_modes,
)
from gevrey_kam.kam.resonance import (
    ResonanceSets,
    effective_window,
    find_resonance,
    resonance_window,
)
from gevrey_kam.kam.step import kam_step

P0 = GevreyParams(0.5, 1.0)
DIOPH = DiophantineParams(0.2, 3.5)
DESK = KamControls(eta_prefactor=1e-3, sigma=0.5, enforce_gates=False)


def _cos_series(matrix: np.ndarray, amplitude: float, mode: int = 1) -> FourierSeries:
    lattice = FrequencyLattice(1)
    half = amplitude / 2.0 * matrix
    return FourierSeries.from_mapping(lattice, {(mode,): half, (-mode,): half}, "matrix")


def _theta(n: int = 32, period: float = 1.0) -> np.ndarray:
    return (np.arange(n) * period / n)[:, None] + 0.013


# resonance bookkeeping


def test_resonance_window_cases() -> None:
    assert resonance_window(np.exp(-2.0), 5.0, 1.0, 0.5) == pytest.approx(1.0 / (2 * np.pi))
    assert resonance_window(np.exp(-1.0), 3.0, 1.0, 1.0) == pytest.approx(1.0 / (2 * np.pi))


@pytest.mark.parametrize("eps, r, r_plus", [(1.5, 1.0, 0.5), (0.1, 1.0, 1.0), (0.1, 0.5, 1.0)])
def test_resonance_window_rejects_bad_input(eps: float, r: float, r_plus: float) -> None:
    with pytest.raises(ConfigError):
        resonance_window(eps, r, r_plus, 0.5)


def test_find_resonance_none_and_unique(golden: float) -> None:
    assert find_resonance(0.3, golden, 3, 1e-3) is None
    assert find_resonance(0.3, golden, 3, 0.02) == (1,)
    assert find_resonance(0.3, golden, 0.5, 0.5) is None


def test_find_resonance_rejects_two_sites(golden: float) -> None:
    with pytest.raises(MultipleResonanceError) as info:
        find_resonance(0.25, golden, 2, 0.118034 / 0.9)
    assert sorted(info.value.sites) == [(-1,), (1,)]


def test_symmetric_sets_match_brute_force(golden: float) -> None:
    xi, eta = 0.17, 0.3
    sets = ResonanceSets.for_rotation(xi, golden, eta)
    modes = np.arange(-40, 41)[:, None]
    x = modes[:, 0] * golden
    expected = (
        (2 * np.abs(np.sin(np.pi * x)) >= eta)
        & (2 * np.abs(np.sin(np.pi * (x - 2 * xi))) >= eta)
        & (2 * np.abs(np.sin(np.pi * (x + 2 * xi))) >= eta)
    )
    np.testing.assert_array_equal(sets.symmetric(modes), expected)
    from_matrix = ResonanceSets.for_matrix(rotation(xi), golden, eta)
    np.testing.assert_array_equal(from_matrix.symmetric(modes), expected)


def test_eliminable_excludes_zero_and_window(golden: float) -> None:
    sets = ResonanceSets.for_rotation(0.17, golden, 1e-6, window=5)
    modes = np.array([[0], [1], [5], [6], [-6]])
    np.testing.assert_array_equal(sets.eliminable(modes), [False, True, True, False, False])
    np.testing.assert_array_equal(sets.resonant(modes), [True, False, False, True, True])


def test_effective_window_caps() -> None:
    controls = KamControls(max_modes=8, mode_ceiling=48)
    assert effective_window(1000.0, 0, controls) == 8
    assert effective_window(1000.0, 3, controls) == 48
    assert effective_window(5.7, 3, controls) == 5
    assert effective_window(1000.0, 0, controls, support=19) == 19


# conjugacies


def test_rotate_series_matches_pointwise(random_sl2r_series) -> None:
    f = random_sl2r_series(0.1)
    theta = _theta(period=2.0)
    for n in ((1,), (-2,), (3,)):
        rotated = rotate_series(f, n)
        z = z_matrix(np.array(n), theta)
        expected = inv_sl2(z) @ f.evaluate(theta) @ z
        np.testing.assert_allclose(rotated.evaluate(theta), expected, atol=1e-12)
        assert rotated.lattice == f.lattice


def test_conjugacy_composition_and_degree() -> None:
    c = rotation(0.1) @ exp_real(0.2 * H)
    y = _cos_series(S, 0.05)
    b = Conjugacy.constant(c, 1) @ Conjugacy.rotation((2,)) @ Conjugacy.exp(y)
    assert b.degree == (2,)
    assert b.lattice.half_period
    theta = _theta(period=2.0)
    expected = c @ z_matrix(np.array([2]), theta) @ exp_real(y.evaluate(theta))
    np.testing.assert_allclose(b.evaluate(theta), expected, atol=1e-12)


def test_conjugacy_identities() -> None:
    lattice = FrequencyLattice(1)
    assert Conjugacy.rotation((0,)).is_identity()
    assert Conjugacy.exp(FourierSeries.zero(lattice, "matrix")).is_identity()
    assert not Conjugacy.identity(1).lattice.half_period
    assert Conjugacy.identity(1).exp_deviation_bound(P0) == 0.0
    assert Conjugacy.rotation((1,)).exp_deviation_bound(P0) == float("inf")
    with pytest.raises(DimensionError):
        Conjugacy.identity(1) @ Conjugacy.identity(2)


def test_conjugacy_fit_reproduces_rotation() -> None:
    fitted = Conjugacy.rotation((1,)).fit()
    theta = _theta(period=2.0)
    expected = z_matrix(np.array([1]), theta)
    np.testing.assert_allclose(np.real(fitted.evaluate(theta)), expected, atol=1e-12)


def test_conjugation_residual_of_exact_rotation(golden: float) -> None:
    # Z_1 turns the constant R_{alpha/2} into the identity
    zero = FourierSeries.zero(FrequencyLattice(1), "matrix")
    a = np.array([golden])
    res = conjugation_residual(a, rotation(golden / 2), zero, Conjugacy.rotation((1,)), I2, zero)
    assert res < 1e-12


# coefficient-space BCH and the cohomological solve


def test_series_bch_commuting_and_constant() -> None:
    lattice = FrequencyLattice(1)
    x = FourierSeries.constant(lattice, 1e-3 * H, "matrix")
    y = FourierSeries.constant(lattice, 2e-3 * H, "matrix")
    assert series_bch(x, y).max_difference(x + y) < 1e-18
    y = FourierSeries.constant(lattice, 1e-5 * S, "matrix")
    x = FourierSeries.constant(lattice, 1e-5 * H, "matrix")
    expected = log_real(exp_real(1e-5 * H) @ exp_real(1e-5 * S))
    np.testing.assert_allclose(series_bch(x, y).average(), expected, atol=1e-15)


def test_series_bch_radius_guard() -> None:
    lattice = FrequencyLattice(1)
    big = FourierSeries.constant(lattice, 0.2 * H, "matrix")
    with pytest.raises(BCHConvergenceError):
        series_bch(big, big)


def test_solve_modes_inverts_twisted_operator(golden: float) -> None:
    A = rotation(0.17)
    a = np.array([golden])
    g = _cos_series(H + 0.5 * J, 1e-3, mode=2)
    y, sigma, _ = solve_modes(g, ad_matrix(A), a)
    A_inv = inv_sl2(A)
    lhs = y.shift(a).map_coefficients(lambda c: A_inv @ c @ A) - y
    assert lhs.max_difference(g) < 1e-15
    assert sigma > 0.0


def test_solve_modes_reports_zero_divisor(golden: float) -> None:
    g = FourierSeries.constant(FrequencyLattice(1), 1e-3 * H, "matrix")
    with pytest.raises(SmallDivisorError) as info:
        solve_modes(g, ad_matrix(I2), np.array([golden]))
    assert info.value.mode == (0,)


# elimination


def test_eliminate_single_nonresonant_mode(golden: float) -> None:
    A = rotation(0.17)
    f = _cos_series(H, 2e-6)
    elim = eliminate_nonresonant(A, f, golden, 0.05, P0, KamControls(eta_prefactor=1e-3))
    assert not elim.Y.is_zero()
    assert elim.f_re.gevrey_norm(P0) < 1e-9
    assert elim.residual <= 1e-9
    assert elim.Y.gevrey_norm(P0) <= elim.eps**0.5


def test_eliminate_random_series(golden: float, random_sl2r_series) -> None:
    A = rotation(0.17)
    f = random_sl2r_series(1e-5)
    elim = eliminate_nonresonant(A, f, golden, 0.05, P0, KamControls(eta_prefactor=1e-3))
    assert np.all(elim.sets.eliminable(elim.Y.modes))
    assert np.all(elim.sets.resonant(elim.f_re.modes))
    assert elim.f_re.gevrey_norm(P0) <= 2 * elim.eps
    assert elim.f_re.conjugate_symmetry_defect() < 1e-18
    assert elim.residual <= 1e-9


def test_eliminate_fifty_random_series(
    golden: float, rng: np.random.Generator, random_sl2r_series
) -> None:
    A = rotation(0.17)
    controls = KamControls(eta_prefactor=1e-3)
    for size in 10.0 ** rng.uniform(-10.0, -6.0, size=50):
        f = random_sl2r_series(size)
        elim = eliminate_nonresonant(A, f, golden, 0.05, P0, controls)
        assert elim.eps == pytest.approx(size)
        assert elim.Y.gevrey_norm(P0) <= size**0.5
        assert elim.f_re.gevrey_norm(P0) <= 2 * size
        assert np.all(elim.sets.resonant(elim.f_re.modes))
        assert elim.residual <= 1e-9


def test_eliminate_refuses_eta_below_floor(golden: float) -> None:
    with pytest.raises(SmallnessGateError) as info:
        eliminate_nonresonant(rotation(0.17), _cos_series(H, 1e-4), golden, 1e-6, P0)
    assert info.value.gate == "eta-floor"


# single KAM steps


def test_nonresonant_step(golden: float) -> None:
    A = rotation(0.205)
    f = _cos_series(H, 2e-6)
    result = kam_step(A, f, golden, P0, 0.9375, DIOPH, DESK)
    assert result.case == "non-resonant"
    assert result.n_star is None
    assert result.B.degree == (0,)
    assert result.residual <= 1e-9
    assert result.eps_plus <= result.eps**2
    assert not result.gates["smallness"]
    assert float(np.max(np.abs(result.A_plus - A))) <= 4 * 2 * result.eps


def test_planted_resonant_step(golden: float) -> None:
    xi = (golden + 1e-9) / 2
    f = _cos_series(H, 1e-8)
    result = kam_step(rotation(xi), f, golden, P0, 0.9375, DIOPH, DESK)
    assert result.case == "resonant"
    assert result.n_star == (1,)
    assert result.B.degree == (1,)
    assert result.B.lattice.half_period
    assert result.su11 is not None
    assert abs(result.su11.t) <= result.eps**DESK.sigma
    assert result.residual <= 1e-9


def test_step_is_trivial_for_zero_perturbation(golden: float) -> None:
    zero = FourierSeries.zero(FrequencyLattice(1), "matrix")
    result = kam_step(rotation(0.2), zero, golden, P0, 0.9, DIOPH)
    assert result.case == "trivial"
    assert result.B.is_identity()


def test_step_enforces_gate_by_default(golden: float) -> None:
    with pytest.raises(SmallnessGateError):
        kam_step(rotation(0.205), _cos_series(H, 2e-6), golden, P0, 0.9375, DIOPH)
