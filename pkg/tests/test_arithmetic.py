from __future__ import annotations

import numpy as np
import pytest

from gevrey_kam.analysis.arithmetic import (
    DiophantineParams,
    dc_alpha_check,
    diophantine_check,
    enumerate_modes,
    rational_label,
    torus_distance,
)
from gevrey_kam.errors import ConfigError


@pytest.mark.parametrize("x, expected", [(0.0, 0.0), (0.75, 0.25), (1.3, 0.3), (-0.3, 0.3)])
def test_torus_distance(x: float, expected: float) -> None:
    assert torus_distance(x) == pytest.approx(expected)


def test_torus_distance_is_even_and_periodic(rng: np.random.Generator) -> None:
    x = rng.normal(size=50) * 10
    np.testing.assert_allclose(torus_distance(x), torus_distance(-x), atol=1e-15)
    np.testing.assert_allclose(torus_distance(x), torus_distance(x + 3.0), atol=1e-12)


def test_enumeration_order() -> None:
    modes = enumerate_modes(1, 3)
    assert [int(m[0]) for m in modes] == [1, -1, 2, -2, 3, -3]
    with_zero = enumerate_modes(2, 1, include_zero=True)
    assert tuple(with_zero[0]) == (0, 0)
    assert len(with_zero) == 5


def test_golden_is_diophantine(golden: float) -> None:
    check = diophantine_check(golden, DiophantineParams(0.2, 1.2), 100)
    assert check.passed
    assert check.margin >= 1.0


def test_rational_fails_at_its_denominator() -> None:
    for gamma in (0.01, 0.2, 0.9):
        check = diophantine_check(1.0 / 3.0, DiophantineParams(gamma, 1.2), 10)
        assert not check.passed
        assert check.witness == (3,)
        assert check.rational


def test_two_dimensional_frequency_passes() -> None:
    alpha = [np.sqrt(2.0) - 1.0, np.sqrt(3.0) - 1.0]
    assert diophantine_check(alpha, DiophantineParams(0.05, 2.5), 50).passed


def test_tau_must_exceed_dimension() -> None:
    with pytest.raises(ConfigError):
        diophantine_check([0.3, 0.7], DiophantineParams(0.1, 1.5), 5)
    with pytest.raises(ConfigError):
        DiophantineParams(1.2, 2.0)


def test_dc_alpha_rational_phase(golden: float) -> None:
    check = dc_alpha_check(golden / 2.0, golden, 0.01, 2.0, 20)
    assert not check.passed
    assert check.rational
    assert check.witness == (1,)
    assert rational_label(golden / 2.0, golden, 20) == (1,)


def test_dc_alpha_zero_phase_fails_at_origin(golden: float) -> None:
    check = dc_alpha_check(0.0, golden, 0.01, 2.0, 20)
    assert not check.passed
    assert check.witness == (0,)


def test_dc_alpha_brute_force_agrees(golden: float) -> None:
    phi, kappa, tau, n = 0.37, 0.01, 2.0, 200
    check = dc_alpha_check(phi, golden, kappa, tau, n)
    expected = all(
        torus_distance(2 * phi - m * golden) >= kappa / (1 + abs(m)) ** tau
        for m in range(-n, n + 1)
    )
    assert check.passed == expected
