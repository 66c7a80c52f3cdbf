"""Adaptive quadrature against closed-form antiderivatives."""

import numpy as np
import pytest

from ucbsde import DivergentIntegral, backward_cumulative, cell_integrals, integrate


def test_polynomial_is_exact():
    val, err = integrate(lambda t: 3.0 * t**2, 0.0, 2.0)
    assert abs(val - 8.0) < 1e-12
    assert err < 1e-10


def test_exponential_tail():
    val, _ = integrate(lambda t: np.exp(-t), 0.0, 50.0)
    assert abs(val - (1.0 - np.exp(-50.0))) < 1e-12


def test_integrable_singularity_inverse_sqrt():
    # int_0^1 t^(-1/2) = 2, endpoint blow-up handled by left refinement
    val, err = integrate(lambda t: 1.0 / np.sqrt(np.maximum(t, 1e-300)), 0.0, 1.0)
    assert abs(val - 2.0) < 1e-8
    assert err < 1e-6


def test_integrable_singularity_inverse_fourth_root():
    val, _ = integrate(lambda t: np.maximum(t, 1e-300) ** -0.25, 0.0, 1.0)
    assert abs(val - 4.0 / 3.0) < 1e-8


def test_jump_discontinuity():
    f = lambda t: np.where(t < 0.3, 2.0, 0.5)
    val, _ = integrate(f, 0.0, 1.0)
    assert abs(val - (0.6 + 0.35)) < 1e-8


def test_divergent_integrand_raises():
    with pytest.raises(DivergentIntegral):
        integrate(lambda t: 1.0 / np.maximum(t, 1e-300), 0.0, 1.0)


def test_divergent_power_raises():
    with pytest.raises(DivergentIntegral):
        integrate(lambda t: np.maximum(t, 1e-300) ** -1.5, 0.0, 1.0)


def test_cell_integrals_sum_matches_adaptive():
    nodes = np.linspace(0.0, 3.0, 17)
    cells = cell_integrals(lambda t: np.exp(-t) * (1 + t), nodes)
    total, _ = integrate(lambda t: np.exp(-t) * (1 + t), 0.0, 3.0)
    assert cells.shape == (16,)
    assert abs(cells.sum() - total) < 1e-10


def test_cell_integrals_singular_left():
    nodes = np.linspace(0.0, 1.0, 9)
    cells = cell_integrals(lambda t: 1.0 / np.sqrt(np.maximum(t, 1e-300)),
                           nodes, singular_left=True)
    # first cell holds int_0^{1/8} t^(-1/2) = 2 sqrt(1/8)
    assert abs(cells[0] - 2.0 * np.sqrt(1.0 / 8.0)) < 1e-9
    assert abs(cells.sum() - 2.0) < 1e-8


def test_backward_cumulative_suffix_sums():
    out = backward_cumulative(np.array([1.0, 2.0, 3.0]))
    assert np.allclose(out, [6.0, 5.0, 3.0, 0.0])
    assert out[-1] == 0.0
