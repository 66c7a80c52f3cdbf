"""Weight and modulus certificates, horizon truncation, and the n-indexed bounds."""

import numpy as np
import pytest

import ucbsde.builtins as cat
from ucbsde import (
    CertificateViolated,
    DivergentIntegral,
    Horizon,
    ModulusFn,
    StrictPositivityViolated,
    WeightFn,
    bound_a_n,
    bound_b_n,
    check_integrability,
    osgood_diagnostic,
    shared_growth_constant,
)


def test_weight_rejects_negative_values():
    with pytest.raises(CertificateViolated):
        WeightFn(fn=lambda t: np.sin(t), name="signed")


def test_modulus_rejects_decreasing():
    with pytest.raises(CertificateViolated):
        ModulusFn(fn=lambda x: 1.0 / (1.0 + np.asarray(x, float)), growth_a=1.0)


def test_modulus_rejects_growth_violation():
    with pytest.raises(CertificateViolated):
        ModulusFn(fn=lambda x: np.asarray(x, float) ** 2, growth_a=1.0)


def test_modulus_rejects_nonzero_origin():
    with pytest.raises(CertificateViolated):
        ModulusFn(fn=lambda x: np.asarray(x, float) + 0.5, growth_a=2.0)


def test_relaxed_origin_allows_positive_offset():
    m = ModulusFn(fn=lambda x: np.asarray(x, float) + 0.5, growth_a=2.0,
                  zero_at_origin=False)
    assert float(m(0.0)) == 0.5


# quadrature must agree with the closed-form antiderivatives to 1e-8
@pytest.mark.parametrize("w,powers", [
    (cat.exp_decay(rate=1.3, amp=0.7), (1.0, 2.0)),
    (cat.const(0.4), (1.0,)),
    (cat.inv_sqrt_cut(0.1), (1.0,)),
    (cat.inv_fourthroot_cut(0.1), (1.0, 2.0)),
])
def test_check_integrability_matches_oracles(w, powers):
    h = Horizon.finite(3.0)
    rep = check_integrability(w, h, powers=powers)
    exact1 = w.integral_oracle(3.0) - w.integral_oracle(0.0)
    assert abs(rep.values[1.0] - exact1) <= 1e-8 * max(1.0, abs(exact1))
    for p in powers:
        assert np.isfinite(rep.values[p])


def test_check_integrability_square_of_inv_sqrt_diverges():
    # (t^(-1/2))^2 = 1/t is not integrable at 0
    w = cat.inv_sqrt_cut(0.1)
    with pytest.raises(DivergentIntegral):
        check_integrability(w, Horizon.finite(1.0), powers=(2.0,))


def test_effective_horizon_exp_decay():
    h = Horizon.infinite(truncation_eps=1e-8)
    w = cat.exp_decay(rate=1.0)
    t_eff = h.effective([w])
    # tail e^{-T} crosses 1e-8 at T = 8 ln 10
    assert abs(t_eff - 8 * np.log(10.0)) < 0.05
    tail, _ = w.integrate(t_eff, t_eff + 60.0)
    assert tail < 1e-8
    early, _ = w.integrate(t_eff - 0.5, t_eff + 60.0)
    assert early > 1e-8  # minimality up to the bisection tolerance


def test_effective_horizon_finite_passthrough():
    assert Horizon.finite(2.5).effective([cat.const(1.0)]) == 2.5


def test_osgood_diagnostic_verdicts(identity_modulus, sqrt_modulus):
    assert osgood_diagnostic(identity_modulus).verdict == "consistent-with-divergence"
    assert osgood_diagnostic(sqrt_modulus).verdict == "bounded"
    xl = cat.xlog(0.1)
    assert osgood_diagnostic(xl).verdict == "consistent-with-divergence"


def test_shared_growth_constant_is_max(identity_modulus, sqrt_modulus):
    assert shared_growth_constant(identity_modulus, sqrt_modulus) == 1.0
    xl = cat.xlog(0.1)
    assert shared_growth_constant(xl, sqrt_modulus) == xl.growth_a


def test_bound_a_n_frozen_values(identity_modulus, sqrt_modulus):
    # phi = sqrt, A forced to 1, int v = 1, n = 6: sqrt(2/(6+2)) * 1 = 0.5
    v1 = cat.const(1.0)
    got = bound_a_n(sqrt_modulus, v1, Horizon.finite(1.0), 6, growth_a=1.0)
    assert abs(got - 0.5) < 1e-12
    # phi = identity, A = 1, int v = 2, n = 2: (2/(2+2)) * 2 = 1
    got = bound_a_n(identity_modulus, cat.const(1.0), Horizon.finite(2.0), 2)
    assert abs(got - 1.0) < 1e-12


def test_bound_b_n_frozen_value(identity_modulus):
    u = cat.const(1.0)
    got = bound_b_n(u, u, identity_modulus, identity_modulus, 4, 0.5)
    # u rho((2A/n)(u+v)/u) + v phi(...) with everything 1: 2 * (2/4 * 2) = 2
    assert abs(float(got) - 2.0) < 1e-12


def test_bounds_nonincreasing_in_n():
    rng = np.random.default_rng(42)
    phi = cat.sqrt()
    rho = cat.xlog(0.1)
    for _ in range(100):
        u = cat.exp_decay(rate=rng.uniform(0.5, 2.0), amp=rng.uniform(0.2, 2.0))
        v = cat.const(rng.uniform(0.1, 2.0))
        t = rng.uniform(0.01, 3.0)
        h = Horizon.finite(rng.uniform(0.5, 4.0))
        a_prev = np.inf
        b_prev = np.inf
        for n in (1, 2, 4, 8, 16, 32, 64):
            a = bound_a_n(phi, v, h, n)
            b = float(bound_b_n(u, v, rho, phi, n, t))
            assert a <= a_prev + 1e-12
            assert b <= b_prev + 1e-12
            a_prev, b_prev = a, b


def test_bound_b_n_dominated_by_growth_envelope():
    rng = np.random.default_rng(3)
    u = cat.exp_decay(rate=1.0)
    v = cat.const(0.7)
    rho = cat.xlog(0.1)
    phi = cat.sqrt()
    a = shared_growth_constant(rho, phi)
    ts = rng.uniform(0.01, 5.0, 200)
    for n in (1, 2, 5, 17):
        b = np.asarray(bound_b_n(u, v, rho, phi, n, ts))
        cap = (a + 4 * a * a) * (u(ts) + v(ts))
        assert np.all(b <= cap * (1 + 1e-9))


def test_bound_b_n_requires_positive_weights(identity_modulus):
    zero = cat.const(0.0)
    with pytest.raises(StrictPositivityViolated):
        bound_b_n(zero, cat.const(1.0), identity_modulus, identity_modulus, 2, 0.5)
