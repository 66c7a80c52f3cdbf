"""Deterministic final-value solvers against closed forms and order properties."""

import numpy as np
import pytest

import ucbsde.builtins as cat
from ucbsde import (
    CertificateViolated,
    DBDEProblem,
    DominancePreconditionFailed,
    Horizon,
    NonUniqueWarning,
    TimeGrid,
    picard_recursion,
    solve_fixed_point,
    solve_separable,
    uniqueness_bound_recursion,
    verify_comparison,
)


def linear_problem(rate, amp, a, c, delta, t, name="lin"):
    """f(t, y) = amp e^{-rate t} (a y + c) with |a| <= 1 so u certifies it."""
    u = cat.exp_decay(rate=rate, amp=amp)
    mass = u.integral_oracle(t) - u.integral_oracle(0.0)
    return DBDEProblem(
        f=lambda s, y: u(s) * (a * y + c),
        delta=delta,
        u=u,
        f0_integral_bound=abs(c) * mass + 1e-12,
        horizon=Horizon.finite(t),
        name=name,
    )


def linear_exact(rate, amp, a, c, delta, nodes, t):
    w = (np.exp(-rate * nodes) - np.exp(-rate * t)) * amp / rate
    if a == 0.0:
        return delta + c * w
    return ((a * delta + c) * np.exp(a * w) - c) / a


def test_fixed_point_matches_linear_closed_form():
    grid = TimeGrid.uniform(2.0, 3000)
    p = linear_problem(1.0, 1.0, 0.8, 0.5, 1.2, 2.0)
    path = solve_fixed_point(p, grid)
    exact = linear_exact(1.0, 1.0, 0.8, 0.5, 1.2, grid.nodes, 2.0)
    assert np.max(np.abs(path.values - exact)) < 1e-6
    assert path.meta["iterations"] <= 60


def test_contraction_certificate_halves_gaps():
    grid = TimeGrid.uniform(1.5, 500)
    p = linear_problem(0.7, 1.0, -0.9, 1.0, 0.5, 1.5)
    path = solve_fixed_point(p, grid, tol=1e-12)
    gaps = np.asarray(path.meta["gaps"])
    ratios = gaps[2:-1] / gaps[1:-2]  # asymptotic regime, skip first sweep
    assert np.all(ratios < 0.5)


def test_quadrature_refinement_check_recorded():
    grid = TimeGrid.uniform(1.0, 800)
    p = linear_problem(1.0, 1.0, 0.5, 0.3, 1.0, 1.0)
    path = solve_fixed_point(p, grid)
    assert path.meta["quad_check"] < 1e-6


def test_picard_recursion_reaches_fixed_point():
    grid = TimeGrid.uniform(1.0, 1000)
    p = linear_problem(1.0, 1.0, 1.0, 0.0, 1.0, 1.0)
    seq = picard_recursion(p, grid, c=5.0, n_steps=30)
    assert len(seq.paths) == 30
    assert seq.sup_distance < 1e-6
    d_prev = np.inf
    for it in seq.paths[1:]:
        d = np.max(np.abs(it.values - seq.fixed_point.values))
        assert d < d_prev + 1e-15
        d_prev = d


def test_separable_identity_closed_form(one_weight, identity_modulus):
    grid = TimeGrid.uniform(1.0, 400)
    path = solve_separable(one_weight, identity_modulus, 0.5, grid)
    exact = 0.5 * np.exp(1.0 - grid.nodes)
    assert np.max(np.abs(path.values - exact)) < 1e-8
    assert path.meta["branch"] == "positive"
    assert not path.meta["nonunique"]


def test_separable_sqrt_maximal_branch(one_weight, sqrt_modulus):
    grid = TimeGrid.uniform(1.0, 400)
    with pytest.warns(NonUniqueWarning):
        path = solve_separable(one_weight, sqrt_modulus, 0.0, grid)
    exact = ((1.0 - grid.nodes) / 2.0) ** 2
    assert np.max(np.abs(path.values - exact)) < 1e-8
    assert path.meta["nonunique"]
    assert path.meta["branch"] == "maximal_limit"


def test_separable_osgood_zero(one_weight, identity_modulus):
    grid = TimeGrid.uniform(1.0, 50)
    path = solve_separable(one_weight, identity_modulus, 0.0, grid)
    assert np.all(path.values == 0.0)
    assert path.meta["branch"] == "osgood_zero"


def test_separable_strictly_monotone_in_delta(one_weight, sqrt_modulus):
    grid = TimeGrid.uniform(1.0, 200)
    lo = solve_separable(one_weight, sqrt_modulus, 0.3, grid)
    hi = solve_separable(one_weight, sqrt_modulus, 0.6, grid)
    assert np.all(hi.values > lo.values)


def test_comparison_ordered_and_strict():
    grid = TimeGrid.uniform(1.0, 600)
    p = linear_problem(1.0, 1.0, 0.5, 1.0, 1.0, 1.0, "hi")
    p2 = linear_problem(1.0, 1.0, 0.5, 0.2, 0.4, 1.0, "lo")
    rep = verify_comparison(p, p2, grid)
    assert rep.ordered
    assert rep.min_gap > 0
    assert rep.strict_required and rep.strict


def test_comparison_rejects_delta_misordering():
    grid = TimeGrid.uniform(1.0, 50)
    p = linear_problem(1.0, 1.0, 0.5, 1.0, 0.2, 1.0)
    p2 = linear_problem(1.0, 1.0, 0.5, 0.2, 0.8, 1.0)
    with pytest.raises(DominancePreconditionFailed):
        verify_comparison(p, p2, grid)


def test_comparison_rejects_driver_misordering():
    grid = TimeGrid.uniform(1.0, 50)
    p = linear_problem(1.0, 1.0, 0.5, 0.0, 1.0, 1.0)
    p2 = linear_problem(1.0, 1.0, 0.5, 1.0, 1.0, 1.0)  # larger driver below
    with pytest.raises(DominancePreconditionFailed):
        verify_comparison(p, p2, grid)


def test_problem_rejects_lying_lipschitz_weight():
    u = cat.const(1.0)
    with pytest.raises(CertificateViolated):
        DBDEProblem(f=lambda t, y: 3.0 * y, delta=0.0, u=u,
                    f0_integral_bound=0.1, horizon=Horizon.finite(1.0))


def test_problem_rejects_lying_f0_bound():
    u = cat.const(1.0)
    with pytest.raises(CertificateViolated):
        DBDEProblem(f=lambda t, y: 0.5 * y + 1.0, delta=0.0, u=u,
                    f0_integral_bound=0.1, horizon=Horizon.finite(1.0))


def test_uniqueness_recursion_linear_oracle(one_weight, identity_modulus):
    # f[j+1](t) = 0.1 + int_t^1 f[j] converges to 0.1 e^{1-t}
    grid = TimeGrid.uniform(1.0, 2000)
    out = uniqueness_bound_recursion(one_weight, identity_modulus, a_n=0.1,
                                     c1=2.0, k=1, n=4, j_steps=25, grid=grid)
    assert len(out) == 25
    exact = 0.1 * np.exp(1.0 - grid.nodes)
    assert np.max(np.abs(out[-1].values - exact)) < 1e-6


def test_uniqueness_recursion_monotone_after_second(one_weight, identity_modulus):
    grid = TimeGrid.uniform(1.0, 300)
    down = uniqueness_bound_recursion(one_weight, identity_modulus, 0.05, 3.0,
                                      1, 2, 10, grid)
    for a, b in zip(down[1:], down[2:]):
        assert np.all(b.values <= a.values + 1e-12)
    up = uniqueness_bound_recursion(one_weight, identity_modulus, 0.05, 0.0,
                                    1, 2, 10, grid)
    for a, b in zip(up[1:], up[2:]):
        assert np.all(b.values >= a.values - 1e-12)


def test_path_csv_roundtrip(tmp_path, one_weight, identity_modulus):
    grid = TimeGrid.uniform(1.0, 20)
    path = solve_separable(one_weight, identity_modulus, 0.5, grid)
    f = tmp_path / "sol.csv"
    path.to_csv(f)
    lines = f.read_text().splitlines()
    assert lines[0].startswith("#")
    assert lines[1] == "t,y"
    data = np.loadtxt(lines[2:], delimiter=",")
    assert np.array_equal(data[:, 0], grid.nodes)
    assert np.array_equal(data[:, 1], path.values)
