"""Integrability certificates: weight functions, moduli of continuity, horizons.

Everything downstream (backward deterministic equations, generator
regularization, the stochastic solvers) consumes time-dependent weights and
moduli through the types defined here, so the admissibility checks live here
too: integrability of weights over the working horizon, monotonicity and
linear growth of moduli, and the zero-neighbourhood divergence diagnostic
for the modulus reciprocal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import quadrature
from .errors import CertificateViolated, StrictPositivityViolated


@dataclass(frozen=True)
class WeightFn:
    """Nonnegative deterministic weight of time.

    Parameters
    ----------
    fn:
        Vectorized map from time arrays to nonnegative values.
    integral_oracle:
        Optional antiderivative F with integral over [a, b] equal to
        F(b) - F(a); used by tests and by exact cumulative integrals.
    singular_at_zero:
        Declares an integrable blow-up at t = 0 so quadrature and time
        grids refine toward that endpoint.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    integral_oracle: Callable[[float], float] | None = None
    singular_at_zero: bool = False
    name: str = "weight"

    def __post_init__(self):
        t0 = 1e-9 if self.singular_at_zero else 0.0
        ts = np.concatenate([np.linspace(t0, 10.0, 64), np.geomspace(1e-6, 1.0, 16)])
        vals = self(ts)
        if not np.all(np.isfinite(vals)) or np.any(vals < 0):
            raise CertificateViolated(f"weight {self.name} not finite nonnegative on samples")

    def __call__(self, t):
        return self.fn(np.asarray(t, dtype=float))

    def integrate(self, a: float, b: float, *, power: float = 1.0, **kw) -> tuple[float, float]:
        """Quadrature of fn**power over [a, b]; returns (value, error estimate)."""
        if self.integral_oracle is not None and power == 1.0:
            exact = self.integral_oracle(b) - self.integral_oracle(a)
            return float(exact), 0.0
        if power == 1.0:
            f = self.fn
        else:
            f = lambda t: self.fn(t) ** power
        return quadrature.integrate(f, a, b, **kw)


@dataclass(frozen=True)
class ModulusFn:
    """Nondecreasing continuity modulus with a linear growth certificate.

    ``fn(x) <= growth_a * (1 + x)`` must hold for x >= 0.  ``zero_at_origin``
    is relaxed only for regularized moduli, which sit strictly above the
    modulus they dominate and may be positive at 0.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    growth_a: float
    osgood_declared: bool = False
    zero_at_origin: bool = True
    name: str = "modulus"
    # numerically computed moduli carry search error per evaluation
    eval_slack: float = 0.0

    def __post_init__(self):
        self.validate(n_samples=64)

    def __call__(self, x):
        return self.fn(np.asarray(x, dtype=float))

    def validate(self, n_samples: int = 1000, x_max: float = 10.0) -> None:
        xs = np.unique(np.concatenate([
            [0.0],
            np.geomspace(1e-8, x_max, n_samples // 2),
            np.linspace(0.0, x_max, n_samples // 2),
        ]))
        vals = self(xs)
        if not np.all(np.isfinite(vals)):
            raise CertificateViolated(f"modulus {self.name} not finite on samples")
        slack = 1e-12 * (1.0 + np.abs(vals[:-1])) + 2.0 * self.eval_slack
        if np.any(np.diff(vals) < -slack):
            raise CertificateViolated(f"modulus {self.name} decreases on samples")
        if np.any(vals > self.growth_a * (1.0 + xs) * (1 + 1e-9) + 1e-12 + self.eval_slack):
            raise CertificateViolated(f"modulus {self.name} breaks growth bound {self.growth_a}")
        if self.zero_at_origin:
            if abs(float(self(0.0))) > 1e-12:
                raise CertificateViolated(f"modulus {self.name} nonzero at origin")
            if np.any(vals[xs > 1e-8] <= 0.0):
                raise CertificateViolated(f"modulus {self.name} vanishes away from origin")


@dataclass(frozen=True)
class Horizon:
    """Finite or infinite working interval.

    Infinite horizons are used through an effective endpoint: the smallest
    time (found by doubling plus bisection, capped at ``t_cap``) past which
    the declared weight mass falls below ``truncation_eps``.
    """

    kind: str
    t: float
    truncation_eps: float = 1e-8
    t_cap: float = 1e4

    @staticmethod
    def finite(t: float) -> "Horizon":
        if not (np.isfinite(t) and t >= 0):
            raise CertificateViolated("finite horizon needs 0 <= T < inf")
        return Horizon("finite", float(t))

    @staticmethod
    def infinite(truncation_eps: float = 1e-8, t_cap: float = 1e4) -> "Horizon":
        return Horizon("infinite", float("inf"), truncation_eps, t_cap)

    def effective(
        self,
        weights: Sequence[WeightFn] = (),
        squared: Sequence[WeightFn] = (),
    ) -> float:
        """Effective endpoint: T itself, or the truncation point of the tail
        mass sum(int w) + sum(int w^2) of the supplied weights."""
        if self.kind == "finite":
            return self.t
        if not weights and not squared:
            return self.t_cap

        def tail(t0: float) -> float:
            acc = 0.0
            for w in weights:
                acc += w.integrate(t0, self.t_cap)[0]
            for w in squared:
                acc += w.integrate(t0, self.t_cap, power=2.0)[0]
            return acc

        if tail(0.0) < self.truncation_eps:
            return min(1.0, self.t_cap)
        lo, hi = 0.0, 1.0
        while hi < self.t_cap and tail(hi) >= self.truncation_eps:
            lo, hi = hi, min(2.0 * hi, self.t_cap)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if tail(mid) >= self.truncation_eps:
                lo = mid
            else:
                hi = mid
        return hi


@dataclass(frozen=True)
class IntegrabilityReport:
    t_eff: float
    values: dict
    error_estimates: dict


@dataclass(frozen=True)
class OsgoodReport:
    eps: np.ndarray
    partial_integrals: np.ndarray
    verdict: str
    declared: bool


def check_integrability(
    w: WeightFn,
    h: Horizon,
    powers: Sequence[float] = (1.0,),
) -> IntegrabilityReport:
    """Evaluate int_0^{T_eff} w(t)**p dt for each requested power.

    Raises DivergentIntegral when any power fails to be integrable and
    QuadratureFailure when the error estimate does not converge.
    """
    t_eff = h.effective([w])
    values: dict = {}
    errors: dict = {}
    for p in powers:
        # always quadrature, so oracle antiderivatives stay an independent check
        val, err = quadrature.integrate(lambda t: w(t) ** p, 0.0, t_eff)
        values[p] = val
        errors[p] = err
    return IntegrabilityReport(t_eff=t_eff, values=values, error_estimates=errors)


def osgood_diagnostic(rho: ModulusFn, eps_grid: Sequence[float] | None = None) -> OsgoodReport:
    """Partial integrals of 1/rho over [eps, 1] on a decreasing eps grid.

    The verdict is "consistent-with-divergence" when the per-step increments
    fail to decay geometrically (so their extrapolated tail is unbounded),
    and "bounded" otherwise.  A verdict is a numerical observation on the
    sampled grid, not a proof.
    """
    if eps_grid is None:
        eps_grid = np.geomspace(1e-1, 1e-12, 12)
    eps = np.asarray(sorted(eps_grid, reverse=True), dtype=float)
    if np.any(eps <= 0) or np.any(eps >= 1):
        raise CertificateViolated("eps grid must lie in (0, 1)")

    partials = np.empty(eps.size)
    for i, e in enumerate(eps):
        val, _ = quadrature.integrate(lambda x: 1.0 / rho(x), e, 1.0)
        partials[i] = val
    increments = np.diff(partials)
    verdict = "bounded"
    if increments.size >= 2:
        tiny = 1e-9 * max(1.0, partials[-1])
        last, prev = increments[-1], increments[-2]
        if last > tiny and (prev <= tiny or last / prev >= 0.9):
            verdict = "consistent-with-divergence"
    elif increments.size == 1 and increments[-1] > 1e-9:
        verdict = "consistent-with-divergence"
    return OsgoodReport(eps=eps, partial_integrals=partials, verdict=verdict,
                        declared=rho.osgood_declared)


def shared_growth_constant(rho: ModulusFn, phi: ModulusFn) -> float:
    """Single linear-growth constant serving both moduli."""
    return max(rho.growth_a, phi.growth_a)


def bound_a_n(
    phi: ModulusFn,
    v: WeightFn,
    h: Horizon,
    n: int,
    *,
    growth_a: float | None = None,
    t_eff: float | None = None,
) -> float:
    """Additive regularization defect phi(2A / (n + 2A)) * int_0^{T_eff} v.

    ``growth_a`` defaults to phi's own constant; pass the shared constant
    when a second modulus is in play.  Nonincreasing in n.
    """
    if n < 1:
        raise CertificateViolated("n must be a positive integer")
    a = phi.growth_a if growth_a is None else growth_a
    if t_eff is None:
        t_eff = h.effective([v])
    mass, _ = v.integrate(0.0, t_eff)
    return float(phi(2.0 * a / (n + 2.0 * a))) * mass


def bound_b_n(u: WeightFn, v: WeightFn, rho: ModulusFn, phi: ModulusFn, n: int, t):
    """Pointwise envelope width of the regularized generator at time t.

    b_n(t) = u(t) rho((2A/n)(u+v)/u) + v(t) phi((2A/n)(u+v)/v), with A the
    shared growth constant.  Dominated by (A + 4A^2)(u(t) + v(t)) and
    nonincreasing in n.  Requires u(t) > 0 and v(t) > 0.
    """
    if n < 1:
        raise CertificateViolated("n must be a positive integer")
    a = shared_growth_constant(rho, phi)
    ut = np.asarray(u(t), dtype=float)
    vt = np.asarray(v(t), dtype=float)
    if np.any(ut <= 0.0) or np.any(vt <= 0.0):
        raise StrictPositivityViolated("b_n needs u(t) > 0 and v(t) > 0")
    s = (2.0 * a / n) * (ut + vt)
    out = ut * rho(s / ut) + vt * phi(s / vt)
    return out if out.ndim else float(out)
