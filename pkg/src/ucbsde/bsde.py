"""Backward stochastic solvers on simulated noise ensembles.

Least-squares Monte-Carlo backward induction: conditional expectations are
polynomial regressions on the current Brownian state, the martingale
integrand comes from the increment projection z ~ E[y_{j+1} dB^T]/dt, and
the y update is implicit, resolved by a short inner fixed-point loop.  The
uniformly-continuous path runs the same induction on a schedule of
Lipschitz approximations over one fixed ensemble and monitors the Cauchy
gaps between consecutive solutions, the equation defect of the last one,
and the two-solution uniqueness bound recursion.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .dbde import uniqueness_bound_recursion
from .errors import (
    CertificateViolated,
    CauchyStalledWarning,
    GridMismatch,
    NoPicardConvergence,
    RegressionSingular,
)
from .grids import TimeGrid
from .regularize import ApproxGenerator, Generator, SearchSpec, sup_convolution_modulus
from .weights import bound_a_n, Horizon


@dataclass(frozen=True)
class RegressionSpec:
    """Projection basis: polynomials in the standardized Brownian state."""

    degree: int = 3
    kind: str = "poly"

    def __post_init__(self):
        if self.kind != "poly":
            raise CertificateViolated(f"unknown basis kind {self.kind!r}")
        if self.degree < 0:
            raise CertificateViolated("degree must be >= 0")


@lru_cache(maxsize=64)
def _monomials(d: int, degree: int) -> tuple:
    out = []
    for total in range(degree + 1):
        for alpha in itertools.product(range(total + 1), repeat=d):
            if sum(alpha) == total:
                out.append(alpha)
    return tuple(out)


def _design(states: np.ndarray, t: float, spec: RegressionSpec) -> np.ndarray:
    """Design matrix at one node; constant-only at t = 0 where the state is
    degenerate."""
    nb, d = states.shape
    if t <= 0.0:
        return np.ones((nb, 1))
    x = states / np.sqrt(t)
    cols = [np.prod(x**np.asarray(alpha, dtype=float), axis=1)
            for alpha in _monomials(d, spec.degree)]
    return np.stack(cols, axis=1)


def _lstsq_coefs(design: np.ndarray, targets2: np.ndarray, fast: bool) -> np.ndarray:
    """Least-squares coefficients [basis columns, targets]."""
    if fast:
        coef, _, rank, _ = np.linalg.lstsq(design, targets2, rcond=None)
        if rank < design.shape[1]:
            raise RegressionSingular(
                f"rank {rank} < {design.shape[1]} basis columns; basis too rich "
                "for this ensemble")
        return coef
    cols = []
    for c in range(targets2.shape[1]):
        coef, _, rank, _ = np.linalg.lstsq(design, targets2[:, c], rcond=None)
        if rank < design.shape[1]:
            raise RegressionSingular(
                f"rank {rank} < {design.shape[1]} basis columns; basis too "
                "rich for this ensemble")
        cols.append(coef)
    return np.stack(cols, axis=1)


def _fit(design: np.ndarray, targets: np.ndarray, fast: bool) -> np.ndarray:
    """Least-squares fitted values, one column per target."""
    squeeze = targets.ndim == 1
    t2 = targets[:, None] if squeeze else targets
    out = design @ _lstsq_coefs(design, t2, fast)
    return out[:, 0] if squeeze else out


@dataclass
class PathEnsemble:
    """Brownian increments on a grid, all derived from one counter-based seed."""

    grid: TimeGrid
    increments: np.ndarray  # [n_paths, len(grid) - 1, d]
    seed: int
    _states: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_paths(self) -> int:
        return self.increments.shape[0]

    @property
    def dim_d(self) -> int:
        return self.increments.shape[2]

    def states(self) -> np.ndarray:
        """Brownian positions at the grid nodes, [n_paths, len(grid), d]."""
        if self._states is None:
            nb, _, d = self.increments.shape
            s = np.zeros((nb, len(self.grid), d))
            np.cumsum(self.increments, axis=1, out=s[:, 1:, :])
            self._states = s
        return self._states

    def validate(self, se_factor: float = 5.0) -> None:
        """Per-step increment variance must be consistent with dt."""
        dt = self.grid.deltas
        var = self.increments.var(axis=0, ddof=1)  # [steps, d]
        se = dt * np.sqrt(2.0 / (self.n_paths - 1))
        if np.any(np.abs(var - dt[:, None]) > se_factor * se[:, None]):
            worst = float(np.max(np.abs(var - dt[:, None]) / se[:, None]))
            raise CertificateViolated(
                f"increment variance off by {worst:.2f} standard errors")


def simulate_paths(d: int, grid: TimeGrid, n_paths: int, seed: int) -> PathEnsemble:
    """Ensemble of Gaussian increments with variance dt_j per step.

    All randomness flows from the explicit seed through a counter-based
    generator, so regeneration is bit-identical for a given shape.
    """
    if d < 1 or n_paths < 2:
        raise CertificateViolated("need d >= 1 and n_paths >= 2")
    rng = np.random.Generator(np.random.Philox(key=seed))
    incs = rng.standard_normal((n_paths, len(grid) - 1, d))
    incs *= np.sqrt(grid.deltas)[None, :, None]
    return PathEnsemble(grid=grid, increments=incs, seed=seed)


@dataclass
class CauchyGap:
    n: int
    m: int
    sup_gap: float
    sup_gap_se: float
    z_gap: float
    z_gap_se: float


@dataclass
class ConvergenceRecord:
    """Solver diagnostics: inner-loop gaps, schedule Cauchy table, defect."""

    picard_gaps: list = field(default_factory=list)
    cauchy_table: dict = field(default_factory=dict)
    residual: float = float("nan")
    residual_detail: list = field(default_factory=list)

    def to_diagnostics_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("n,m,sup_gap,sup_gap_se,z_gap,z_gap_se,residual\n")
            for key in self.cauchy_table:  # schedule order
                g = self.cauchy_table[key]
                fh.write(f"{g.n},{g.m},{g.sup_gap:.17g},{g.sup_gap_se:.17g},"
                         f"{g.z_gap:.17g},{g.z_gap_se:.17g},{self.residual:.17g}\n")


@dataclass
class BSDESolution:
    """Pathwise solution arrays plus ensemble-level summaries."""

    grid: TimeGrid
    y_ensemble: np.ndarray  # [n_paths, len(grid), k]
    z_ensemble: np.ndarray  # [n_paths, len(grid) - 1, k, d]
    y0: np.ndarray  # [k], deterministic up to regression representation
    diagnostics: ConvergenceRecord
    seed: int
    driver_values: np.ndarray | None = None  # [n_paths, len(grid) - 1, k]
    # regression coefficient maps, one entry per cell; y_coefs[j] is
    # [basis columns at node j, k] and z_coefs[j] is [columns, k * d],
    # so the solution can be evaluated at states the fit never saw
    basis: RegressionSpec | None = None
    y_coefs: list | None = None
    z_coefs: list | None = None

    def to_summary_csv(self, path) -> None:
        nb, nn, k = self.y_ensemble.shape
        zn = np.linalg.norm(self.z_ensemble, axis=3)  # [nb, nn-1, k]
        with open(path, "w") as fh:
            cols = ["t"]
            cols += [f"y_mean_{i}" for i in range(k)]
            cols += [f"y_se_{i}" for i in range(k)]
            cols += [f"z_absmean_{i}" for i in range(k)]
            cols += [f"z_se_{i}" for i in range(k)]
            fh.write(",".join(cols) + "\n")
            sqb = np.sqrt(nb)
            for j, t in enumerate(self.grid.nodes):
                row = [f"{t:.17g}"]
                ym = self.y_ensemble[:, j, :]
                row += [f"{v:.17g}" for v in ym.mean(axis=0)]
                row += [f"{v:.17g}" for v in ym.std(axis=0, ddof=1) / sqb]
                if j < nn - 1:
                    zm = zn[:, j, :]
                    row += [f"{v:.17g}" for v in zm.mean(axis=0)]
                    row += [f"{v:.17g}" for v in zm.std(axis=0, ddof=1) / sqb]
                else:
                    row += ["nan"] * (2 * k)
                fh.write(",".join(row) + "\n")


def _driver_batch(g, t: float, y: np.ndarray, z_node: np.ndarray,
                  state: np.ndarray | None) -> np.ndarray:
    """All driver components at one node, state term included."""
    nb, k = y.shape
    out = np.empty((nb, k))
    for i in range(k):
        out[:, i] = g.eval_component(i, t, y, z_node[:, i, :])
    if g.state_term is not None and state is not None:
        out += np.asarray(g.state_term(t, state), dtype=float)[:, None]
    return out


def solve_lipschitz(
    g,
    xi: Callable[[np.ndarray], np.ndarray],
    ensemble: PathEnsemble,
    basis: RegressionSpec = RegressionSpec(),
    picard_iters: int = 5,
    picard_tol: float = 1e-10,
    use_row_fast_path: bool = True,
    record_driver: bool = True,
) -> BSDESolution:
    """Backward induction for a Lipschitz (or regularized) driver.

    Terminal values are xi evaluated per path, kept exact.  At each earlier
    node the z rows are the basis projection of the residual target
    (y_{j+1} - fitted conditional mean) dB^T / dt and y is the projection of
    y_{j+1} + g(t_mid, y_j, z_j) dt, implicit in y via at most
    ``picard_iters`` inner rounds (tolerance relative to 1 + |y|).
    The driver time is the cell midpoint, which keeps weights that blow up
    at t = 0 finite on every cell.
    With the row fast path all projections at a node share one stacked
    least-squares solve; without it they are solved column by column.
    Both orders agree to rounding.

    Raises NoPicardConvergence if an inner loop fails to settle and
    RegressionSingular if the basis is rank deficient on the ensemble.
    """
    grid = ensemble.grid
    nodes = grid.nodes
    dt = grid.deltas
    nn = len(grid)
    nb = ensemble.n_paths
    k, d = g.dim_k, g.dim_d
    if ensemble.dim_d != d:
        raise GridMismatch(f"ensemble dimension {ensemble.dim_d} != generator d = {d}")
    states = ensemble.states()

    y = np.empty((nb, nn, k))
    z = np.zeros((nb, nn - 1, k, d))
    y[:, -1, :] = np.asarray(xi(states), dtype=float).reshape(nb, k)
    drivers = np.zeros((nb, nn - 1, k)) if record_driver else None
    picard_gaps = [0.0] * (nn - 1)
    y_coefs: list = [None] * (nn - 1)
    z_coefs: list = [None] * (nn - 1)

    for j in range(nn - 2, -1, -1):
        ds = _design(states[:, j, :], nodes[j], basis)
        y_next = y[:, j + 1, :]
        db = ensemble.increments[:, j, :]
        # the z target subtracts the fitted conditional mean of y_{j+1}
        # before the dB product: the population projection is unchanged
        # (the subtracted part is measurable at node j and E[dB] = 0)
        # while in sample it removes the leverage-weighted coupling
        # between the smooth part of y_{j+1} and dB^2 that biases
        # sum z dB, and it shrinks the target variance by the size of
        # that smooth part
        yc = _lstsq_coefs(ds, y_next, use_row_fast_path)
        y_fit = ds @ yc
        y_c = y_next - y_fit
        z_targets = (y_c[:, :, None] * db[:, None, :]).reshape(nb, k * d) / dt[j]
        zc = _lstsq_coefs(ds, z_targets, use_row_fast_path)
        z_coefs[j] = zc
        z[:, j, :, :] = (ds @ zc).reshape(nb, k, d)

        state_j = states[:, j, :]
        t_mid = 0.5 * (nodes[j] + nodes[j + 1])
        y_j = y_fit
        gap = 0.0
        gv = None
        for _ in range(picard_iters):
            gv = _driver_batch(g, t_mid, y_j, z[:, j, :, :], state_j)
            yc = _lstsq_coefs(ds, y_next + dt[j] * gv, use_row_fast_path)
            y_new = ds @ yc
            gap = float(np.max(np.abs(y_new - y_j)))
            y_j = y_new
            if gap < picard_tol * (1.0 + float(np.max(np.abs(y_j)))):
                break
        scale = 1.0 + float(np.max(np.abs(y_j)))
        if not gap < 1e-3 * scale:
            raise NoPicardConvergence(f"inner gap {gap:.3g} at node {j}")
        picard_gaps[j] = gap
        y[:, j, :] = y_j
        y_coefs[j] = yc
        if record_driver and gv is not None:
            drivers[:, j, :] = gv

    y0 = y[:, 0, :].mean(axis=0)
    diag = ConvergenceRecord(picard_gaps=picard_gaps)
    return BSDESolution(grid=grid, y_ensemble=y, z_ensemble=z, y0=y0,
                        diagnostics=diag, seed=ensemble.seed,
                        driver_values=drivers, basis=basis,
                        y_coefs=y_coefs, z_coefs=z_coefs)


def equation_defect(
    sol: BSDESolution,
    g,
    xi: Callable[[np.ndarray], np.ndarray],
    ensemble: PathEnsemble,
    probe_indices: Sequence[int],
) -> list[dict]:
    """Per-path defect y_t - xi - sum g dt + sum z dB on the given ensemble.

    y and z at each node come from the stored regression coefficient maps,
    the driver is re-evaluated at those values at the same cell midpoints
    the solver used, and the terminal value is xi on the ensemble's paths.
    On an ensemble independent of the one the solution was fitted to, the
    per-path defects are independent given the solution, so the reported
    standard errors are exact for the mean; on the fitting ensemble itself
    the shared coefficients correlate the paths and the error bars
    understate the estimator noise.  Returns one record per probe with
    componentwise means and standard errors.
    """
    if sol.basis is None or sol.y_coefs is None or sol.z_coefs is None:
        raise CertificateViolated(
            "solution carries no regression coefficient maps")
    nodes = sol.grid.nodes
    if len(ensemble.grid) != len(sol.grid) or not np.array_equal(
            ensemble.grid.nodes, nodes):
        raise GridMismatch("ensemble grid differs from the solution grid")
    dt = sol.grid.deltas
    nn = len(sol.grid)
    k = sol.y_ensemble.shape[2]
    d = sol.z_ensemble.shape[3]
    nb = ensemble.n_paths
    states = ensemble.states()
    gsum = np.zeros((nb, k))
    msum = np.zeros((nb, k))
    out_by_idx = {}
    probe_set = set(int(i) for i in probe_indices)
    xi_vals = np.asarray(xi(states), dtype=float).reshape(nb, k)
    for j in range(nn - 2, -1, -1):
        ds = _design(states[:, j, :], nodes[j], sol.basis)
        y_j = ds @ sol.y_coefs[j]
        z_j = (ds @ sol.z_coefs[j]).reshape(nb, k, d)
        gv = _driver_batch(g, 0.5 * (nodes[j] + nodes[j + 1]),
                           y_j, z_j, states[:, j, :])
        gsum += gv * dt[j]
        db = ensemble.increments[:, j, :]
        msum += np.einsum("pkd,pd->pk", z_j, db)
        if j in probe_set:
            defect = y_j - xi_vals - gsum + msum
            out_by_idx[j] = dict(
                t=float(nodes[j]),
                mean=defect.mean(axis=0),
                se=defect.std(axis=0, ddof=1) / np.sqrt(nb),
            )
    return [out_by_idx[int(i)] for i in probe_indices if int(i) in out_by_idx]


def solve_ucg(
    g: Generator,
    xi: Callable[[np.ndarray], np.ndarray],
    ensemble: PathEnsemble,
    n_schedule: Sequence[int] = (2, 4, 8, 16),
    basis: RegressionSpec = RegressionSpec(),
    search: SearchSpec | None = None,
    picard_iters: int = 5,
    picard_tol: float = 1e-10,
) -> BSDESolution:
    """Solve with a uniformly continuous driver via its Lipschitz schedule.

    Each index n in the schedule is solved on the same ensemble with the
    regularized driver; consecutive solutions feed the Cauchy table
    (sup over nodes of the ensemble mean |y_n - y_m|, and the time integral
    of mean |z_n - z_m|^2, each with a standard error).  The last solution
    is returned with the table and with the equation defect of the original
    driver at three probe times, measured on a fresh ensemble derived from
    the input seed; each defect error bar combines the evaluation noise
    with the fitting noise of the trained node means.  A
    CauchyStalledWarning (never an error) is issued when the gaps fail to
    decrease between the last two entries.
    """
    if len(n_schedule) < 1:
        raise CertificateViolated("schedule must contain at least one index")
    if search is None:
        # coarse in-loop search; pointwise accuracy is certified separately
        search = SearchSpec(points_per_axis=5, tol=1e-3, min_rounds=1,
                            max_rounds=2, top_candidates=1, refine_points=3,
                            refine_style="axis")
    nb = ensemble.n_paths
    dt = ensemble.grid.deltas
    table: dict = {}
    prev = None
    prev_n = None
    sol = None
    for idx, n in enumerate(n_schedule):
        approx = ApproxGenerator(g, n, search)
        sol = solve_lipschitz(approx, xi, ensemble, basis, picard_iters,
                              picard_tol, record_driver=(idx == len(n_schedule) - 1))
        if prev is not None:
            dy = np.linalg.norm(sol.y_ensemble - prev.y_ensemble, axis=2)  # [nb, nn]
            node_means = dy.mean(axis=0)
            j_star = int(np.argmax(node_means))
            sup_gap = float(node_means[j_star])
            sup_se = float(dy[:, j_star].std(ddof=1) / np.sqrt(nb))
            dz2 = np.sum((sol.z_ensemble - prev.z_ensemble) ** 2, axis=(2, 3))
            per_path = dz2 @ dt  # [nb]
            z_gap = float(per_path.mean())
            z_se = float(per_path.std(ddof=1) / np.sqrt(nb))
            table[(prev_n, n)] = CauchyGap(n=prev_n, m=n, sup_gap=sup_gap,
                                           sup_gap_se=sup_se, z_gap=z_gap,
                                           z_gap_se=z_se)
        prev, prev_n = sol, n

    keys = list(table)  # insertion order is schedule order
    if len(keys) >= 2:
        last, second = table[keys[-1]], table[keys[-2]]
        if last.sup_gap > second.sup_gap or last.z_gap > second.z_gap:
            warnings.warn("Cauchy gaps did not decrease between the last two "
                          "schedule entries", CauchyStalledWarning)

    nn = len(ensemble.grid)
    probes = sorted({0, nn // 3, (2 * nn) // 3})
    # the defect is measured on paths the regressions never saw, so its
    # error bars are exact given the solution; the seed offset is fixed to
    # keep runs reproducible
    eval_ens = simulate_paths(g.dim_d, ensemble.grid, nb,
                              seed=ensemble.seed + 0x9E3779B1)
    detail = equation_defect(sol, g, xi, eval_ens, probes)
    # the defect mean also carries the solution's own fitting noise (the
    # node means move at the scale of the training sample), so the total
    # error bar combines both parts
    se_train = _node_mean_se(sol)
    for rec, j in zip(detail, probes):
        rec["se_eval"] = rec["se"]
        rec["se_train"] = se_train[j]
        rec["se"] = np.hypot(rec["se_eval"], rec["se_train"])
    residual = max(float(np.max(np.abs(rec["mean"]))) for rec in detail)
    sol.diagnostics.cauchy_table = table
    sol.diagnostics.residual = residual
    sol.diagnostics.residual_detail = detail
    return sol


def _node_mean_se(sol: BSDESolution) -> np.ndarray:
    """Standard error of the node means of y, shape [len(grid), k].

    The regression step preserves sample means, so mean(y_j) equals the
    mean over paths of xi + sum_{l>=j} g_l dt exactly; the spread of
    those per-path sums is the right noise scale for the node mean.  The
    spread of the fitted y values themselves shrinks to zero toward the
    initial node (every path shares the starting state) and would report
    a vanishing error bar there.
    """
    if sol.driver_values is None:
        raise ValueError(
            "node-mean standard errors need recorded driver values; "
            "solve with record_driver=True"
        )
    dt = sol.grid.deltas
    terms = np.concatenate(
        [sol.driver_values * dt[None, :, None], sol.y_ensemble[:, -1:, :]],
        axis=1,
    )
    w = terms[:, ::-1, :].cumsum(axis=1)[:, ::-1, :]
    nb = w.shape[0]
    return w.std(axis=0, ddof=1) / np.sqrt(nb)


@dataclass
class DiagnosticReport:
    """Two-solution gap against the certified uniqueness bound recursion."""

    n: int
    j_steps: int
    c1: float
    a_n: float
    matched_paths: bool
    bound_paths: list
    final_bound_at_zero: float
    gap_nodes: np.ndarray  # [len(grid), k]
    se_nodes: np.ndarray
    satisfied: bool

    def to_csv(self, path) -> None:
        grid = self.bound_paths[-1].grid
        bound = self.bound_paths[-1].values
        k = self.gap_nodes.shape[1]
        with open(path, "w") as fh:
            cols = ["t", "bound"] + [f"gap_{i}" for i in range(k)] \
                + [f"se_{i}" for i in range(k)]
            fh.write(",".join(cols) + "\n")
            for j, t in enumerate(grid.nodes):
                row = [f"{t:.17g}", f"{bound[j]:.17g}"]
                row += [f"{v:.17g}" for v in self.gap_nodes[j]]
                row += [f"{v:.17g}" for v in self.se_nodes[j]]
                fh.write(",".join(row) + "\n")


def uniqueness_diagnostic(
    sol_a: BSDESolution,
    sol_b: BSDESolution,
    g: Generator,
    n: int,
    j_steps: int,
    search: SearchSpec = SearchSpec(),
    se_factor: float = 3.0,
) -> DiagnosticReport:
    """Check two solutions of one problem against the shrinking gap bound.

    The empirical gap (pathwise sup for a shared ensemble, difference of
    ensemble means otherwise) seeds the recursion f[1] = C1,
    f[j+1]_t = a_n + int_t^T u rho_n(k f[j]), whose iterates certify the
    largest gap the continuity certificates allow.  ``satisfied`` records
    whether the observed gap stays below the final iterate plus the
    Monte-Carlo allowance at every node.

    For independent ensembles the standard error of a node mean is taken
    from the per-path variables xi + sum g dt, whose average the fitted
    mean equals exactly; the spread of the fitted values themselves
    collapses toward early nodes and would understate the estimator noise.
    Requires both solutions to carry recorded driver values in that case.
    """
    if not np.array_equal(sol_a.grid.nodes, sol_b.grid.nodes):
        raise GridMismatch("solutions live on different grids")
    if sol_a.y_ensemble.shape != sol_b.y_ensemble.shape:
        raise GridMismatch("solutions have different ensemble shapes")
    nb, nn, k = sol_a.y_ensemble.shape
    if k != g.dim_k:
        raise GridMismatch("generator dimension does not match the solutions")
    matched = sol_a.seed == sol_b.seed

    if matched:
        gap_nodes = np.max(np.abs(sol_a.y_ensemble - sol_b.y_ensemble), axis=0)
        se_nodes = np.zeros_like(gap_nodes)
        c1 = float(np.max(np.linalg.norm(sol_a.y_ensemble - sol_b.y_ensemble,
                                         axis=2)))
    else:
        mean_a = sol_a.y_ensemble.mean(axis=0)
        mean_b = sol_b.y_ensemble.mean(axis=0)
        se_a = _node_mean_se(sol_a)
        se_b = _node_mean_se(sol_b)
        gap_nodes = np.abs(mean_a - mean_b)
        se_nodes = np.sqrt(se_a**2 + se_b**2)
        c1 = float(np.max(np.linalg.norm(gap_nodes + se_factor * se_nodes, axis=1)))

    a_n = bound_a_n(g.phi, g.v, Horizon.finite(sol_a.grid.t_eff), n,
                    growth_a=g.growth_a, t_eff=sol_a.grid.t_eff)
    rho_n = sup_convolution_modulus(g.rho, n, search)
    bounds = uniqueness_bound_recursion(g.u, rho_n, a_n, c1, k, n, j_steps,
                                        sol_a.grid)
    f_final = bounds[-1].values
    allowance = f_final[:, None] + se_factor * se_nodes + 1e-12
    satisfied = bool(np.all(gap_nodes <= allowance))
    return DiagnosticReport(n=n, j_steps=j_steps, c1=c1, a_n=a_n,
                            matched_paths=matched, bound_paths=bounds,
                            final_bound_at_zero=float(f_final[0]),
                            gap_nodes=gap_nodes, se_nodes=se_nodes,
                            satisfied=satisfied)
