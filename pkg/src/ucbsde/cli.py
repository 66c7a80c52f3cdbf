"""Experiment runner: config in, CSV artifacts and a manifest out.

Five experiment kinds share one entry point:

  dbde             deterministic final-value equations (linear cross-check,
                   separable closed forms, comparison pairs, explicit
                   recursion from a constant start)
  regularize-check envelope and bound table for a generator's Lipschitz
                   approximations
  bsde             backward induction with a Lipschitz driver
  ucg-scheme       approximation schedule for a uniformly continuous driver
  uniqueness-diag  two-seed gap against the uniqueness bound recursion

Outputs land in a directory resolved as --out, then the UCBSDE_OUT
environment variable, then the config's own ``out`` key, then
``<config stem>_out``.  Every run writes manifest.json; failures leave
error.json next to it.  CSV payloads are deterministic for a fixed config
and seed (floats are printed with %.17g and all randomness is seeded).

Exit codes: 0 success, 2 configuration problems, 3 runtime failures.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from . import builtins as catalog_mod
from .bsde import (
    RegressionSpec,
    simulate_paths,
    solve_lipschitz,
    solve_ucg,
    uniqueness_diagnostic,
)
from .config import ExperimentConfig
from .dbde import (
    DBDEProblem,
    picard_recursion,
    solve_fixed_point,
    solve_separable,
    verify_comparison,
)
from .errors import ConfigInvalid, UcbsdeError
from .grids import TimeGrid
from .quadrature import backward_cumulative, cell_integrals
from .regularize import ApproxGenerator, SearchSpec
from .weights import Horizon, bound_a_n, bound_b_n


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ucbsde",
        description="Run a configured experiment and write CSV artifacts.")
    parser.add_argument("--config", metavar="PATH", help="INI experiment file")
    parser.add_argument("--out", metavar="DIR", help="output directory")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--list-builtins", action="store_true",
                        help="print the catalog of named objects and exit")
    parser.add_argument("--quiet", action="store_true",
                        help="suppress progress output")
    args = parser.parse_args(argv)

    if args.list_builtins:
        print(catalog_mod.catalog(), end="")
        return 0
    if not args.config:
        print("error: --config is required (or use --list-builtins)",
              file=sys.stderr)
        return 2

    out_dir = None
    try:
        cfg = ExperimentConfig.from_file(args.config)
        seed = cfg.seed if args.seed is None else args.seed
        if seed < 0:
            raise ConfigInvalid("seed must be >= 0", field="seed")
        out_dir = _resolve_out(args, cfg)
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigInvalid(f"cannot create output directory {out_dir}: {exc}")
    except ConfigInvalid as exc:
        _report_failure(out_dir, exc, 2, args.quiet)
        return 2

    log = (lambda *a: None) if args.quiet else (lambda *a: print(*a))
    t0 = time.monotonic()
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            extra, outputs = _RUNNERS[cfg.kind](cfg, seed, out_dir, log)
        extra["warnings"] = [str(w.message) for w in caught]
    except ConfigInvalid as exc:
        _report_failure(out_dir, exc, 2, args.quiet)
        return 2
    except UcbsdeError as exc:
        _report_failure(out_dir, exc, 3, args.quiet)
        return 3
    except Exception as exc:  # noqa: BLE001 - runner must not crash the shell
        _report_failure(out_dir, exc, 3, args.quiet)
        return 3

    manifest = {
        "kind": cfg.kind,
        "seed": seed,
        "config": cfg.to_text(),
        "outputs": sorted(outputs),
        "versions": {
            "ucbsde": __version__,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
        },
        "wall_time_s": round(time.monotonic() - t0, 3),
    }
    manifest.update(extra)
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")
    log(f"wrote {out_dir}")
    return 0


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)!r}")


def _resolve_out(args, cfg: ExperimentConfig) -> Path:
    if args.out:
        return Path(args.out)
    env = os.environ.get("UCBSDE_OUT")
    if env:
        return Path(env)
    if cfg.out:
        return Path(cfg.out)
    return Path(f"{Path(args.config).stem}_out")


def _report_failure(out_dir, exc, code: int, quiet: bool) -> None:
    msg = f"{type(exc).__name__}: {exc}"
    print(f"error: {msg}", file=sys.stderr)
    if out_dir is not None and out_dir.is_dir():
        payload = {"error": type(exc).__name__, "message": str(exc),
                   "exit_code": code}
        field = getattr(exc, "field", None)
        if field:
            payload["field"] = field
        with open(out_dir / "error.json", "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


# ------------------------------------------------------------------ shared

def _horizon(cfg: ExperimentConfig) -> Horizon:
    h = cfg.horizon
    if h["kind"] == "finite":
        return Horizon.finite(h["t"])
    return Horizon.infinite(truncation_eps=h["truncation_eps"])


def _grid(cfg: ExperimentConfig, h: Horizon, u=None, v=None) -> TimeGrid:
    g = cfg.grid
    if g["kind"] == "auto":
        return TimeGrid.for_horizon(h, g["steps"], u=u, v=v, power=g["power"])
    weights = [w for w in (u, v) if w is not None]
    squared = [v] if v is not None else []
    t_eff = h.effective(weights, squared)
    meta = dict(horizon_t=h.t, truncated=h.kind == "infinite")
    if g["kind"] == "uniform":
        return TimeGrid.uniform(t_eff, g["steps"], **meta)
    return TimeGrid.graded(t_eff, g["steps"], g["power"], **meta)


def _scaled_weight(w, factor: float):
    from .weights import WeightFn

    factor = abs(float(factor))
    oracle = None
    if w.integral_oracle is not None:
        oracle = lambda t: factor * w.integral_oracle(t)
    return WeightFn(fn=lambda t: factor * w.fn(t), integral_oracle=oracle,
                    singular_at_zero=w.singular_at_zero,
                    name=f"{factor:g}*{w.name}")


def _tail_integrals(w, grid: TimeGrid) -> np.ndarray:
    mass = cell_integrals(w.fn, grid.nodes, singular_left=w.singular_at_zero)
    return backward_cumulative(mass)


def _linear_problem(u, a: float, c: float, delta: float, horizon, name: str):
    fac = abs(float(a))
    # u itself dominates the Lipschitz weight |a| u whenever |a| <= 1
    u_lip = u if fac <= 1.0 else _scaled_weight(u, fac)
    mass, _ = u.integrate(0.0, horizon.effective([u_lip]))
    return DBDEProblem(
        f=lambda t, y: u(t) * (a * y + c),
        delta=delta,
        u=u_lip,
        f0_integral_bound=abs(c) * mass * (1 + 1e-9) + 1e-12,
        horizon=horizon,
        name=name,
    )


def _linear_closed_form(u, a: float, c: float, delta: float,
                        grid: TimeGrid) -> np.ndarray:
    w = _tail_integrals(u, grid)
    if a == 0.0:
        return delta + c * w
    return ((a * delta + c) * np.exp(a * w) - c) / a


# ------------------------------------------------------------------ runners

def _run_dbde(cfg: ExperimentConfig, seed: int, out_dir: Path, log):
    mode = cfg.param("mode")
    u = catalog_mod.build("weight", cfg.param("u"), field="dbde.u")
    delta = cfg.param_float("delta")
    tol = cfg.param_float("tol")
    h = _horizon(cfg)
    grid = _grid(cfg, h, u=u)
    outputs = []
    extra = {"mode": mode, "t_eff": grid.t_eff}

    if mode == "linear":
        a, c = cfg.param_float("a"), cfg.param_float("c")
        p = _linear_problem(u, a, c, delta, h, "linear")
        log(f"dbde linear: a={a:g} c={c:g} delta={delta:g} t_eff={grid.t_eff:g}")
        path = solve_fixed_point(p, grid, tol=tol)
        path.to_csv(out_dir / "solution.csv")
        outputs.append("solution.csv")
        exact = _linear_closed_form(u, a, c, delta, grid)
        _write_csv(out_dir / "closed_form.csv", ["t", "y"],
                   np.column_stack([grid.nodes, exact]))
        outputs.append("closed_form.csv")
        extra["crossval_max_abs_err"] = float(np.max(np.abs(path.values - exact)))
        extra["iterations"] = path.meta["iterations"]
        extra["y0"] = float(path.values[0])
    elif mode == "separable":
        phi = catalog_mod.build("modulus", cfg.param("phi"), field="dbde.phi")
        log(f"dbde separable: phi={phi.name} delta={delta:g}")
        path = solve_separable(u, phi, delta, grid, tol_invert=tol)
        path.to_csv(out_dir / "solution.csv")
        outputs.append("solution.csv")
        extra["branch"] = path.meta["branch"]
        extra["nonunique"] = path.meta["nonunique"]
        extra["y0"] = float(path.values[0])
    elif mode == "comparison":
        a, c = cfg.param_float("a"), cfg.param_float("c")
        delta2, c2 = cfg.param_float("delta2"), cfg.param_float("c2")
        p = _linear_problem(u, a, c, delta, h, "dominating")
        p2 = _linear_problem(u, a, c2, delta2, h, "dominated")
        log(f"dbde comparison: (delta={delta:g}, c={c:g}) over "
            f"(delta={delta2:g}, c={c2:g})")
        rep = verify_comparison(p, p2, grid, tol_compare=tol)
        _write_csv(out_dir / "comparison.csv", ["t", "y", "y_prime", "gap"],
                   np.column_stack([grid.nodes, rep.path.values,
                                    rep.path_prime.values, rep.gap]))
        outputs.append("comparison.csv")
        extra.update(min_gap=rep.min_gap, ordered=rep.ordered,
                     strict_required=rep.strict_required, strict=rep.strict)
    else:  # picard
        a, c = cfg.param_float("a"), cfg.param_float("c")
        c0 = cfg.param_float("c0")
        n_steps = cfg.param_int("n_steps")
        p = _linear_problem(u, a, c, delta, h, "picard")
        log(f"dbde picard: {n_steps} iterates from y = {c0:g}")
        seq = picard_recursion(p, grid, c0, n_steps)
        cols = ["t"] + [f"iter_{j}" for j in range(1, n_steps + 1)] + ["fixed_point"]
        data = np.column_stack([grid.nodes]
                               + [it.values for it in seq.paths]
                               + [seq.fixed_point.values])
        _write_csv(out_dir / "iterates.csv", cols, data)
        outputs.append("iterates.csv")
        extra["sup_distance"] = seq.sup_distance
        extra["y0"] = float(seq.fixed_point.values[0])
    return extra, outputs


def _run_regularize(cfg: ExperimentConfig, seed: int, out_dir: Path, log):
    g = catalog_mod.build("generator", cfg.param("generator"),
                          field="regularize.generator")
    n_list = cfg.param_int_list("n_list")
    samples = cfg.param_int("samples")
    h = _horizon(cfg)
    grid = _grid(cfg, h, u=g.u, v=g.v)
    rng = np.random.default_rng(seed)
    t_lo = grid.nodes[1] if (g.u.singular_at_zero or g.v.singular_at_zero) else 0.0
    ts = rng.uniform(max(t_lo, 1e-6), grid.t_eff, samples)
    ys = rng.normal(0.0, 2.0, (samples, g.dim_k))
    zs = rng.normal(0.0, 2.0, (samples, g.dim_k, g.dim_d))
    search = SearchSpec()
    rows = []
    for n in n_list:
        log(f"regularize-check: n={n} on {samples} sample points")
        approx = ApproxGenerator(g, n, search)
        gap_min, gap_max, excess = math.inf, -math.inf, -math.inf
        bn = bound_b_n(g.u, g.v, g.rho, g.phi, n, ts)
        for i in range(g.dim_k):
            base = g.eval_component(i, ts, ys, zs[:, i, :])
            reg = approx.eval_component(i, ts, ys, zs[:, i, :])
            gap = base - reg
            gap_min = min(gap_min, float(np.min(gap)))
            gap_max = max(gap_max, float(np.max(gap)))
            excess = max(excess, float(np.max(gap - bn)))
        a_n = bound_a_n(g.phi, g.v, h, n, growth_a=g.growth_a, t_eff=grid.t_eff)
        ok = gap_min >= -1e-9 and excess <= 1e-9
        rows.append([n, a_n, gap_min, gap_max, excess, int(ok)])
    _write_csv(out_dir / "bounds.csv",
               ["n", "a_n", "gap_min", "gap_max", "excess_over_b_n", "ok"],
               np.asarray(rows, dtype=float))
    all_ok = bool(all(r[5] for r in rows))
    return {"generator": g.name, "samples": samples, "all_ok": all_ok}, ["bounds.csv"]


def _run_bsde(cfg: ExperimentConfig, seed: int, out_dir: Path, log):
    g = catalog_mod.build("generator", cfg.param("generator"), field="bsde.generator")
    xi = _terminal(cfg, g, "bsde.terminal")
    h = _horizon(cfg)
    grid = _grid(cfg, h, u=g.u, v=g.v)
    paths = cfg.param_int("paths")
    basis = RegressionSpec(degree=cfg.param_int("degree"))
    log(f"bsde: {paths} paths on {len(grid) - 1} steps, t_eff={grid.t_eff:g}")
    ens = simulate_paths(g.dim_d, grid, paths, seed)
    sol = solve_lipschitz(g, xi, ens, basis,
                          picard_iters=cfg.param_int("picard_iters"))
    sol.to_summary_csv(out_dir / "summary.csv")
    extra = {
        "y0": [float(v) for v in sol.y0],
        "max_picard_gap": float(max(sol.diagnostics.picard_gaps)),
        "t_eff": grid.t_eff,
    }
    return extra, ["summary.csv"]


def _run_ucg(cfg: ExperimentConfig, seed: int, out_dir: Path, log):
    g = catalog_mod.build("generator", cfg.param("generator"), field="ucg.generator")
    xi = _terminal(cfg, g, "ucg.terminal")
    h = _horizon(cfg)
    grid = _grid(cfg, h, u=g.u, v=g.v)
    paths = cfg.param_int("paths")
    schedule = cfg.param_int_list("schedule")
    basis = RegressionSpec(degree=cfg.param_int("degree"))
    max_rounds = cfg.param_int("search_rounds")
    search = SearchSpec(points_per_axis=cfg.param_int("search_points"),
                        tol=cfg.param_float("search_tol"),
                        min_rounds=min(2, max_rounds), max_rounds=max_rounds,
                        top_candidates=1)
    log(f"ucg-scheme: schedule {schedule} with {paths} paths on "
        f"{len(grid) - 1} steps")
    ens = simulate_paths(g.dim_d, grid, paths, seed)
    sol = solve_ucg(g, xi, ens, schedule, basis, search,
                    picard_iters=cfg.param_int("picard_iters"))
    sol.to_summary_csv(out_dir / "summary.csv")
    sol.diagnostics.to_diagnostics_csv(out_dir / "diagnostics.csv")
    table = sol.diagnostics.cauchy_table
    extra = {
        "y0": [float(v) for v in sol.y0],
        "schedule": schedule,
        "residual": sol.diagnostics.residual,
        "cauchy_sup_gaps": {f"{a}->{b}": table[(a, b)].sup_gap
                            for (a, b) in sorted(table)},
        "t_eff": grid.t_eff,
    }
    return extra, ["summary.csv", "diagnostics.csv"]


def _run_uniqueness(cfg: ExperimentConfig, seed: int, out_dir: Path, log):
    g = catalog_mod.build("generator", cfg.param("generator"),
                          field="uniqueness.generator")
    xi = _terminal(cfg, g, "uniqueness.terminal")
    h = _horizon(cfg)
    grid = _grid(cfg, h, u=g.u, v=g.v)
    paths = cfg.param_int("paths")
    seeds = cfg.param_int_list("seeds")
    n = cfg.param_int("n")
    j_steps = cfg.param_int("j_steps")
    basis = RegressionSpec(degree=cfg.param_int("degree"))
    log(f"uniqueness-diag: seeds {seeds}, n={n}, {j_steps} bound iterates")
    sols = []
    for s in seeds:
        ens = simulate_paths(g.dim_d, grid, paths, s)
        sols.append(solve_lipschitz(g, xi, ens, basis))
    report = uniqueness_diagnostic(sols[0], sols[1], g, n, j_steps)
    report.to_csv(out_dir / "diagnostic.csv")
    extra = {
        "c1": report.c1,
        "a_n": report.a_n,
        "final_bound_at_zero": report.final_bound_at_zero,
        "matched_paths": report.matched_paths,
        "satisfied": report.satisfied,
        "seeds": seeds,
    }
    return extra, ["diagnostic.csv"]


def _terminal(cfg: ExperimentConfig, g, field: str):
    xi = catalog_mod.build("terminal", cfg.param("terminal"), field=field)
    if xi.dim_k != g.dim_k:
        raise ConfigInvalid(
            f"terminal produces {xi.dim_k} components but the generator "
            f"has {g.dim_k}", field=field)
    return xi


def _write_csv(path, header, data: np.ndarray) -> None:
    data = np.atleast_2d(np.asarray(data, dtype=float))
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in data:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


_RUNNERS = {
    "dbde": _run_dbde,
    "regularize-check": _run_regularize,
    "bsde": _run_bsde,
    "ucg-scheme": _run_ucg,
    "uniqueness-diag": _run_uniqueness,
}


if __name__ == "__main__":
    sys.exit(main())
