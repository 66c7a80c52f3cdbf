"""Experiment configuration: INI parsing, validation, canonical round-trip.

A config has a [run] section naming the experiment kind, optional [horizon]
and [grid] sections, and one kind-specific section.  Catalog objects are
requested as ``name`` or ``name:key=value,...``.  Every validation failure
raises ConfigInvalid carrying a ``section.key`` field pointer.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field as dc_field

from .errors import ConfigInvalid

KINDS = ("dbde", "regularize-check", "bsde", "ucg-scheme", "uniqueness-diag")

# section holding the kind-specific keys, per kind
KIND_SECTION = {
    "dbde": "dbde",
    "regularize-check": "regularize",
    "bsde": "bsde",
    "ucg-scheme": "ucg",
    "uniqueness-diag": "uniqueness",
}

_RUN_KEYS = {"kind", "seed", "out"}
_HORIZON_KEYS = {"kind", "t", "truncation_eps"}
_GRID_KEYS = {"steps", "kind", "power"}
_SECTION_KEYS = {
    "dbde": {"mode", "u", "phi", "delta", "a", "c", "delta2", "c2", "c0",
             "n_steps", "tol"},
    "regularize": {"generator", "n_list", "samples"},
    "bsde": {"generator", "terminal", "paths", "picard_iters", "degree"},
    "ucg": {"generator", "terminal", "paths", "schedule", "degree",
            "search_points", "search_tol", "search_rounds", "picard_iters"},
    "uniqueness": {"generator", "terminal", "paths", "seeds", "n", "j_steps",
                   "degree"},
}

_DBDE_MODES = ("linear", "separable", "comparison", "picard")
_GRID_KINDS = ("auto", "uniform", "graded")


@dataclass
class ExperimentConfig:
    kind: str
    seed: int = 0
    out: str | None = None
    horizon: dict = dc_field(default_factory=lambda: {"kind": "finite", "t": 1.0})
    grid: dict = dc_field(default_factory=lambda: {"steps": 64, "kind": "auto",
                                                   "power": 2.0})
    params: dict = dc_field(default_factory=dict)

    # -- parsing -----------------------------------------------------------

    @staticmethod
    def from_text(text: str) -> "ExperimentConfig":
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigInvalid(f"config does not parse as INI: {exc}")

        if "run" not in parser:
            raise ConfigInvalid("missing [run] section", field="run")
        run = dict(parser["run"])
        _reject_unknown("run", run, _RUN_KEYS)
        kind = run.get("kind", "").strip()
        if kind not in KINDS:
            raise ConfigInvalid(
                f"kind must be one of {', '.join(KINDS)}; got {kind!r}",
                field="run.kind")
        seed = _as_int("run.seed", run.get("seed", "0"))
        if seed < 0:
            raise ConfigInvalid("seed must be >= 0", field="run.seed")
        out = run.get("out") or None

        horizon = {"kind": "finite", "t": 1.0}
        if "horizon" in parser:
            raw = dict(parser["horizon"])
            _reject_unknown("horizon", raw, _HORIZON_KEYS)
            hkind = raw.get("kind", "finite").strip()
            if hkind not in ("finite", "infinite"):
                raise ConfigInvalid("horizon kind must be finite or infinite",
                                    field="horizon.kind")
            horizon = {"kind": hkind}
            if hkind == "finite":
                horizon["t"] = _as_float("horizon.t", raw.get("t", "1.0"))
                if not horizon["t"] > 0:
                    raise ConfigInvalid("finite horizon needs t > 0",
                                        field="horizon.t")
            else:
                horizon["truncation_eps"] = _as_float(
                    "horizon.truncation_eps", raw.get("truncation_eps", "1e-8"))
                if not 0 < horizon["truncation_eps"] < 1:
                    raise ConfigInvalid("truncation_eps must be in (0, 1)",
                                        field="horizon.truncation_eps")

        grid = {"steps": 64, "kind": "auto", "power": 2.0}
        if "grid" in parser:
            raw = dict(parser["grid"])
            _reject_unknown("grid", raw, _GRID_KEYS)
            grid["steps"] = _as_int("grid.steps", raw.get("steps", "64"))
            if grid["steps"] < 1:
                raise ConfigInvalid("grid needs steps >= 1", field="grid.steps")
            grid["kind"] = raw.get("kind", "auto").strip()
            if grid["kind"] not in _GRID_KINDS:
                raise ConfigInvalid(
                    f"grid kind must be one of {', '.join(_GRID_KINDS)}",
                    field="grid.kind")
            grid["power"] = _as_float("grid.power", raw.get("power", "2.0"))
            if not grid["power"] > 0:
                raise ConfigInvalid("grid power must be > 0", field="grid.power")

        section = KIND_SECTION[kind]
        params: dict = {}
        if section in parser:
            raw = dict(parser[section])
            _reject_unknown(section, raw, _SECTION_KEYS[section])
            params = {k: v.strip() for k, v in raw.items()}
        extra = [s for s in parser.sections()
                 if s not in ("run", "horizon", "grid", section)]
        if extra:
            raise ConfigInvalid(f"unexpected section [{extra[0]}]", field=extra[0])

        cfg = ExperimentConfig(kind=kind, seed=seed, out=out, horizon=horizon,
                               grid=grid, params=params)
        cfg._validate_params()
        return cfg

    @staticmethod
    def from_file(path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigInvalid(f"cannot read config {path}: {exc}")
        return ExperimentConfig.from_text(text)

    # -- validation --------------------------------------------------------

    def _validate_params(self) -> None:
        section = KIND_SECTION[self.kind]
        p = self.params
        need = lambda key: _require(section, p, key)
        if self.kind == "dbde":
            mode = p.get("mode", "linear")
            if mode not in _DBDE_MODES:
                raise ConfigInvalid(
                    f"dbde mode must be one of {', '.join(_DBDE_MODES)}",
                    field="dbde.mode")
            p["mode"] = mode
            p.setdefault("u", "exp_decay")
            _as_float("dbde.delta", p.setdefault("delta", "1.0"))
            if mode in ("linear", "comparison", "picard"):
                _as_float("dbde.a", p.setdefault("a", "1.0"))
                _as_float("dbde.c", p.setdefault("c", "0.0"))
            if mode == "separable":
                p.setdefault("phi", "identity")
            if mode == "comparison":
                _as_float("dbde.delta2", p.setdefault("delta2", "0.0"))
                _as_float("dbde.c2", p.setdefault("c2", "0.0"))
            if mode == "picard":
                _as_float("dbde.c0", p.setdefault("c0", "0.0"))
                n = _as_int("dbde.n_steps", p.setdefault("n_steps", "8"))
                if n < 1:
                    raise ConfigInvalid("picard needs n_steps >= 1",
                                        field="dbde.n_steps")
            _as_float("dbde.tol", p.setdefault("tol", "1e-10"))
        elif self.kind == "regularize-check":
            need("generator")
            ns = _int_list("regularize.n_list", p.setdefault("n_list", "2,4,8"))
            if any(n < 1 for n in ns):
                raise ConfigInvalid("n_list entries must be >= 1",
                                    field="regularize.n_list")
            samples = _as_int("regularize.samples", p.setdefault("samples", "64"))
            if samples < 1:
                raise ConfigInvalid("samples must be >= 1",
                                    field="regularize.samples")
        elif self.kind in ("bsde", "ucg-scheme", "uniqueness-diag"):
            need("generator")
            need("terminal")
            paths = _as_int(f"{section}.paths", p.setdefault("paths", "4096"))
            if paths < 2:
                raise ConfigInvalid("paths must be >= 2", field=f"{section}.paths")
            deg = _as_int(f"{section}.degree", p.setdefault("degree", "3"))
            if deg < 0:
                raise ConfigInvalid("degree must be >= 0",
                                    field=f"{section}.degree")
            if self.kind == "bsde":
                _as_int("bsde.picard_iters", p.setdefault("picard_iters", "5"))
            if self.kind == "ucg-scheme":
                sched = _int_list("ucg.schedule", p.setdefault("schedule", "2,4,8,16"))
                if any(n < 1 for n in sched) or len(sched) < 1:
                    raise ConfigInvalid("schedule needs positive entries",
                                        field="ucg.schedule")
                _as_int("ucg.search_points", p.setdefault("search_points", "9"))
                _as_float("ucg.search_tol", p.setdefault("search_tol", "1e-4"))
                if _as_int("ucg.search_rounds", p.setdefault("search_rounds", "8")) < 1:
                    raise ConfigInvalid("search_rounds must be >= 1",
                                        field="ucg.search_rounds")
                _as_int("ucg.picard_iters", p.setdefault("picard_iters", "5"))
            if self.kind == "uniqueness-diag":
                seeds = _int_list("uniqueness.seeds", p.setdefault("seeds", "1,2"))
                if len(seeds) != 2:
                    raise ConfigInvalid("seeds must list exactly two integers",
                                        field="uniqueness.seeds")
                if _as_int("uniqueness.n", p.setdefault("n", "4")) < 1:
                    raise ConfigInvalid("n must be >= 1", field="uniqueness.n")
                if _as_int("uniqueness.j_steps", p.setdefault("j_steps", "6")) < 1:
                    raise ConfigInvalid("j_steps must be >= 1",
                                        field="uniqueness.j_steps")

    # -- canonical text ----------------------------------------------------

    def to_text(self) -> str:
        buf = io.StringIO()
        buf.write("[run]\n")
        buf.write(f"kind = {self.kind}\n")
        buf.write(f"seed = {self.seed}\n")
        if self.out:
            buf.write(f"out = {self.out}\n")
        buf.write("\n[horizon]\n")
        buf.write(f"kind = {self.horizon['kind']}\n")
        if self.horizon["kind"] == "finite":
            buf.write(f"t = {self.horizon['t']:.17g}\n")
        else:
            buf.write(f"truncation_eps = {self.horizon['truncation_eps']:.17g}\n")
        buf.write("\n[grid]\n")
        buf.write(f"steps = {self.grid['steps']}\n")
        buf.write(f"kind = {self.grid['kind']}\n")
        buf.write(f"power = {self.grid['power']:.17g}\n")
        section = KIND_SECTION[self.kind]
        if self.params:
            buf.write(f"\n[{section}]\n")
            for key in sorted(self.params):
                buf.write(f"{key} = {self.params[key]}\n")
        return buf.getvalue()

    # convenience accessors used by the runner

    def param(self, key: str, default=None) -> str | None:
        return self.params.get(key, default)

    def param_int(self, key: str) -> int:
        return _as_int(f"{KIND_SECTION[self.kind]}.{key}", self.params[key])

    def param_float(self, key: str) -> float:
        return _as_float(f"{KIND_SECTION[self.kind]}.{key}", self.params[key])

    def param_int_list(self, key: str) -> list[int]:
        return _int_list(f"{KIND_SECTION[self.kind]}.{key}", self.params[key])


def _reject_unknown(section: str, raw: dict, allowed: set) -> None:
    for key in raw:
        if key not in allowed:
            raise ConfigInvalid(f"unknown key {key!r} in [{section}]",
                                field=f"{section}.{key}")


def _require(section: str, params: dict, key: str) -> str:
    val = params.get(key, "").strip()
    if not val:
        raise ConfigInvalid(f"[{section}] needs {key}", field=f"{section}.{key}")
    return val


def _as_int(field: str, text) -> int:
    try:
        return int(str(text).strip())
    except (TypeError, ValueError):
        raise ConfigInvalid(f"{field} must be an integer; got {text!r}", field=field)


def _as_float(field: str, text) -> float:
    try:
        return float(str(text).strip())
    except (TypeError, ValueError):
        raise ConfigInvalid(f"{field} must be a number; got {text!r}", field=field)


def _int_list(field: str, text) -> list[int]:
    parts = [p.strip() for p in str(text).split(",") if p.strip()]
    if not parts:
        raise ConfigInvalid(f"{field} must list integers", field=field)
    return [_as_int(field, p) for p in parts]
