"""Named catalog of weights, moduli, generators, and terminal conditions.

Every entry is a factory keyed by a stable name with scalar keyword
parameters, so config files can request objects as ``name:key=value,...``.
Weight factories attach closed-form antiderivatives where one exists; they
serve as independent cross-checks of the quadrature, never as its input.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigInvalid
from .regularize import Generator
from .weights import ModulusFn, WeightFn


# ---------------------------------------------------------------- weights

def exp_decay(rate: float = 1.0, amp: float = 1.0) -> WeightFn:
    """w(t) = amp * exp(-rate * t); integrable on [0, inf) for rate > 0."""
    if rate <= 0 or amp < 0:
        raise ConfigInvalid("exp_decay needs rate > 0 and amp >= 0", field="rate")
    return WeightFn(
        fn=lambda t: amp * np.exp(-rate * t),
        integral_oracle=lambda t: -amp * math.exp(-rate * t) / rate,
        name=f"exp_decay(rate={rate:g},amp={amp:g})",
    )


def const(value: float = 1.0) -> WeightFn:
    if value < 0:
        raise ConfigInvalid("const weight must be nonnegative", field="value")
    return WeightFn(
        fn=lambda t: np.full_like(np.asarray(t, dtype=float), value),
        integral_oracle=lambda t: value * t,
        name=f"const({value:g})",
    )


def inv_sqrt_cut(delta: float = 0.1) -> WeightFn:
    """1/sqrt(t) on (0, delta), then 1/sqrt(1 + t^2): integrable singularity
    at zero with an integrable tail."""
    if not 0 < delta:
        raise ConfigInvalid("inv_sqrt_cut needs delta > 0", field="delta")

    def fn(t):
        t = np.asarray(t, dtype=float)
        ts = np.maximum(t, 1e-300)
        return np.where(t < delta, 1.0 / np.sqrt(ts), 1.0 / np.sqrt(1.0 + t * t))

    def oracle(t):
        if t <= delta:
            return 2.0 * math.sqrt(max(t, 0.0))
        return 2.0 * math.sqrt(delta) + math.asinh(t) - math.asinh(delta)

    return WeightFn(fn=fn, integral_oracle=oracle, singular_at_zero=True,
                    name=f"inv_sqrt_cut(delta={delta:g})")


def inv_fourthroot_cut(delta: float = 0.1) -> WeightFn:
    """t^(-1/4) on (0, delta), then 1/(1 + t); the square is also integrable
    near zero, as the martingale-integrand weight must be."""
    if not 0 < delta:
        raise ConfigInvalid("inv_fourthroot_cut needs delta > 0", field="delta")

    def fn(t):
        t = np.asarray(t, dtype=float)
        ts = np.maximum(t, 1e-300)
        return np.where(t < delta, ts**-0.25, 1.0 / (1.0 + t))

    def oracle(t):
        if t <= delta:
            return (4.0 / 3.0) * max(t, 0.0) ** 0.75
        return (4.0 / 3.0) * delta**0.75 + math.log1p(t) - math.log1p(delta)

    return WeightFn(fn=fn, integral_oracle=oracle, singular_at_zero=True,
                    name=f"inv_fourthroot_cut(delta={delta:g})")


# ----------------------------------------------------------------- moduli

def identity() -> ModulusFn:
    """rho(x) = x: the Lipschitz modulus; 1/rho has a divergent integral at 0."""
    return ModulusFn(fn=lambda x: np.asarray(x, dtype=float), growth_a=1.0,
                     osgood_declared=True, name="identity")


def sqrt() -> ModulusFn:
    """phi(x) = sqrt(x): integrable 1/phi, so not of the divergence class."""
    return ModulusFn(fn=lambda x: np.sqrt(np.asarray(x, dtype=float)),
                     growth_a=0.5, osgood_declared=False, name="sqrt")


def xlog(delta: float = 0.1) -> ModulusFn:
    """x log(1/x) up to delta, continued linearly: concave, dominates the
    identity when delta <= exp(-2), and 1/rho has a divergent integral at 0.

    Requires delta < 1/e so the log part is increasing on [0, delta].
    """
    if not 0 < delta < math.exp(-1):
        raise ConfigInvalid("xlog needs 0 < delta < 1/e", field="delta")
    slope = math.log(1.0 / delta) - 1.0

    def fn(x):
        x = np.asarray(x, dtype=float)
        xs = np.maximum(x, 1e-300)
        return np.where(x < delta, -xs * np.log(xs), slope * x + delta)

    return ModulusFn(fn=fn, growth_a=max(slope, delta), osgood_declared=True,
                     name=f"xlog(delta={delta:g})")


# ------------------------------------------------------------- generators

def _norm_rows(arr: np.ndarray) -> np.ndarray:
    return np.linalg.norm(np.asarray(arr, dtype=float), axis=1)


def example_s3_generator(delta: float = 0.1, k: int = 2, d: int = 1,
                         with_noise: bool = True) -> Generator:
    """Singular-weight driver outside every Lipschitz class.

    Component i is f1(t) (h(|y|) + 1) + f2(t) sqrt(|z_i|), with f1, f2 the
    cut singular weights and h the x log(1/x) modulus; the optional additive
    |B_t| term rides along as a state term.  Continuity certificates hold
    with u = f1, v = f2, rho = h, phi = sqrt because h and sqrt are concave,
    vanish at zero, and are therefore subadditive.
    """
    k, d = int(k), int(d)
    if k < 1 or d < 1:
        raise ConfigInvalid("example_s3_generator needs k >= 1 and d >= 1", field="k")
    u = inv_sqrt_cut(delta)
    v = inv_fourthroot_cut(delta)
    h = xlog(delta)

    def component(t, y, zrow):
        return u(t) * (h(_norm_rows(y)) + 1.0) + v(t) * np.sqrt(_norm_rows(zrow))

    state = (lambda t, b: _norm_rows(b)) if with_noise else None
    return Generator(dim_k=k, dim_d=d, components=tuple([component] * k),
                     u=u, v=v, rho=h, phi=sqrt(), state_term=state,
                     name=f"example_s3(delta={delta:g},k={k},d={d})")


def zero_generator(k: int = 1, d: int = 1) -> Generator:
    """g = 0: the conditional-expectation baseline."""
    k, d = int(k), int(d)

    def component(t, y, zrow):
        return np.zeros(np.asarray(y).shape[0])

    return Generator(dim_k=k, dim_d=d, components=tuple([component] * k),
                     u=exp_decay(), v=exp_decay(), rho=identity(), phi=sqrt(),
                     g0_bound=0.0, name=f"zero(k={k},d={d})")


def linear_y(k: int = 1, d: int = 1, rate: float = 1.0) -> Generator:
    """g_i = rate * y_i: closed-form exponential growth of the mean."""
    k, d = int(k), int(d)
    r = float(rate)

    def make(i):
        return lambda t, y, zrow: r * np.asarray(y, dtype=float)[:, i]

    return Generator(dim_k=k, dim_d=d,
                     components=tuple(make(i) for i in range(k)),
                     u=const(abs(r) if r != 0 else 1.0), v=const(1.0),
                     rho=identity(), phi=identity(), g0_bound=0.0,
                     name=f"linear_y(rate={r:g})")


def sin_drift(k: int = 2, d: int = 1, amp: float = 0.05, rate: float = 1.0) -> Generator:
    """g_i = amp e^(-rate t) sin(y_i): 1-Lipschitz in y, no z dependence.

    The y modulus is declared as the x log(1/x) certificate with corner
    exp(-2), which dominates the identity, so the uniqueness recursion is
    exercised with a genuinely nonlinear modulus while v = 0 keeps the
    z-part of the bound at zero.
    """
    k, d = int(k), int(d)
    u = exp_decay(rate=rate, amp=amp)

    def make(i):
        return lambda t, y, zrow: np.sin(np.asarray(y, dtype=float)[:, i])

    def scaled(i):
        comp = make(i)
        return lambda t, y, zrow: u(t) * comp(t, y, zrow)

    return Generator(dim_k=k, dim_d=d,
                     components=tuple(scaled(i) for i in range(k)),
                     u=u, v=const(0.0), rho=xlog(math.exp(-2.0)), phi=sqrt(),
                     g0_bound=0.0, name=f"sin_drift(amp={amp:g},rate={rate:g})")


# -------------------------------------------------------------- terminals

def bt_linear(k: int = 1) -> "TerminalFn":
    """xi = sum of the terminal Brownian coordinates, copied to each component."""
    k = int(k)

    def fn(states):
        tot = np.sum(states[:, -1, :], axis=1)
        return np.repeat(tot[:, None], k, axis=1)

    return TerminalFn(fn=fn, dim_k=k, name=f"bt_linear(k={k})")


def constant(value: float = 1.0, k: int = 1) -> "TerminalFn":
    k = int(k)

    def fn(states):
        return np.full((states.shape[0], k), float(value))

    return TerminalFn(fn=fn, dim_k=k, name=f"constant(value={value:g},k={k})")


def bt_tanh(scale: float = 1.0, k: int = 1) -> "TerminalFn":
    """xi = tanh(scale * sum B_T): bounded, so terminal integrability is free."""
    k = int(k)

    def fn(states):
        tot = np.tanh(float(scale) * np.sum(states[:, -1, :], axis=1))
        return np.repeat(tot[:, None], k, axis=1)

    return TerminalFn(fn=fn, dim_k=k, name=f"bt_tanh(scale={scale:g},k={k})")


class TerminalFn:
    """Terminal condition as a function of the whole Brownian path array."""

    def __init__(self, fn, dim_k: int, name: str):
        self.fn = fn
        self.dim_k = dim_k
        self.name = name

    def __call__(self, states: np.ndarray) -> np.ndarray:
        return np.asarray(self.fn(np.asarray(states, dtype=float)), dtype=float)


# ------------------------------------------------------------------ lookup

WEIGHTS = {
    "exp_decay": exp_decay,
    "const": const,
    "inv_sqrt_cut": inv_sqrt_cut,
    "inv_fourthroot_cut": inv_fourthroot_cut,
}

MODULI = {
    "identity": identity,
    "sqrt": sqrt,
    "xlog": xlog,
}

GENERATORS = {
    "example_s3_generator": example_s3_generator,
    "zero": zero_generator,
    "linear_y": linear_y,
    "sin_drift": sin_drift,
}

TERMINALS = {
    "bt_linear": bt_linear,
    "constant": constant,
    "bt_tanh": bt_tanh,
}

_REGISTRY = {
    "weight": WEIGHTS,
    "modulus": MODULI,
    "generator": GENERATORS,
    "terminal": TERMINALS,
}

_PARAMS = {
    "exp_decay": "rate=1.0, amp=1.0",
    "const": "value=1.0",
    "inv_sqrt_cut": "delta=0.1",
    "inv_fourthroot_cut": "delta=0.1",
    "identity": "",
    "sqrt": "",
    "xlog": "delta=0.1",
    "example_s3_generator": "delta=0.1, k=2, d=1, with_noise=true",
    "zero": "k=1, d=1",
    "linear_y": "k=1, d=1, rate=1.0",
    "sin_drift": "k=2, d=1, amp=0.05, rate=1.0",
    "bt_linear": "k=1",
    "constant": "value=1.0, k=1",
    "bt_tanh": "scale=1.0, k=1",
}


def _coerce(text: str):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def build(category: str, spec: str, field: str | None = None):
    """Instantiate a catalog entry from ``name`` or ``name:key=val,key=val``."""
    field = field or category
    if category not in _REGISTRY:
        raise ConfigInvalid(f"unknown catalog category {category!r}", field=field)
    reg = _REGISTRY[category]
    name, _, argstr = str(spec).partition(":")
    name = name.strip()
    if name not in reg:
        raise ConfigInvalid(
            f"unknown {category} builtin {name!r}; known: {', '.join(sorted(reg))}",
            field=field)
    kwargs = {}
    if argstr.strip():
        for part in argstr.split(","):
            key, eq, val = part.partition("=")
            if not eq:
                raise ConfigInvalid(f"malformed parameter {part!r} for {name}",
                                    field=field)
            kwargs[key.strip()] = _coerce(val.strip())
    try:
        return reg[name](**kwargs)
    except TypeError as exc:
        raise ConfigInvalid(f"bad parameters for {name}: {exc}", field=field)


def catalog() -> str:
    """Stable, human-readable listing of every builtin and its parameters."""
    lines = []
    for category in ("weight", "modulus", "generator", "terminal"):
        lines.append(f"[{category}]")
        for name in sorted(_REGISTRY[category]):
            params = _PARAMS.get(name, "")
            lines.append(f"  {name}({params})")
        lines.append("")
    return "\n".join(lines).rstrip() + "\n"
