"""Model parameters, damping potential, initial data and grid construction.

The Cauchy problem under study is

    u_tt - Lap(u) + V(|x|) u_t = |u|^p  (or |u_t|^p),   V(r) = mu*(1+r)^-beta,

with radial initial data u(0) = eps*f, u_t(0) = eps*g supported in the unit
ball.  beta > 2 is the scattering range the lifespan theorems cover; smaller
beta is allowed for experiments but flagged.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

NONLINEARITIES = ("power_u", "power_ut", "none")


@dataclass(frozen=True)
class ModelParams:
    """Full parameter set of one Cauchy problem.

    f_amp/g_amp scale the polynomial bump (1-r^2)^data_k on r < 1 used for
    initial displacement/velocity.  Both zero gives the trivial solution and
    is allowed (useful as a null test) but is outside the theorems' scope,
    which `theorem_regime` reports together with the beta > 2 requirement.
    """

    n: int = 3
    mu: float = 1.0
    beta: float = 3.0
    p: float = 2.0
    nonlinearity: str = "power_u"
    eps: float = 0.5
    data_k: int = 4
    f_amp: float = 1.0
    g_amp: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"n must be an integer >= 2, got {self.n!r}")
        if self.mu < 0:
            raise ValueError(f"mu must be >= 0, got {self.mu}")
        if self.beta <= 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if self.p <= 1:
            raise ValueError(f"p must be > 1, got {self.p}")
        if self.nonlinearity not in NONLINEARITIES:
            raise ValueError(
                f"nonlinearity must be one of {NONLINEARITIES}, got {self.nonlinearity!r}")
        if self.eps <= 0:
            raise ValueError(f"eps must be > 0, got {self.eps}")
        if int(self.data_k) != self.data_k or self.data_k < 3:
            raise ValueError(f"data_k must be an integer >= 3, got {self.data_k!r}")
        if self.f_amp < 0 or self.g_amp < 0:
            raise ValueError("data amplitudes must be >= 0")

    @property
    def theorem_regime(self) -> bool:
        """True iff the blow-up theorems' hypotheses hold (scattering damping,
        nontrivial data)."""
        return self.beta > 2.0 and (self.f_amp > 0 or self.g_amp > 0)


@dataclass(frozen=True)
class RadialGrid:
    """Uniform radial grid with time step locked to a CFL fraction of dr.

    r_max is sized so the outer Dirichlet row is exact: data start in the unit
    ball and propagate at speed one, so nothing reaches r_max before t_max as
    long as r_max >= t_max + 1 + 2*dr.
    """

    dr: float
    dt: float
    t_max: float
    r: np.ndarray = field(repr=False)

    @property
    def nr(self) -> int:
        return self.r.size

    @property
    def r_max(self) -> float:
        return float(self.r[-1])

    @property
    def n_steps(self) -> int:
        return int(round(self.t_max / self.dt))


def potential(r, mu: float, beta: float):
    """Damping coefficient V(r) = mu*(1+r)^-beta."""
    return mu * (1.0 + np.asarray(r, dtype=float)) ** (-beta)


def bump(r, k: int, amp: float):
    """Radial bump amp*(1-r^2)^k on r < 1, zero outside (C^(k-1) at r=1)."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = r < 1.0
    out[inside] = amp * (1.0 - r[inside] ** 2) ** k
    return out


def bump_integral(n: int, k: int, amp: float) -> float:
    """Integral of the bump over R^n: omega_{n-1} * int_0^1 amp*(1-r^2)^k r^(n-1) dr.

    Closed form via the Beta function (substitute s = r^2).
    """
    omega = sphere_area(n)
    return omega * amp * 0.5 * math.gamma(n / 2.0) * math.gamma(k + 1.0) \
        / math.gamma(n / 2.0 + k + 1.0)


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere S^(n-1) in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def build_grid(t_max: float, dr: float, cfl: float = 0.5) -> RadialGrid:
    """Grid sized so the Dirichlet boundary at r_max is never reached.

    dt = cfl*dr; cfl must lie in (0, 0.9] for the leapfrog update.
    """
    if t_max <= 0 or dr <= 0:
        raise ValueError("t_max and dr must be positive")
    if not 0.0 < cfl <= 0.9:
        raise ValueError(f"cfl must be in (0, 0.9], got {cfl}")
    need = t_max + 1.0 + 2.0 * dr
    nr = int(math.ceil(need / dr - 1e-12)) + 1
    r = np.arange(nr) * dr
    return RadialGrid(dr=dr, dt=cfl * dr, t_max=t_max, r=r)


def initial_data(params: ModelParams, r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(u(0), u_t(0)) = (eps*f, eps*g) sampled on the grid."""
    u0 = params.eps * bump(r, params.data_k, params.f_amp)
    v0 = params.eps * bump(r, params.data_k, params.g_amp)
    return u0, v0


# --- run configuration -------------------------------------------------------

class ConfigError(ValueError):
    """Invalid or unknown key in a run-configuration file."""


@dataclass(frozen=True)
class RunConfig:
    """Flat key=value run configuration; unknown keys fail closed."""

    n: int = 3
    mu: float = 1.0
    beta: float = 3.0
    p: float = 2.0
    nonlinearity: str = "power_u"
    eps: float = 0.5
    data_k: int = 4
    f_amp: float = 1.0
    g_amp: float = 1.0
    t_max: float = 10.0
    dr: float = 0.01
    cfl: float = 0.5
    u_threshold: float = 1e6
    refine_levels: int = 2

    def model_params(self) -> ModelParams:
        return ModelParams(n=self.n, mu=self.mu, beta=self.beta, p=self.p,
                           nonlinearity=self.nonlinearity, eps=self.eps,
                           data_k=self.data_k, f_amp=self.f_amp, g_amp=self.g_amp)

    def grid(self) -> RadialGrid:
        return build_grid(self.t_max, self.dr, self.cfl)


_CONFIG_TYPES = {f.name: f.type for f in fields(RunConfig)}
_INT_KEYS = {"n", "data_k", "refine_levels"}


def _convert(key: str, raw: str):
    if key == "nonlinearity":
        if raw not in NONLINEARITIES:
            raise ConfigError(f"nonlinearity must be one of {NONLINEARITIES}, got {raw!r}")
        return raw
    try:
        if key in _INT_KEYS:
            return int(raw)
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


def parse_config_text(text: str, base: RunConfig | None = None) -> RunConfig:
    """Parse `key = value` lines; '#' starts a comment; unknown keys raise."""
    cfg = base or RunConfig()
    updates = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _CONFIG_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        updates[key] = _convert(key, raw)
    try:
        return replace(cfg, **updates)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str, base: RunConfig | None = None) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read(), base=base)
