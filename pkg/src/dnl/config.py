"""Experiment configuration: INI-style files with one section per concern.

Example::

    [experiment]
    kind = simulate          # simulate | smoothing | contraction |
                             # omega_limit | ladder | stationary_scan
    seeds = 10

    [grid]
    n = 63
    domain = 0 1
    bc = dirichlet

    [potential]
    kind = double_well       # quadratic | double_well | logarithmic
    theta = 0.0              # logarithmic only

    [alpha]
    kind = linear            # linear | cubic | sinh
    sigma = 1.0
    a = 1.0                  # cubic only

    [source]
    value = 0.0              # constant source; or profile = sine, amp, k

    [time]
    dt = 1e-3
    t_end = 5.0
    record_every = 1

    [init]
    profile = sine           # zero | constant | sine | random
    amp = 0.9
    k = 1
    seed = 0
    c = 0.0                  # constant only

    [regularization]
    level =                  # optional integer

    [output]
    dir = runs/example
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grids import Field, Grid
from .laws import make_dissipation, make_potential
from .stepper import Model, StepperConfig

EXPERIMENT_KINDS = (
    "simulate",
    "smoothing",
    "contraction",
    "omega_limit",
    "ladder",
    "stationary_scan",
)

INIT_PROFILES = ("zero", "constant", "sine", "random")

#: states are rescaled to keep at least this distance from a finite barrier
INTERIOR_MARGIN = 0.01


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str = "simulate"
    seeds: int = 1
    grid_n: int = 63
    domain: tuple[float, float] = (0.0, 1.0)
    bc: str = "dirichlet"
    potential_kind: str = "double_well"
    theta: float = 0.0
    lam_override: float | None = None
    alpha_kind: str = "linear"
    sigma: float = 1.0
    cubic_a: float = 1.0
    source_value: float = 0.0
    source_profile: str | None = None
    source_amp: float = 0.0
    source_k: int = 1
    dt: float = 1e-3
    t_end: float = 1.0
    record_every: int = 1
    newton_tol: float = 1e-10
    newton_max_iters: int = 50
    init_profile: str = "zero"
    init_amp: float = 0.5
    init_k: int = 1
    init_c: float = 0.0
    init_seed: int = 0
    init_modes: int = 20
    regularization_level: int | None = None
    out_dir: str = "runs/out"
    settle_tol: float = 1e-6
    epsilon: float = 0.5
    j_max: int = 8
    ell: float = 0.5
    fit_lo: float = 0.01
    fit_hi: float = 0.1

    def validate(self) -> None:
        if self.experiment not in EXPERIMENT_KINDS:
            raise ConfigError(f"unknown experiment kind {self.experiment!r}")
        if self.init_profile not in INIT_PROFILES:
            raise ConfigError(f"unknown init profile {self.init_profile!r}")
        if self.seeds < 1:
            raise ConfigError("seeds must be >= 1")
        if self.dt <= 0 or self.t_end <= 0:
            raise ConfigError("dt and t_end must be positive")
        if self.record_every < 1:
            raise ConfigError("record_every must be >= 1")
        if not self.domain[0] < self.domain[1]:
            raise ConfigError("grid domain is empty")
        if self.ell <= 0:
            raise ConfigError("ell must be positive")
        if not 0 < self.epsilon < 1:
            raise ConfigError("epsilon must lie in (0, 1)")


def _get(
    parser: configparser.ConfigParser, section: str, key: str, fallback: str | None
) -> str | None:
    if parser.has_option(section, key):
        raw = parser.get(section, key).strip()
        return raw if raw else fallback
    return fallback


def load_config(path: str | Path) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    cfg = ExperimentConfig()
    try:
        cfg.experiment = _get(parser, "experiment", "kind", cfg.experiment)
        cfg.seeds = int(_get(parser, "experiment", "seeds", str(cfg.seeds)))
        cfg.settle_tol = float(
            _get(parser, "experiment", "settle_tol", str(cfg.settle_tol))
        )
        cfg.epsilon = float(_get(parser, "experiment", "epsilon", str(cfg.epsilon)))
        cfg.j_max = int(_get(parser, "experiment", "j_max", str(cfg.j_max)))
        cfg.ell = float(_get(parser, "experiment", "ell", str(cfg.ell)))
        cfg.fit_lo = float(_get(parser, "experiment", "fit_lo", str(cfg.fit_lo)))
        cfg.fit_hi = float(_get(parser, "experiment", "fit_hi", str(cfg.fit_hi)))

        cfg.grid_n = int(_get(parser, "grid", "n", str(cfg.grid_n)))
        dom = _get(parser, "grid", "domain", "0 1").replace(",", " ").split()
        if len(dom) != 2:
            raise ConfigError("grid domain must be two numbers")
        cfg.domain = (float(dom[0]), float(dom[1]))
        cfg.bc = _get(parser, "grid", "bc", cfg.bc).lower()

        cfg.potential_kind = _get(parser, "potential", "kind", cfg.potential_kind)
        cfg.theta = float(_get(parser, "potential", "theta", str(cfg.theta)))
        lam = _get(parser, "potential", "lambda", None)
        cfg.lam_override = float(lam) if lam is not None else None

        cfg.alpha_kind = _get(parser, "alpha", "kind", cfg.alpha_kind)
        cfg.sigma = float(_get(parser, "alpha", "sigma", str(cfg.sigma)))
        cfg.cubic_a = float(_get(parser, "alpha", "a", str(cfg.cubic_a)))

        cfg.source_value = float(_get(parser, "source", "value", "0.0"))
        cfg.source_profile = _get(parser, "source", "profile", None)
        cfg.source_amp = float(_get(parser, "source", "amp", "0.0"))
        cfg.source_k = int(_get(parser, "source", "k", "1"))

        cfg.dt = float(_get(parser, "time", "dt", str(cfg.dt)))
        cfg.t_end = float(_get(parser, "time", "t_end", str(cfg.t_end)))
        cfg.record_every = int(
            _get(parser, "time", "record_every", str(cfg.record_every))
        )
        cfg.newton_tol = float(_get(parser, "time", "newton_tol", str(cfg.newton_tol)))
        cfg.newton_max_iters = int(
            _get(parser, "time", "newton_max_iters", str(cfg.newton_max_iters))
        )

        cfg.init_profile = _get(parser, "init", "profile", cfg.init_profile)
        cfg.init_amp = float(_get(parser, "init", "amp", str(cfg.init_amp)))
        cfg.init_k = int(_get(parser, "init", "k", str(cfg.init_k)))
        cfg.init_c = float(_get(parser, "init", "c", str(cfg.init_c)))
        cfg.init_seed = int(_get(parser, "init", "seed", str(cfg.init_seed)))
        cfg.init_modes = int(_get(parser, "init", "modes", str(cfg.init_modes)))

        level = _get(parser, "regularization", "level", None)
        cfg.regularization_level = int(level) if level is not None else None

        cfg.out_dir = _get(parser, "output", "dir", cfg.out_dir)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"invalid config value: {exc}") from exc
    cfg.validate()
    return cfg


def build_model(cfg: ExperimentConfig) -> Model:
    try:
        grid = Grid(cfg.grid_n, cfg.domain[0], cfg.domain[1], cfg.bc)
        law = make_dissipation(cfg.alpha_kind, sigma=cfg.sigma, a=cfg.cubic_a)
        pot = make_potential(
            cfg.potential_kind, theta=cfg.theta, lam=cfg.lam_override
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.source_profile == "sine":
        xhat = (grid.x - grid.x_lo) / grid.length
        fv = cfg.source_amp * np.sin(cfg.source_k * math.pi * xhat)
        source = Field(grid, fv)
    elif cfg.source_profile is None:
        source = Field(grid, np.full(grid.n, cfg.source_value))
    else:
        raise ConfigError(f"unknown source profile {cfg.source_profile!r}")
    return Model(grid, law, pot, source)


def rescale_into_domain(values: np.ndarray, model: Model) -> np.ndarray:
    """Rescale a profile so it keeps the interior margin from any finite
    barrier of the potential's domain."""
    lo, hi = model.potential.domain
    s = 1.0
    vmax = float(np.max(values))
    vmin = float(np.min(values))
    if np.isfinite(hi) and vmax > hi - INTERIOR_MARGIN:
        s = min(s, (hi - INTERIOR_MARGIN) / vmax)
    if np.isfinite(lo) and vmin < lo + INTERIOR_MARGIN:
        s = min(s, (lo + INTERIOR_MARGIN) / vmin)
    return values * s


def random_profile(model: Model, seed: int, amp: float, modes: int = 20) -> Field:
    """Seeded random Fourier sum with 1/k-weighted coefficients, rescaled
    to sup norm ``amp`` and into the admissible interval."""
    grid = model.grid
    rng = np.random.default_rng(seed)
    coeffs = rng.uniform(-1.0, 1.0, modes)
    xhat = (grid.x - grid.x_lo) / grid.length
    vals = np.zeros(grid.n)
    for k in range(1, modes + 1):
        if grid.bc == "dirichlet":
            basis = np.sin(k * math.pi * xhat)
        else:
            basis = np.cos(k * math.pi * xhat)
        vals += coeffs[k - 1] / k * basis
    m = float(np.max(np.abs(vals)))
    if m > 0.0:
        vals = vals / m * amp
    return Field(grid, rescale_into_domain(vals, model))


def sign_family_profile(
    model: Model, seed: int, amp: float, modes: int = 20
) -> Field:
    """Rough profile with random signs on a fixed 1/k spectrum.

    All members of a seed family share the spectral envelope (hence, up to
    the nonlinearity, the phase radius); only the shapes differ.  Used for
    smoothing ensembles where uniformity in the datum is asserted.
    """
    grid = model.grid
    rng = np.random.default_rng(seed)
    signs = rng.choice([-1.0, 1.0], modes)
    xhat = (grid.x - grid.x_lo) / grid.length
    vals = np.zeros(grid.n)
    for k in range(1, modes + 1):
        if grid.bc == "dirichlet":
            basis = np.sin(k * math.pi * xhat)
        else:
            basis = np.cos(k * math.pi * xhat)
        vals += signs[k - 1] / k * basis
    m = float(np.max(np.abs(vals)))
    if m > 0.0:
        vals = vals / m * amp
    return Field(grid, rescale_into_domain(vals, model))


def build_initial(cfg: ExperimentConfig, model: Model, seed: int | None = None) -> Field:
    grid = model.grid
    if cfg.init_profile == "zero":
        return Field(grid, np.zeros(grid.n))
    if cfg.init_profile == "constant":
        vals = np.full(grid.n, cfg.init_c)
        if not model.potential.contains(vals):
            raise ConfigError(f"constant init {cfg.init_c} leaves the potential domain")
        return Field(grid, vals)
    if cfg.init_profile == "sine":
        xhat = (grid.x - grid.x_lo) / grid.length
        vals = cfg.init_amp * np.sin(cfg.init_k * math.pi * xhat)
        vals = rescale_into_domain(vals, model)
        return Field(grid, vals)
    if cfg.init_profile == "random":
        return random_profile(
            model, cfg.init_seed if seed is None else seed, cfg.init_amp, cfg.init_modes
        )
    raise ConfigError(f"unknown init profile {cfg.init_profile!r}")


def build_stepper_config(cfg: ExperimentConfig, **overrides) -> StepperConfig:
    kwargs = dict(
        dt=cfg.dt,
        t_end=cfg.t_end,
        newton_tol=cfg.newton_tol,
        newton_max_iters=cfg.newton_max_iters,
        regularization_level=cfg.regularization_level,
        record_every=cfg.record_every,
    )
    kwargs.update(overrides)
    return StepperConfig(**kwargs)
