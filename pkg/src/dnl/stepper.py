"""Implicit time integration of  law(u_t) + A u + W'(u) = f.

Each backward-Euler step solves the strongly monotone system

    law((w - u_prev)/dt) + A w + W'(w) = f

by damped Newton iteration with a tridiagonal Jacobian
(1/dt) diag(law'(v)) + A + diag(W''(w)).  The backtracking line search
halves the update until the iterate is strictly inside the potential's
domain and the residual norm decreases, so states never touch a singular
barrier.  For dt below the monotonicity safeguard sigma/(2 lam) the
Jacobian is symmetric positive definite and the step is uniquely solvable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import solve_banded

from .grids import (
    Field,
    Grid,
    elliptic_diagonals,
    elliptic_values,
    l2_values,
)
from .laws import DissipationLaw, Potential, regularize


class StepFailure(RuntimeError):
    """A time step could not be completed.

    ``kind`` is "newton" (no convergence / no residual decrease) or
    "admissibility" (line search could not keep the iterate inside the
    potential's domain).
    """

    def __init__(self, kind: str, message: str, residual: float, iters: int):
        super().__init__(message)
        self.kind = kind
        self.residual = residual
        self.iters = iters


@dataclass(frozen=True)
class Model:
    """Problem data bundle: grid, dissipation law, potential, source."""

    grid: Grid
    dissipation: DissipationLaw
    potential: Potential
    source: Field

    def __post_init__(self) -> None:
        if self.source.grid != self.grid:
            raise ValueError("source field lives on a different grid")

    def with_regularization(self, level: int | None) -> "Model":
        if level is None:
            return self
        pair = regularize(self.dissipation, self.potential, level)
        return Model(self.grid, pair.dissipation, pair.potential, self.source)


@dataclass(frozen=True)
class StepperConfig:
    dt: float
    t_end: float
    newton_tol: float = 1e-10
    newton_max_iters: int = 50
    line_search_shrink: float = 0.5
    regularization_level: int | None = None
    record_every: int = 1

    def __post_init__(self) -> None:
        if self.dt <= 0.0 or self.t_end <= 0.0:
            raise ValueError("dt and t_end must be positive")
        if self.newton_tol <= 0.0:
            raise ValueError("newton_tol must be positive")
        if self.newton_max_iters < 1:
            raise ValueError("newton_max_iters must be >= 1")
        if not 0.0 < self.line_search_shrink < 1.0:
            raise ValueError("line_search_shrink must lie in (0, 1)")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if self.regularization_level is not None and self.regularization_level < 1:
            raise ValueError("regularization_level must be >= 1")


@dataclass(frozen=True)
class StepReport:
    converged: bool
    iters: int
    residual: float
    substepped: bool = False


def check_dt_safeguard(dt: float, model: Model) -> None:
    """Monotonicity safeguard dt < sigma / (2 lam) for lam > 0."""
    lam = model.potential.lam
    if lam > 0.0 and dt >= model.dissipation.sigma / (2.0 * lam):
        raise ValueError(
            f"dt={dt} violates the safeguard dt < sigma/(2 lam) = "
            f"{model.dissipation.sigma / (2.0 * lam)}"
        )


def _residual(
    w: np.ndarray, v: np.ndarray, model: Model, f: np.ndarray
) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore"):
        r = model.dissipation.value(v)
        r = r + elliptic_values(model.grid, w)
        r += model.potential.dW(w)
        r -= f
    return r


def _solve_step(
    u_prev: np.ndarray, tau: float, model: Model, cfg: StepperConfig
) -> tuple[np.ndarray, int, float]:
    """One backward-Euler solve of length tau from raw values."""
    grid = model.grid
    lo, hi = model.potential.domain
    f = model.source.values
    main_a, off_a = elliptic_diagonals(grid)
    ab = np.zeros((3, grid.n))
    ab[0, 1:] = off_a
    ab[2, :-1] = off_a

    w = u_prev.copy()
    v = np.zeros_like(w)
    res = _residual(w, v, model, f)
    rnorm = l2_values(grid, res) if np.all(np.isfinite(res)) else np.inf

    for it in range(cfg.newton_max_iters):
        if rnorm <= cfg.newton_tol:
            return w, it, rnorm
        ab[1] = main_a + model.dissipation.deriv(v) / tau + model.potential.d2W(w)
        delta = solve_banded((1, 1), ab, -res, check_finite=False)

        s = 1.0
        accepted = False
        was_admissible = False
        for _ in range(60):
            w_try = w + s * delta
            if np.min(w_try) > lo and np.max(w_try) < hi:
                was_admissible = True
                v_try = (w_try - u_prev) / tau
                r_try = _residual(w_try, v_try, model, f)
                rn_try = (
                    l2_values(grid, r_try)
                    if np.all(np.isfinite(r_try))
                    else np.inf
                )
                if rn_try < rnorm:
                    w, v, res, rnorm = w_try, v_try, r_try, rn_try
                    accepted = True
                    break
            s *= cfg.line_search_shrink
        if not accepted:
            if not was_admissible:
                raise StepFailure(
                    "admissibility",
                    "line search could not keep the iterate inside the domain",
                    rnorm,
                    it,
                )
            raise StepFailure(
                "newton",
                f"line search stalled with residual {rnorm:.3e}",
                rnorm,
                it,
            )
    if rnorm <= cfg.newton_tol:
        return w, cfg.newton_max_iters, rnorm
    raise StepFailure(
        "newton",
        f"no convergence after {cfg.newton_max_iters} iterations "
        f"(residual {rnorm:.3e})",
        rnorm,
        cfg.newton_max_iters,
    )


def _step_with_retry(
    u_prev: np.ndarray, model: Model, cfg: StepperConfig
) -> tuple[np.ndarray, StepReport]:
    try:
        w, iters, rnorm = _solve_step(u_prev, cfg.dt, model, cfg)
        return w, StepReport(True, iters, rnorm)
    except StepFailure:
        # single continuation fallback: advance the same dt by two half steps
        half = cfg.dt / 2.0
        w1, it1, _ = _solve_step(u_prev, half, model, cfg)
        w2, it2, rn = _solve_step(w1, half, model, cfg)
        return w2, StepReport(True, it1 + it2, rn, substepped=True)


def step(u_prev: Field, cfg: StepperConfig, model: Model) -> tuple[Field, StepReport]:
    """Advance one backward-Euler step of length ``cfg.dt``.

    Raises :class:`StepFailure` when neither the full step nor the
    half-step fallback converges.
    """
    if u_prev.grid != model.grid:
        raise ValueError("state lives on a different grid than the model")
    check_dt_safeguard(cfg.dt, model)
    if not model.potential.contains(u_prev.values):
        raise StepFailure("admissibility", "previous state is not admissible", np.inf, 0)
    w, report = _step_with_retry(u_prev.values, model, cfg)
    return Field(model.grid, w), report


@dataclass
class TrajectorySegment:
    """Discrete trajectory: recorded states, per-step velocities, metadata.

    ``velocities[k]`` is the backward difference of the step that produced
    ``states[k]`` (row 0 is zero by convention).  ``record_stride[k]`` is
    the number of dt-steps between records k-1 and k; diagnostics scale
    per-step tolerances by it.
    """

    model: Model
    dt: float
    times: np.ndarray
    states: np.ndarray
    velocities: np.ndarray
    newton_iters: np.ndarray
    requested_regularization: int | None = None
    failure: StepFailure | None = None

    def __post_init__(self) -> None:
        if not np.all(np.diff(self.times) > 0.0):
            raise ValueError("record times must be strictly increasing")
        if not (len(self.times) == len(self.states) == len(self.velocities)):
            raise ValueError("record arrays are misaligned")
        lo, hi = self.model.potential.domain
        if np.isfinite(lo) or np.isfinite(hi):
            if not (np.min(self.states) > lo and np.max(self.states) < hi):
                raise ValueError("recorded state escapes the potential domain")

    @property
    def m(self) -> int:
        return len(self.times)

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def record_stride(self) -> np.ndarray:
        out = np.zeros(self.m, dtype=int)
        out[1:] = np.rint(np.diff(self.times) / self.dt).astype(int)
        return out

    def state(self, i: int) -> Field:
        return Field(self.model.grid, self.states[i])

    def velocity(self, i: int) -> Field:
        return Field(self.model.grid, self.velocities[i])

    def final_state(self) -> Field:
        return self.state(self.m - 1)

    def index_at(self, t: float, tol: float = 1e-9) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > tol * max(1.0, abs(t)):
            raise ValueError(f"time {t} is not on the recorded grid")
        return i


def solve_trajectory(
    u0: Field, cfg: StepperConfig, model: Model
) -> TrajectorySegment:
    """Integrate from ``u0`` to ``t_end``, recording every
    ``record_every``-th state (plus the initial and final ones).

    With ``cfg.regularization_level`` set, the model's nonlinearities are
    replaced by their level-n surrogates; the initial datum is used as is.
    On a step failure the partial trajectory is returned with the failure
    attached.
    """
    eff = model.with_regularization(cfg.regularization_level)
    if u0.grid != eff.grid:
        raise ValueError("initial state lives on a different grid")
    if not eff.potential.contains(u0.values):
        raise ValueError("initial state is not admissible")
    check_dt_safeguard(cfg.dt, eff)

    n_steps = int(round(cfg.t_end / cfg.dt))
    if n_steps < 1:
        raise ValueError("t_end shorter than one step")

    times = [0.0]
    states = [u0.values.copy()]
    velocities = [np.zeros(eff.grid.n)]
    iters = [0]
    failure: StepFailure | None = None

    u = u0.values.copy()
    for k in range(1, n_steps + 1):
        try:
            w, rep = _step_with_retry(u, eff, cfg)
        except StepFailure as exc:
            failure = exc
            break
        if k % cfg.record_every == 0 or k == n_steps:
            times.append(k * cfg.dt)
            states.append(w.copy())
            velocities.append((w - u) / cfg.dt)
            iters.append(rep.iters)
        u = w

    return TrajectorySegment(
        eff,
        cfg.dt,
        np.asarray(times),
        np.asarray(states),
        np.asarray(velocities),
        np.asarray(iters, dtype=int),
        cfg.regularization_level,
        failure,
    )


# -- independent scalar oracle -------------------------------------------------

def invert_law(law: DissipationLaw, y: float, tol: float = 1e-14) -> float:
    """Solve law(r) = y by bisection to absolute tolerance ``tol``.

    The coercivity floor gives the exact bracket [0, y/sigma] (sign-aware).
    """
    if y == 0.0:
        return 0.0
    value = law.value
    lo, hi = sorted((0.0, y / law.sigma))
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if value(mid) < y:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def ode_oracle(
    u0: float,
    times: Sequence[float],
    law: DissipationLaw,
    potential: Potential,
    f: float = 0.0,
    substeps: int = 64,
) -> np.ndarray:
    """High-accuracy solution of the spatially constant Neumann problem.

    Constants are fixed points of the Neumann elliptic operator, so the
    evolution reduces to the scalar ODE  law(u') + u + W'(u) = f,  solved
    here as  u' = law^{-1}(f - u - W'(u))  with classic fourth-order
    Runge-Kutta substeps and bisection for the inverse law.  Entirely
    independent of the implicit stepper.
    """

    d_w = potential.dW

    def rhs(u: float) -> float:
        return invert_law(law, f - u - float(d_w(u)))

    times = np.asarray(times, dtype=float)
    out = np.empty(len(times))
    out[0] = u0
    u = float(u0)
    for i in range(1, len(times)):
        dt = (times[i] - times[i - 1]) / substeps
        for _ in range(substeps):
            k1 = rhs(u)
            k2 = rhs(u + 0.5 * dt * k1)
            k3 = rhs(u + 0.5 * dt * k2)
            k4 = rhs(u + dt * k3)
            u += dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        out[i] = u
    return out
