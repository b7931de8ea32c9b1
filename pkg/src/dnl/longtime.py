"""Stationary states, omega-limit detection, and windowed-trajectory tools.

The windowed-trajectory machinery treats a solution restricted to a time
window of fixed length as a single point of the space L^2(window; H1);
the shift map advances the window along the (unique) continuation of its
parent run and the endpoint map returns the state at the window's end.
Contractivity of the shift in the window norm, boundedness of the
smoothing quotients, and Hoelder continuity of the endpoint map are the
finite, testable surface of exponential attraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .grids import (
    DIRICHLET,
    Field,
    Grid,
    elliptic_diagonals,
    elliptic_values,
    h1_sq_values,
    h2_sq_values,
    l2_values,
)
from .stepper import (
    Model,
    StepFailure,
    StepperConfig,
    TrajectorySegment,
    solve_trajectory,
)


# -- stationary problem ---------------------------------------------------------

@dataclass(frozen=True)
class StationaryState:
    u_inf: Field
    residual: float
    newton_iters: int
    converged: bool


def solve_stationary(
    f: Field,
    guess: Field,
    model: Model,
    tol: float = 1e-10,
    max_iters: int = 200,
) -> StationaryState:
    """Damped Newton for  A u + W'(u) = f  with the same interiority line
    search as the stepper.  The Jacobian A + W''(u) may be indefinite away
    from minima, so convergence from a poor guess is not guaranteed; the
    report carries the last residual either way."""
    grid = model.grid
    pot = model.potential
    lo, hi = pot.domain
    fv = f.values
    main_a, off_a = elliptic_diagonals(grid)
    ab = np.zeros((3, grid.n))
    ab[0, 1:] = off_a
    ab[2, :-1] = off_a

    u = guess.values.copy()
    if not (np.min(u) > lo and np.max(u) < hi):
        raise ValueError("guess is not admissible")
    res = elliptic_values(grid, u) + pot.dW(u) - fv
    rnorm = l2_values(grid, res)
    iters = 0
    for it in range(max_iters):
        if rnorm <= tol:
            return StationaryState(Field(grid, u), rnorm, it, True)
        iters = it
        ab[1] = main_a + pot.d2W(u)
        try:
            delta = solve_banded((1, 1), ab, -res, check_finite=False)
        except Exception:
            break
        if not np.all(np.isfinite(delta)):
            break
        s = 1.0
        accepted = False
        for _ in range(60):
            u_try = u + s * delta
            if np.min(u_try) > lo and np.max(u_try) < hi:
                r_try = elliptic_values(grid, u_try) + pot.dW(u_try) - fv
                rn_try = (
                    l2_values(grid, r_try) if np.all(np.isfinite(r_try)) else np.inf
                )
                if rn_try < rnorm:
                    u, res, rnorm = u_try, r_try, rn_try
                    accepted = True
                    break
            s *= 0.5
        if not accepted:
            break
    return StationaryState(Field(grid, u), rnorm, iters, rnorm <= tol)


def stationary_states(
    model: Model,
    n_random: int = 50,
    seed: int = 0,
    tol: float = 1e-10,
    dedup_tol: float = 1e-4,
) -> list[StationaryState]:
    """Multi-start enumeration: seeded random profiles plus a 9-point grid
    of constants, deduplicated by H1 distance."""
    grid = model.grid
    lo, hi = model.potential.domain
    c_lo = lo if np.isfinite(lo) else -2.0
    c_hi = hi if np.isfinite(hi) else 2.0
    pad = 0.1 * (c_hi - c_lo)
    guesses = [
        Field(grid, np.full(grid.n, c))
        for c in np.linspace(c_lo + pad, c_hi - pad, 9)
    ]
    rng = np.random.default_rng(seed)
    xhat = (grid.x - grid.x_lo) / grid.length
    amp_cap = 0.9 * min(abs(c_lo), abs(c_hi))
    for _ in range(n_random):
        coeffs = rng.uniform(-1.0, 1.0, 8)
        prof = sum(
            c / (k + 1) * np.sin((k + 1) * math.pi * xhat)
            for k, c in enumerate(coeffs)
        )
        m = np.max(np.abs(prof))
        if m > 0:
            prof = prof / m * rng.uniform(0.1, amp_cap)
        guesses.append(Field(grid, prof))

    found: list[StationaryState] = []
    for g in guesses:
        st = solve_stationary(model.source, g, model, tol=tol)
        if not st.converged:
            continue
        is_new = True
        for other in found:
            d = math.sqrt(
                h1_sq_values(grid, st.u_inf.values - other.u_inf.values)
            )
            if d <= dedup_tol:
                is_new = False
                break
        if is_new:
            found.append(st)
    found.sort(key=lambda s: (l2_values(grid, s.u_inf.values), float(np.sum(s.u_inf.values))))
    return found


# -- omega limits -----------------------------------------------------------------

class InsufficientHorizonError(RuntimeError):
    pass


@dataclass(frozen=True)
class OmegaLimitReport:
    stationary: StationaryState
    times: np.ndarray
    dist_h1: np.ndarray
    dist_inf: np.ndarray
    settled: bool
    tail_monotone: bool


def omega_limit(
    traj: TrajectorySegment, model: Model, tol: float = 1e-6
) -> OmegaLimitReport:
    """Polish the final state to a stationary one and report convergence.

    Requires an analytic potential (single-point omega limits rely on it)
    and a trajectory that has settled: sup-norm of the final velocity at
    most ``tol``.  Tail monotonicity is checked on the final decade of
    time.
    """
    if not traj.model.potential.analytic:
        raise ValueError("omega-limit analysis needs an analytic potential")
    ut_end = float(np.max(np.abs(traj.velocities[-1])))
    if ut_end > tol:
        raise InsufficientHorizonError(
            f"trajectory not settled: final |u_t|_inf = {ut_end:.3e} > {tol}"
        )
    st = solve_stationary(model.source, traj.final_state(), model, tol=1e-11)
    grid = traj.model.grid
    uinf = st.u_inf.values
    dist_h1 = np.array(
        [math.sqrt(h1_sq_values(grid, traj.states[i] - uinf)) for i in range(traj.m)]
    )
    dist_inf = np.array(
        [float(np.max(np.abs(traj.states[i] - uinf))) for i in range(traj.m)]
    )
    t_dec = traj.t_end / 10.0
    mask = traj.times >= t_dec - 1e-12
    tail = dist_h1[mask]
    slack = 1e-9 * max(1.0, float(tail[0])) if len(tail) else 0.0
    tail_monotone = bool(np.all(np.diff(tail) <= slack))
    settled = dist_h1[-1] <= 10.0 * tol and dist_inf[-1] <= 10.0 * tol
    return OmegaLimitReport(st, traj.times, dist_h1, dist_inf, settled, tail_monotone)


# -- windowed trajectories ---------------------------------------------------------

@dataclass(frozen=True)
class TrajectoryWindow:
    """A solution restricted to [start, start + length], re-based to time 0.

    Keeps a reference to the full parent run so the window can be shifted
    along the parent's unique continuation.
    """

    parent: TrajectorySegment
    start: float
    length: float

    def __post_init__(self) -> None:
        if self.length <= 0.0:
            raise ValueError("window length must be positive")
        self.parent.index_at(self.start)
        self.parent.index_at(self.start + self.length)

    @property
    def i0(self) -> int:
        return self.parent.index_at(self.start)

    @property
    def i1(self) -> int:
        return self.parent.index_at(self.start + self.length)

    @property
    def times(self) -> np.ndarray:
        return self.parent.times[self.i0 : self.i1 + 1] - self.start

    @property
    def states(self) -> np.ndarray:
        return self.parent.states[self.i0 : self.i1 + 1]

    @property
    def velocities(self) -> np.ndarray:
        return self.parent.velocities[self.i0 : self.i1 + 1]


def make_window(traj: TrajectorySegment, start: float, length: float) -> TrajectoryWindow:
    return TrajectoryWindow(traj, start, length)


def extend_trajectory(
    traj: TrajectorySegment, t_target: float, cfg: StepperConfig
) -> TrajectorySegment:
    """Continue a run past its end, reusing its recorded history."""
    if traj.failure is not None:
        raise StepFailure(
            traj.failure.kind, "cannot extend a failed trajectory",
            traj.failure.residual, traj.failure.iters,
        )
    if t_target <= traj.t_end + 1e-12:
        return traj
    extra = t_target - traj.t_end
    cont_cfg = StepperConfig(
        dt=cfg.dt,
        t_end=extra,
        newton_tol=cfg.newton_tol,
        newton_max_iters=cfg.newton_max_iters,
        line_search_shrink=cfg.line_search_shrink,
        regularization_level=None,
        record_every=cfg.record_every,
    )
    tail = solve_trajectory(traj.final_state(), cont_cfg, traj.model)
    times = np.concatenate([traj.times, tail.times[1:] + traj.t_end])
    states = np.concatenate([traj.states, tail.states[1:]])
    velocities = np.concatenate([traj.velocities, tail.velocities[1:]])
    iters = np.concatenate([traj.newton_iters, tail.newton_iters[1:]])
    return TrajectorySegment(
        traj.model, traj.dt, times, states, velocities, iters,
        traj.requested_regularization, tail.failure,
    )


def shift_window(
    window: TrajectoryWindow, t: float, cfg: StepperConfig
) -> TrajectoryWindow:
    """Advance the window by t >= 0 along its parent's continuation."""
    if t < 0.0:
        raise ValueError("shift must be nonnegative")
    parent = extend_trajectory(window.parent, window.start + t + window.length, cfg)
    return TrajectoryWindow(parent, window.start + t, window.length)


def window_endpoint(window: TrajectoryWindow) -> Field:
    """State at the window's end."""
    return window.parent.state(window.i1)


def _check_compatible(a: TrajectoryWindow, b: TrajectoryWindow) -> None:
    if a.parent.model.grid != b.parent.model.grid:
        raise ValueError("windows live on different grids")
    if abs(a.length - b.length) > 1e-12:
        raise ValueError("windows have different lengths")
    ta, tb = a.times, b.times
    if len(ta) != len(tb) or np.max(np.abs(ta - tb)) > 1e-9:
        raise ValueError("windows are sampled on different time grids")


def window_distance(a: TrajectoryWindow, b: TrajectoryWindow) -> float:
    """L^2-in-time H1 distance between two windows (trapezoid in time)."""
    _check_compatible(a, b)
    grid = a.parent.model.grid
    diff = a.states - b.states
    vals = np.array([h1_sq_values(grid, row) for row in diff])
    return math.sqrt(float(np.trapezoid(vals, a.times)))


def window_norm(a: TrajectoryWindow) -> float:
    """L^2-in-time H1 norm of a single window."""
    grid = a.parent.model.grid
    vals = np.array([h1_sq_values(grid, row) for row in a.states])
    return math.sqrt(float(np.trapezoid(vals, a.times)))


def window_strong_distance(a: TrajectoryWindow, b: TrajectoryWindow) -> float:
    """Strong window norm of the difference: time integrals of the squared
    H2 norm of the states and the squared L2 norm of the velocities."""
    _check_compatible(a, b)
    grid = a.parent.model.grid
    ds = a.states - b.states
    dv = a.velocities - b.velocities
    h2 = np.array([h2_sq_values(grid, row) for row in ds])
    vt = np.array([grid.h * float(np.dot(row, row)) for row in dv])
    return math.sqrt(float(np.trapezoid(h2 + vt, a.times)))


# -- contraction experiments ---------------------------------------------------------

def elliptic_min_eigenvalue(grid: Grid) -> float:
    """Smallest eigenvalue of the discrete elliptic operator."""
    if grid.bc == DIRICHLET:
        h = grid.h
        return 2.0 / (h * h) * (1.0 - math.cos(math.pi * h / grid.length))
    return 1.0


def linear_decay_rate(model: Model) -> float:
    """Slowest modal decay rate of the linearized flow, valid for a linear
    law with a quadratic potential: (mu_min + W'') / sigma."""
    return (elliptic_min_eigenvalue(model.grid) + 1.0) / model.dissipation.sigma


@dataclass(frozen=True)
class ContractionReport:
    times: np.ndarray
    diff_h1: np.ndarray
    degenerate: bool
    envelope_constant: float
    envelope_pairs: int
    envelope_violations: int
    q_velocity: float
    q_strong: float
    fitted_rate: float
    fit_window: tuple[float, float]


def contraction_experiment(
    u0_a: Field,
    u0_b: Field,
    ell: float,
    model: Model,
    cfg: StepperConfig,
    envelope_slack: float = 0.1,
    n_envelope_pairs: int = 1000,
    rate_window: tuple[float, float] | None = None,
    seed: int = 0,
) -> ContractionReport:
    """Evolve two initial states over [0, 2 ell] and measure the estimates
    behind exponential attraction on their difference u:

    * a Gronwall envelope ||u(y)||_H1^2 <= e^{c (y-s)} ||u(s)||_H1^2
      (1 + slack) on sampled pairs s <= y, with c computed from sampled
      magnitudes of W'' along both runs;
    * the smoothing quotients
      q_velocity = sigma ell |u_t|^2_{L2(ell,2ell;L2)} / |u|^2_{L2(0,ell;H1)}
      q_strong   = |u|^2_{L2(ell,2ell;H2)} / |u|^2_{L2(0,ell;H1)};
    * a late-window exponential fit of log ||u(t)||_H1.
    """
    run_cfg = StepperConfig(
        dt=cfg.dt,
        t_end=2.0 * ell,
        newton_tol=cfg.newton_tol,
        newton_max_iters=cfg.newton_max_iters,
        line_search_shrink=cfg.line_search_shrink,
        regularization_level=cfg.regularization_level,
        record_every=1,
    )
    ta = solve_trajectory(u0_a, run_cfg, model)
    tb = solve_trajectory(u0_b, run_cfg, model)
    for tr in (ta, tb):
        if tr.failure is not None:
            raise tr.failure
    grid = model.grid
    pot = model.potential
    times = ta.times
    m = len(times)
    diff = ta.states - tb.states
    dvel = ta.velocities - tb.velocities
    h1sq = np.array([h1_sq_values(grid, row) for row in diff])
    diff_h1 = np.sqrt(h1sq)

    scale = math.sqrt(h1_sq_values(grid, u0_a.values - u0_b.values))
    degenerate = scale <= 1e-14

    # envelope constant from sampled nonlinearity magnitudes along both runs
    w2_max = max(
        float(np.max(np.abs(pot.d2W(ta.states)))),
        float(np.max(np.abs(pot.d2W(tb.states)))),
    )
    sigma = model.dissipation.sigma
    c_env = 1.0 + (2.0 * w2_max) ** 2 / (2.0 * sigma)

    rng = np.random.default_rng(seed)
    violations = 0
    pairs = 0
    if not degenerate:
        for _ in range(n_envelope_pairs):
            i = int(rng.integers(0, m - 1))
            j = int(rng.integers(i + 1, m))
            pairs += 1
            bound = math.exp(c_env * (times[j] - times[i])) * h1sq[i]
            if h1sq[j] > bound * (1.0 + envelope_slack) + 1e-300:
                violations += 1

    # smoothing quotients over the two half-windows
    early = times <= ell + 1e-12
    late = times >= ell - 1e-12
    denom = float(np.trapezoid(h1sq[early], times[early]))
    vt = np.array([grid.h * float(np.dot(row, row)) for row in dvel])
    h2sq = np.array([h2_sq_values(grid, row) for row in diff])
    if degenerate or denom == 0.0:
        q_vel = math.nan
        q_strong = math.nan
    else:
        q_vel = sigma * ell * float(np.trapezoid(vt[late], times[late])) / denom
        q_strong = float(np.trapezoid(h2sq[late], times[late])) / denom

    if rate_window is None:
        rate_window = (ell, 2.0 * ell)
    xs: list[float] = []
    ys: list[float] = []
    for i in range(m):
        t = float(times[i])
        if rate_window[0] <= t <= rate_window[1] and diff_h1[i] > 1e-300:
            xs.append(t)
            ys.append(math.log(diff_h1[i]))
    if degenerate or len(xs) < 5:
        fitted_rate = math.nan
    else:
        sx = sum(xs)
        sy = sum(ys)
        sxx = sum(x * x for x in xs)
        sxy = sum(x * y for x, y in zip(xs, ys))
        n = float(len(xs))
        slope = (n * sxy - sx * sy) / (n * sxx - sx * sx)
        fitted_rate = -slope

    return ContractionReport(
        times,
        diff_h1,
        degenerate,
        c_env,
        pairs,
        violations,
        q_vel,
        q_strong,
        fitted_rate,
        rate_window,
    )
