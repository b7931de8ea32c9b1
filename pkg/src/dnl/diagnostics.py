"""Energy functionals, phase-space metrics, and decay diagnostics.

The two functionals are

    free_energy(u)     = integral of |grad u|^2 / 2 + W(u) - f u
    residual_energy(u) = ||A u + W'(u)||^2 / 2 - (f, A u + W'(u))

and their combination lyapunov_energy = lam * free_energy + residual_energy
is nonincreasing along trajectories (up to O(dt^2) per step for the
implicit scheme).  For Neumann meshes the elliptic operator carries an
identity part; the free energy here uses the quadratic form of the full
operator, which folds that part into the potential term so that the
discrete chain rule d/dt E = (A u + W'(u) - f, u_t) holds verbatim for
both boundary conditions.

The remaining entries are executable versions of a-priori estimates:
the uniform Gronwall lemma, the Lp exponent ladder with its integral
sandwich, power-law smoothing fits for t -> 0+, separation margins from
singular barriers, and an exponentially weighted identity for the
residual energy on source-free runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .grids import (
    Field,
    elliptic_values,
    h2_sq_values,
    inner_values,
    l2_values,
)
from .laws import DissipationLaw, Potential
from .stepper import TrajectorySegment

#: ratio of geometric decades used by default when fitting smoothing rates
DEFAULT_FIT_WINDOW = (0.01, 0.1)


# -- energies -----------------------------------------------------------------

def _defect_values(
    grid, u: np.ndarray, f: np.ndarray, potential: Potential
) -> np.ndarray:
    """A u + W'(u) - f, the stationary defect."""
    return elliptic_values(grid, u) + potential.dW(u) - f


def _potential_quadrature(grid, u: np.ndarray, potential: Potential) -> float:
    """h-weighted quadrature of W(u).  Dirichlet meshes add the two
    boundary half-cells (where u vanishes, so the term is a constant):
    this completes the interior sum to the trapezoid rule and keeps the
    discrete energy second-order accurate without touching its gradient."""
    total = grid.h * float(np.sum(potential.value(u)))
    if grid.bc == "dirichlet":
        total += grid.h * float(potential.value(np.zeros(1))[0])
    return total


def free_energy(u: Field, f: Field, potential: Potential) -> float:
    grid = u.grid
    a = elliptic_values(grid, u.values)
    quad_part = 0.5 * inner_values(grid, a, u.values)
    return (
        quad_part
        + _potential_quadrature(grid, u.values, potential)
        - inner_values(grid, f.values, u.values)
    )


def residual_energy(u: Field, f: Field, potential: Potential) -> float:
    grid = u.grid
    g = elliptic_values(grid, u.values) + potential.dW(u.values)
    return 0.5 * grid.h * float(np.dot(g, g)) - inner_values(grid, f.values, g)


def lyapunov_energy(u: Field, f: Field, potential: Potential) -> float:
    return potential.lam * free_energy(u, f, potential) + residual_energy(
        u, f, potential
    )


def phase_dist(u: Field, v: Field, potential: Potential) -> float:
    """Phase-space metric: L2 distances of the states, their elliptic
    images, and their monotone nonlinearity images (W' + lam id)."""
    grid = u.grid
    du = u.values - v.values
    da = elliptic_values(grid, u.values) - elliptic_values(grid, v.values)
    dw = (
        potential.dW(u.values)
        + potential.lam * u.values
        - potential.dW(v.values)
        - potential.lam * v.values
    )
    h = grid.h
    return math.sqrt(
        h * float(np.dot(du, du)) + h * float(np.dot(da, da)) + h * float(np.dot(dw, dw))
    )


def phase_dist_inf(u: Field, v: Field, potential: Potential) -> float:
    """Sup-norm variant of the phase-space metric."""
    grid = u.grid
    du = np.max(np.abs(u.values - v.values))
    da = np.max(
        np.abs(elliptic_values(grid, u.values) - elliptic_values(grid, v.values))
    )
    dw = np.max(
        np.abs(
            potential.dW(u.values)
            + potential.lam * u.values
            - potential.dW(v.values)
            - potential.lam * v.values
        )
    )
    return math.sqrt(du * du + da * da + dw * dw)


@dataclass(frozen=True)
class EnergyReport:
    t: float
    E: float
    F: float
    G: float
    d2_to_zero: float
    dinf_to_zero: float
    ut_Linf: float
    u_min: float
    u_max: float
    dissipation: float


def energy_report(traj: TrajectorySegment, i: int) -> EnergyReport:
    model = traj.model
    u = traj.state(i)
    f = model.source
    pot = model.potential
    zero = Field(model.grid, np.zeros(model.grid.n))
    e = free_energy(u, f, pot)
    fe = residual_energy(u, f, pot)
    v = traj.velocities[i]
    return EnergyReport(
        t=float(traj.times[i]),
        E=e,
        F=fe,
        G=pot.lam * e + fe,
        d2_to_zero=phase_dist(u, zero, pot),
        dinf_to_zero=phase_dist_inf(u, zero, pot),
        ut_Linf=float(np.max(np.abs(v))),
        u_min=float(np.min(u.values)),
        u_max=float(np.max(u.values)),
        dissipation=inner_values(model.grid, model.dissipation.value(v), v),
    )


def trajectory_metrics(traj: TrajectorySegment) -> dict[str, np.ndarray]:
    """All per-record scalar diagnostics, keyed by CSV column name."""
    model = traj.model
    grid = model.grid
    pot = model.potential
    law = model.dissipation
    f = model.source.values
    h = grid.h
    m = traj.m
    cols = {
        k: np.empty(m)
        for k in (
            "t", "E", "F", "G", "ut_Linf", "u_min", "u_max", "d2", "dinf",
            "dissipation",
        )
    }
    cols["newton_iters"] = traj.newton_iters.astype(float)
    # both reference images vanish: the operator is linear and W'(0) = 0
    for i in range(m):
        u = traj.states[i]
        v = traj.velocities[i]
        a = elliptic_values(grid, u)
        e = (
            0.5 * h * float(np.dot(a, u))
            + _potential_quadrature(grid, u, pot)
            - h * float(np.dot(f, u))
        )
        gg = a + pot.dW(u)
        fe = 0.5 * h * float(np.dot(gg, gg)) - h * float(np.dot(f, gg))
        wl = pot.dW(u) + pot.lam * u
        cols["t"][i] = traj.times[i]
        cols["E"][i] = e
        cols["F"][i] = fe
        cols["G"][i] = pot.lam * e + fe
        cols["ut_Linf"][i] = np.max(np.abs(v))
        cols["u_min"][i] = np.min(u)
        cols["u_max"][i] = np.max(u)
        cols["d2"][i] = math.sqrt(
            h * float(np.dot(u, u))
            + h * float(np.dot(a, a))
            + h * float(np.dot(wl, wl))
        )
        cols["dinf"][i] = math.sqrt(
            float(np.max(np.abs(u))) ** 2
            + float(np.max(np.abs(a))) ** 2
            + float(np.max(np.abs(wl))) ** 2
        )
        cols["dissipation"][i] = h * float(np.dot(law.value(v), v))
    return cols


# -- Liapounov decay -----------------------------------------------------------

@dataclass(frozen=True)
class LiapunovReport:
    values: np.ndarray
    increments: np.ndarray
    envelope: np.ndarray
    violations: int
    worst_excess: float
    max_raw_increase: float
    c_used: float


def lyapunov_series(traj: TrajectorySegment) -> np.ndarray:
    return trajectory_metrics(traj)["G"]


def liapunov_check(traj: TrajectorySegment, c: float = 0.0) -> LiapunovReport:
    """Check G(t_{k+1}) <= G(t_k) + c * dt^2 per elementary step.

    Records separated by several steps get the summed envelope
    c * dt^2 * stride.  ``c`` is a calibrated constant (see
    :func:`fit_liapunov_constant`); c = 0 checks raw monotonicity.
    """
    g = lyapunov_series(traj)
    inc = np.diff(g)
    stride = traj.record_stride[1:]
    env = c * traj.dt * traj.dt * stride
    excess = inc - env
    violations = int(np.sum(excess > 0.0))
    worst = float(np.max(excess)) if len(excess) else 0.0
    max_raw = float(np.max(inc)) if len(inc) else 0.0
    return LiapunovReport(g, inc, env, violations, worst, max_raw, c)


def fit_liapunov_constant(trajs: list[TrajectorySegment]) -> float:
    """Largest observed per-step increase of G divided by dt^2.

    Callers multiply by a safety factor / apply a floor before using the
    result as an envelope constant.
    """
    worst = 0.0
    for traj in trajs:
        g = lyapunov_series(traj)
        inc = np.diff(g)
        stride = traj.record_stride[1:]
        ratios = inc / (traj.dt * traj.dt * stride)
        if len(ratios):
            worst = max(worst, float(np.max(ratios)))
    return max(worst, 0.0)


@dataclass(frozen=True)
class SandwichConstants:
    """Calibrated constants of the two-sided bound
    eta1 * d2(u,0)^2 - eta2 <= G(u) <= eta3 (d2(u,0)^2 + 1).

    Fitted per potential from a sample family, never derived; every
    report carries the fitted flag.
    """

    eta1: float
    eta2: float
    eta3: float
    fitted: bool = True


def fit_sandwich_constants(
    samples: list[Field], f: Field, potential: Potential
) -> SandwichConstants:
    zero = Field(samples[0].grid, np.zeros(samples[0].grid.n))
    gs = np.array([lyapunov_energy(u, f, potential) for u in samples])
    ds = np.array([phase_dist(u, zero, potential) ** 2 for u in samples])
    eta2 = max(0.0, -float(np.min(gs))) + 1.0
    eta1 = 0.5 * float(np.min((gs + eta2) / np.maximum(ds, 1e-30)))
    eta3 = 2.0 * max(float(np.max(gs / (ds + 1.0))), 1e-12)
    return SandwichConstants(eta1, eta2, eta3)


def liapunov_sandwich(
    u: Field, f: Field, potential: Potential, consts: SandwichConstants
) -> tuple[float, float, float, bool]:
    """Return (lower, G, upper) for the calibrated sandwich and whether
    it holds at ``u``."""
    zero = Field(u.grid, np.zeros(u.grid.n))
    g = lyapunov_energy(u, f, potential)
    dsq = phase_dist(u, zero, potential) ** 2
    lower = consts.eta1 * dsq - consts.eta2
    upper = consts.eta3 * (dsq + 1.0)
    ok = lower - 1e-12 <= g <= upper + 1e-12
    return lower, g, upper, ok


# -- uniform Gronwall ----------------------------------------------------------

@dataclass(frozen=True)
class GronwallReport:
    applicable: bool
    satisfied: bool
    k1: float
    k2: float
    k3: float
    bound: float
    worst_value: float


def uniform_gronwall_check(
    t: np.ndarray,
    y: np.ndarray,
    a: np.ndarray,
    b: np.ndarray,
    T: float,
    tau: float,
) -> GronwallReport:
    """Executable uniform Gronwall lemma on uniformly sampled series.

    Verifies the differential hypothesis y' <= a y + b discretely; if it
    fails the report is flagged inapplicable (that is not a failure of
    the lemma).  Otherwise computes the sup over t >= T of unit-window
    trapezoid integrals of a, b, y and checks
    y(t + tau) <= (k2 + k3/tau) e^{k1} at every admissible sample.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"tau must lie in (0, 1], got {tau}")
    dt = t[1] - t[0]
    if np.max(np.abs(np.diff(t) - dt)) > 1e-9 * max(dt, 1.0):
        raise ValueError("time samples must be uniform")
    if t[-1] < T + 1.0:
        raise ValueError("series too short: need coverage of [T, T+1]")

    slack = 1e-9 * max(1.0, float(np.max(np.abs(y))))
    dy = np.diff(y) / dt
    hyp = dy <= a[:-1] * y[:-1] + b[:-1] + slack
    if not np.all(hyp):
        return GronwallReport(False, False, 0.0, 0.0, 0.0, 0.0, 0.0)

    per_unit = int(round(1.0 / dt))
    if abs(per_unit * dt - 1.0) > 1e-9:
        raise ValueError("sample spacing must divide unit windows")

    def window_sup(series: np.ndarray) -> float:
        best = 0.0
        i0 = int(np.searchsorted(t, T - 1e-12))
        for i in range(i0, len(t) - per_unit):
            best = max(best, float(np.trapezoid(series[i : i + per_unit + 1], dx=dt)))
        return best

    k1 = window_sup(a)
    k2 = window_sup(b)
    k3 = window_sup(y)
    bound = (k2 + k3 / tau) * math.exp(k1)

    shift = int(round(tau / dt))
    i0 = int(np.searchsorted(t, T - 1e-12))
    worst = -math.inf
    ok = True
    for i in range(i0, len(t) - shift):
        val = float(y[i + shift])
        worst = max(worst, val)
        if val > bound + slack:
            ok = False
    return GronwallReport(True, ok, k1, k2, k3, bound, worst)


# -- Lp exponent ladder ----------------------------------------------------------

@dataclass(frozen=True)
class LadderSchedule:
    """Exponent ladder p_{j+1} = 7 p_j / 6 + 1 with windows T_{j+1} = T_j +
    eps/j^2; closed form p_j = 8 (7/6)^{j-1} - 6."""

    epsilon: float
    p: np.ndarray
    tau: np.ndarray
    T: np.ndarray

    def __post_init__(self) -> None:
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.p[0] != 2.0 or self.T[0] != 0.0:
            raise ValueError("ladder must start at p_1 = 2, T_1 = 0")
        j = np.arange(1, len(self.p) + 1)
        growth = (7.0 / 6.0) ** j
        if np.any(self.p < growth * (1.0 - 1e-12)) or np.any(
            self.p > 8.0 * growth**2 * (1.0 + 1e-12)
        ):
            raise ValueError("exponent growth bounds violated")

    @property
    def j_max(self) -> int:
        return len(self.p)

    @classmethod
    def build(cls, j_max: int, epsilon: float) -> "LadderSchedule":
        p = [2.0]
        for _ in range(1, j_max):
            p.append(7.0 * p[-1] / 6.0 + 1.0)
        tau = epsilon / np.arange(1, j_max + 1, dtype=float) ** 2
        big_t = np.concatenate(([0.0], np.cumsum(tau[:-1])))
        return cls(epsilon, np.asarray(p), tau, big_t)


def ladder_closed_form(j: np.ndarray | int) -> np.ndarray | float:
    return 8.0 * (7.0 / 6.0) ** (np.asarray(j) - 1) - 6.0


def weighted_power_primitive(law: DissipationLaw, p: float, s: float) -> float:
    """Integral of law'(r) |r|^{p-2} r over [0, s] by adaptive quadrature."""
    if s == 0.0:
        return 0.0
    val, _ = quad(
        lambda r: float(law.deriv(np.array(r))) * abs(r) ** (p - 2.0) * r,
        0.0,
        s,
        limit=200,
    )
    return val


def power_primitive_sandwich(
    law: DissipationLaw,
    p: float,
    samples: np.ndarray,
    upper_slack: float = 1e-9,
) -> bool:
    """Two-sided bound  sigma |s|^p / p <= primitive <= law(s) |s|^{p-2} s.

    A linear law attains the lower bound with equality, so the lower check
    carries quadrature-scale slack; the upper bound keeps a fixed 1e-9.
    """
    sig = law.sigma
    for s in samples:
        ap = weighted_power_primitive(law, p, float(s))
        lower = sig * abs(s) ** p / p
        upper = float(law.value(np.array(s))) * abs(s) ** (p - 2.0) * s if s != 0.0 else 0.0
        if ap < lower - 1e-9 * max(1.0, abs(lower)):
            return False
        if ap > upper + upper_slack:
            return False
    return True


@dataclass(frozen=True)
class LadderReport:
    schedule: LadderSchedule
    window_norms: np.ndarray
    sup_linf: float
    uniform_bound: float
    sandwich_ok: bool
    stable_from: int
    nonincreasing_after_stable: bool


def lp_ladder(
    traj: TrajectorySegment,
    schedule: LadderSchedule,
    sandwich_ps: tuple[float, ...] = (2.0, 10.0 / 3.0, 6.0),
    sandwich_samples: int = 200,
    stable_rtol: float = 0.02,
) -> LadderReport:
    """Sup-over-window Lp norms of the velocity along the exponent ladder.

    For each rung j the window is t >= T_{j+1}; the report also carries
    the integral sandwich verdict for the model's law and the sup norm of
    the velocity over the first window as the reference bound.
    """
    grid = traj.model.grid
    h = grid.h
    m = traj.m
    norms = np.zeros(schedule.j_max)
    for j in range(schedule.j_max):
        t_from = schedule.T[j] + schedule.tau[j]
        sup = 0.0
        for i in range(1, m):
            if traj.times[i] < t_from - 1e-12:
                continue
            v = np.abs(traj.velocities[i])
            sup = max(sup, float((h * np.sum(v ** schedule.p[j])) ** (1.0 / schedule.p[j])))
        norms[j] = sup

    sup_linf = 0.0
    t_first = schedule.T[0] + schedule.tau[0]
    for i in range(1, m):
        if traj.times[i] >= t_first - 1e-12:
            sup_linf = max(sup_linf, float(np.max(np.abs(traj.velocities[i]))))

    s_samples = np.linspace(-3.0, 3.0, sandwich_samples)
    sandwich_ok = all(
        power_primitive_sandwich(traj.model.dissipation, p, s_samples)
        for p in sandwich_ps
    )

    stable_from = schedule.j_max - 1
    for j in range(schedule.j_max - 1):
        denom = max(norms[j], 1e-30)
        if abs(norms[j + 1] - norms[j]) <= stable_rtol * denom:
            stable_from = j
            break
    noninc = all(
        norms[j + 1] <= norms[j] * (1.0 + stable_rtol) + 1e-30
        for j in range(stable_from, schedule.j_max - 1)
    )
    return LadderReport(
        schedule,
        norms,
        sup_linf,
        float(np.max(norms)) if len(norms) else 0.0,
        sandwich_ok,
        stable_from,
        noninc,
    )


# -- smoothing rate --------------------------------------------------------------

class InsufficientDataError(ValueError):
    pass


def least_squares_line(xs: list[float], ys: list[float]) -> tuple[float, float]:
    """Closed-form least squares in a fixed summation order.

    Kept as scalar arithmetic so downstream consumers in other languages
    can reproduce the slope bit-for-bit from the same samples.
    """
    n = float(len(xs))
    sx = 0.0
    sy = 0.0
    sxx = 0.0
    sxy = 0.0
    for i in range(len(xs)):
        sx += xs[i]
        sy += ys[i]
        sxx += xs[i] * xs[i]
        sxy += xs[i] * ys[i]
    slope = (n * sxy - sx * sy) / (n * sxx - sx * sx)
    intercept = (sy - slope * sx) / n
    return slope, intercept


@dataclass(frozen=True)
class SmoothingFit:
    prefactor: float
    exponent: float
    n_points: int
    window: tuple[float, float]
    degenerate: bool = False


def smoothing_rate(
    traj: TrajectorySegment,
    window: tuple[float, float] = DEFAULT_FIT_WINDOW,
) -> SmoothingFit:
    """Fit  log ||u_t(t)||_inf^2 = log c1 - c2 log t  on the window.

    The fitted pair (c1, c2) is the numerical stand-in for the smoothing
    constants, which have no tabulated values; they are calibrated, not
    derived.  A run that is already stationary on the whole window gives
    a degenerate fit (the decay bound then holds trivially).
    """
    w0, w1 = window
    in_window = 0
    xs: list[float] = []
    ys: list[float] = []
    for i in range(1, traj.m):
        t = float(traj.times[i])
        if not (w0 < t <= w1):
            continue
        in_window += 1
        ut = float(np.max(np.abs(traj.velocities[i])))
        if ut <= 0.0:
            continue
        xs.append(math.log(t))
        ys.append(math.log(ut * ut))
    if in_window >= 5 and not xs:
        return SmoothingFit(0.0, 0.0, 0, window, degenerate=True)
    if len(xs) < 5:
        raise InsufficientDataError(
            f"only {len(xs)} usable samples in fit window {window}"
        )
    slope, intercept = least_squares_line(xs, ys)
    return SmoothingFit(math.exp(intercept), -slope, len(xs), window)


def smoothing_supremum(traj: TrajectorySegment, exponent: float, g0: float) -> float:
    """sup over recorded t > 0 of t^c2 ||u_t||_inf^2 / (1 + G(u_0))."""
    sup = 0.0
    for i in range(1, traj.m):
        t = float(traj.times[i])
        ut = float(np.max(np.abs(traj.velocities[i])))
        sup = max(sup, t**exponent * ut * ut / (1.0 + g0))
    return sup


# -- separation -------------------------------------------------------------------

@dataclass(frozen=True)
class SeparationReport:
    r_lo: float
    r_hi: float
    margin: float
    times: np.ndarray
    slice_margins: np.ndarray


def separation_check(traj: TrajectorySegment, T: float) -> SeparationReport:
    """Extremes of the state over {t >= T} and margins to the potential's
    barrier.  Only meaningful for bounded domains (singular potentials)."""
    lo, hi = traj.model.potential.domain
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise ValueError("separation requires a bounded potential domain")
    mask = traj.times >= T - 1e-12
    if not np.any(mask):
        raise ValueError(f"no recorded states at or beyond T={T}")
    tail = traj.states[mask]
    r_lo = float(np.min(tail))
    r_hi = float(np.max(tail))
    margin = min(r_lo - lo, hi - r_hi)
    slice_margins = np.minimum(
        np.min(tail, axis=1) - lo, hi - np.max(tail, axis=1)
    )
    return SeparationReport(r_lo, r_hi, margin, traj.times[mask], slice_margins)


# -- residual-energy identity -------------------------------------------------------

@dataclass(frozen=True)
class IdentityReport:
    lhs: float
    rhs: float
    residual: float
    f_at_tau: float


def energy_method_identity(
    traj: TrajectorySegment,
    tau: float,
    horizon: float,
    drop_source_term: bool = False,
) -> IdentityReport:
    """Exponentially weighted identity for the residual energy on [tau,
    tau + horizon], valid for source-free runs:

        F(tau + M) = e^{-M} F(tau) + integral of e^{s - tau - M} H(s) ds

    with H = -(law(u_t), A u_t + W''(u) u_t) - (law(u_t), A u + W'(u)) / 2.
    The time derivative is the stepper's own backward difference and the
    integral uses trapezoid weights, so the defect is O(dt).
    ``drop_source_term`` zeroes H (negative control).
    """
    model = traj.model
    if float(np.max(np.abs(model.source.values))) != 0.0:
        raise ValueError("identity requires a zero source")
    grid = model.grid
    pot = model.potential
    law = model.dissipation
    h = grid.h

    i0 = traj.index_at(tau)
    i1 = traj.index_at(tau + horizon)
    if i1 - i0 < 2:
        raise InsufficientDataError("window contains too few records")

    def f_of(i: int) -> float:
        u = traj.states[i]
        g = elliptic_values(grid, u) + pot.dW(u)
        return 0.5 * h * float(np.dot(g, g))

    hs = np.zeros(i1 - i0 + 1)
    if not drop_source_term:
        for k, i in enumerate(range(i0, i1 + 1)):
            u = traj.states[i]
            v = traj.velocities[i]
            av = law.value(v)
            bvt = elliptic_values(grid, v) + pot.d2W(u) * v
            g = elliptic_values(grid, u) + pot.dW(u)
            hs[k] = -h * float(np.dot(av, bvt)) - 0.5 * h * float(np.dot(av, g))
    ts = traj.times[i0 : i1 + 1]
    weights = np.exp(ts - tau - horizon)
    integral = float(np.trapezoid(weights * hs, ts))

    lhs = f_of(i1)
    f_tau = f_of(i0)
    rhs = math.exp(-horizon) * f_tau + integral
    return IdentityReport(lhs, rhs, abs(lhs - rhs), f_tau)
