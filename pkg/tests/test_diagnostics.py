import math

import numpy as np
import pytest
from scipy.integrate import quad

from dnl import (
    DIRICHLET,
    NEUMANN,
    Field,
    Grid,
    Model,
    StepperConfig,
    constant,
    from_function,
    make_dissipation,
    make_potential,
    norm_l2,
    solve_trajectory,
    zeros,
)
from dnl import diagnostics as diag
from dnl.grids import l2_values
from dnl.longtime import solve_stationary
from dnl.stepper import TrajectorySegment


def make_model(bc=DIRICHLET, n=63, alpha="linear", potential="double_well", f=0.0,
               domain=(0.0, 1.0), theta=0.0):
    grid = Grid(n, domain[0], domain[1], bc)
    law = make_dissipation(alpha)
    pot = (
        make_potential(potential, theta=theta)
        if potential == "logarithmic"
        else make_potential(potential)
    )
    return Model(grid, law, pot, constant(grid, f))


def zero_trajectory(model, n_records=11, dt=1e-2):
    times = dt * np.arange(n_records)
    states = np.zeros((n_records, model.grid.n))
    vel = np.zeros_like(states)
    iters = np.zeros(n_records, dtype=int)
    return TrajectorySegment(model, dt, times, states, vel, iters)


class TestEnergies:
    def test_zero_field_quadratic(self):
        model = make_model(potential="quadratic")
        z = zeros(model.grid)
        assert diag.free_energy(z, model.source, model.potential) == 0.0
        assert diag.residual_energy(z, model.source, model.potential) == 0.0
        assert diag.lyapunov_energy(z, model.source, model.potential) == 0.0

    @pytest.mark.parametrize("bc,n", [(NEUMANN, 64), (DIRICHLET, 63)])
    def test_zero_field_double_well_constant_integrand(self, bc, n):
        # constant integrand W(0) = 1/4 + shift integrates to W(0) * |domain|
        # exactly (midpoint cells for Neumann, boundary-completed trapezoid
        # for Dirichlet)
        model = make_model(bc=bc, n=n, potential="double_well")
        z = zeros(model.grid)
        w0 = 0.25 + model.potential.shift
        e = diag.free_energy(z, model.source, model.potential)
        assert e == pytest.approx(w0 * 1.0, abs=1e-14)

    def test_free_energy_against_fine_quadrature_oracle(self):
        # continuous-profile oracle by adaptive quadrature; the discrete
        # energy converges at second order
        pot = make_potential("double_well")
        f_fun = lambda x: 0.3 * np.sin(2 * np.pi * x)
        u_fun = lambda x: np.sin(np.pi * x)
        du_fun = lambda x: np.pi * np.cos(np.pi * x)
        ref, _ = quad(
            lambda x: 0.5 * du_fun(x) ** 2
            + float(pot.value(np.array(u_fun(x))))
            - f_fun(x) * u_fun(x),
            0.0,
            1.0,
            limit=200,
        )
        errs = []
        for n in (31, 63, 127):
            grid = Grid(n)
            u = from_function(grid, u_fun)
            f = from_function(grid, f_fun)
            errs.append(abs(diag.free_energy(u, f, pot) - ref))
        assert errs[0] < 2e-2
        # O(h^2): each halving of h divides the error by about 4
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.3)
        assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.3)

    def test_residual_energy_at_stationary_state(self):
        # substituting the stationary equation gives F = -||f||^2 / 2
        model = make_model(potential="double_well", f=0.2)
        st = solve_stationary(
            model.source, zeros(model.grid), model, tol=1e-13
        )
        assert st.converged
        f_norm = norm_l2(model.source)
        val = diag.residual_energy(st.u_inf, model.source, model.potential)
        assert val == pytest.approx(-0.5 * f_norm**2, abs=1e-10)

    def test_residual_energy_against_assembly_oracle(self):
        rng = np.random.default_rng(2)
        model = make_model(potential="double_well", f=0.1)
        grid = model.grid
        u = Field(grid, rng.uniform(-0.8, 0.8, grid.n))
        # independent assembly with a dense operator
        h = grid.h
        n = grid.n
        mat = np.zeros((n, n))
        for i in range(n):
            mat[i, i] = 2.0 / h**2
            if i > 0:
                mat[i, i - 1] = -1.0 / h**2
            if i < n - 1:
                mat[i, i + 1] = -1.0 / h**2
        g = mat @ u.values + u.values**3 - u.values
        expected = 0.5 * h * g @ g - h * model.source.values @ g
        got = diag.residual_energy(u, model.source, model.potential)
        assert got == pytest.approx(expected, rel=1e-12)

    def test_report_combination_identity(self):
        model = make_model(potential="double_well", f=0.05)
        cfg = StepperConfig(dt=1e-3, t_end=0.02)
        u0 = from_function(model.grid, lambda x: 0.5 * np.sin(np.pi * x))
        traj = solve_trajectory(u0, cfg, model)
        rep = diag.energy_report(traj, traj.m - 1)
        assert rep.G == model.potential.lam * rep.E + rep.F  # exact


class TestPhaseMetrics:
    def test_metric_axioms_on_samples(self):
        rng = np.random.default_rng(4)
        model = make_model(potential="logarithmic", theta=0.0)
        grid = model.grid
        pot = model.potential
        fields = [Field(grid, rng.uniform(-0.9, 0.9, grid.n)) for _ in range(6)]
        for a in fields:
            assert diag.phase_dist(a, a, pot) == 0.0
        for a in fields:
            for b in fields:
                d_ab = diag.phase_dist(a, b, pot)
                assert d_ab == diag.phase_dist(b, a, pot)  # exact symmetry
                di_ab = diag.phase_dist_inf(a, b, pot)
                assert di_ab == diag.phase_dist_inf(b, a, pot)
                for c in fields:
                    assert d_ab <= (
                        diag.phase_dist(a, c, pot) + diag.phase_dist(c, b, pot) + 1e-12
                    )
                    assert di_ab <= (
                        diag.phase_dist_inf(a, c, pot)
                        + diag.phase_dist_inf(c, b, pot)
                        + 1e-12
                    )


class TestLiapunov:
    def test_zero_trajectory_no_violations(self):
        model = make_model(potential="quadratic")
        traj = zero_trajectory(model)
        rep = diag.liapunov_check(traj, c=0.0)
        assert rep.violations == 0
        assert np.all(rep.values == 0.0)

    def test_double_well_run_decays_within_envelope(self):
        model = make_model(potential="double_well")
        cfg = StepperConfig(dt=1e-3, t_end=1.0, newton_tol=1e-11)
        u0 = from_function(
            model.grid, lambda x: 0.8 * np.sin(np.pi * x) + 0.2 * np.sin(3 * np.pi * x)
        )
        traj = solve_trajectory(u0, cfg, model)
        c = diag.fit_liapunov_constant([traj]) * 2.0 + 1e-9
        rep = diag.liapunov_check(traj, c=c)
        assert rep.violations == 0
        # decay is overwhelming: total drop dwarfs any per-step wiggle
        assert rep.values[-1] < rep.values[0]

    def test_violations_shrink_quadratically_under_refinement(self):
        model = make_model(potential="double_well")
        u0 = from_function(model.grid, lambda x: 0.8 * np.sin(np.pi * x))
        worst = {}
        for dt in (2e-3, 1e-3, 5e-4):
            cfg = StepperConfig(dt=dt, t_end=0.5, newton_tol=1e-12)
            traj = solve_trajectory(u0, cfg, model)
            worst[dt] = diag.fit_liapunov_constant([traj]) * dt * dt
        # fitted c is max increase / dt^2; the raw increases themselves
        # must not grow under refinement (they shrink or stay at rounding)
        assert worst[1e-3] <= max(worst[2e-3], 1e-12)
        assert worst[5e-4] <= max(worst[1e-3], 1e-12)

    def test_time_reversed_trajectory_fails(self):
        model = make_model(potential="double_well")
        cfg = StepperConfig(dt=1e-3, t_end=0.5)
        u0 = from_function(model.grid, lambda x: 0.8 * np.sin(np.pi * x))
        traj = solve_trajectory(u0, cfg, model)
        rev = TrajectorySegment(
            model,
            traj.dt,
            traj.times,
            traj.states[::-1].copy(),
            traj.velocities[::-1].copy(),
            traj.newton_iters[::-1].copy(),
        )
        c = diag.fit_liapunov_constant([traj]) * 2.0 + 1e-9
        rep = diag.liapunov_check(rev, c=c)
        assert rep.violations > 0

    def test_sandwich_fit_and_check(self):
        model = make_model(potential="double_well", f=0.1)
        grid = model.grid
        samples = [
            from_function(grid, lambda x, s=s: s * np.sin(np.pi * x))
            for s in (0.1, 0.2, 0.3, 0.5, 0.7, 0.9)
        ]
        consts = diag.fit_sandwich_constants(samples, model.source, model.potential)
        assert consts.eta1 > 0 and consts.eta3 > 0 and consts.fitted
        # holds at the origin: all operator terms vanish there
        lower, g0, upper, ok = diag.liapunov_sandwich(
            zeros(grid), model.source, model.potential, consts
        )
        assert ok and lower <= g0 <= upper
        # holds across the sample family and at a larger admissible state
        for s in (0.15, 0.45, 0.85, 1.2):
            u = from_function(grid, lambda x: s * np.sin(np.pi * x))
            *_, ok = diag.liapunov_sandwich(u, model.source, model.potential, consts)
            if s <= 0.9:
                assert ok


class TestUniformGronwall:
    def test_constant_series(self):
        t = np.linspace(0.0, 3.0, 3001)
        y0 = 2.0
        rep = diag.uniform_gronwall_check(
            t, np.full_like(t, y0), np.zeros_like(t), np.zeros_like(t), 0.5, 0.7
        )
        assert rep.applicable and rep.satisfied
        assert rep.k1 == 0.0 and rep.k2 == 0.0
        assert rep.k3 == pytest.approx(y0, rel=1e-12)
        assert rep.bound == pytest.approx(y0 / 0.7, rel=1e-12)

    def test_exponential_decay_closed_form(self):
        t = np.linspace(0.0, 4.0, 4001)
        y = np.exp(-t)
        big_t = 0.5
        rep = diag.uniform_gronwall_check(
            t, y, np.zeros_like(t), np.zeros_like(t), big_t, 0.5
        )
        assert rep.applicable and rep.satisfied
        k3_exact = (1.0 - math.exp(-1.0)) * math.exp(-big_t)
        assert rep.k3 == pytest.approx(k3_exact, rel=1e-5)

    def test_growing_series_flagged_inapplicable(self):
        t = np.linspace(0.0, 3.0, 3001)
        y = np.exp(t)
        rep = diag.uniform_gronwall_check(
            t, y, np.zeros_like(t), np.zeros_like(t), 0.5, 0.5
        )
        assert not rep.applicable

    def test_rejects_bad_tau(self):
        t = np.linspace(0.0, 3.0, 301)
        z = np.zeros_like(t)
        with pytest.raises(ValueError):
            diag.uniform_gronwall_check(t, z, z, z, 0.0, 1.5)


class TestLadder:
    def test_schedule_first_values(self):
        sched = diag.LadderSchedule.build(3, 0.5)
        assert sched.p[0] == 2.0
        assert sched.p[1] == pytest.approx(10.0 / 3.0, rel=1e-15)
        assert sched.p[2] == pytest.approx(44.0 / 9.0, rel=1e-15)
        assert sched.T[0] == 0.0
        assert sched.tau[0] == 0.5
        assert sched.T[1] == 0.5

    def test_closed_form_matches_recurrence_to_40(self):
        # oracle: iterate the affine recurrence; comparison is relative
        # (values reach ~3.3e3 by j = 40)
        sched = diag.LadderSchedule.build(40, 0.5)
        js = np.arange(1, 41)
        closed = diag.ladder_closed_form(js)
        rel = np.abs(sched.p - closed) / np.maximum(1.0, np.abs(closed))
        assert np.max(rel) <= 1e-12

    def test_growth_bounds(self):
        sched = diag.LadderSchedule.build(40, 0.5)
        js = np.arange(1, 41)
        growth = (7.0 / 6.0) ** js
        assert np.all(sched.p >= growth)
        assert np.all(sched.p <= 8.0 * growth**2)

    @pytest.mark.parametrize("alpha", ["linear", "cubic", "sinh"])
    def test_primitive_sandwich_all_laws(self, alpha):
        law = make_dissipation(alpha)
        samples = np.linspace(-3.0, 3.0, 200)
        for p in (2.0, 10.0 / 3.0, 6.0):
            assert diag.power_primitive_sandwich(law, p, samples)

    def test_zero_trajectory_ladder_norms_vanish(self):
        model = make_model(potential="quadratic")
        traj = zero_trajectory(model, n_records=30, dt=0.05)
        sched = diag.LadderSchedule.build(4, 0.5)
        rep = diag.lp_ladder(traj, sched)
        assert np.all(rep.window_norms == 0.0)
        assert rep.sandwich_ok


class TestSmoothing:
    def test_stationary_run_degenerate_fit(self):
        model = make_model(potential="quadratic")
        traj = zero_trajectory(model, n_records=200, dt=1e-3)
        fit = diag.smoothing_rate(traj, window=(0.01, 0.1))
        assert fit.degenerate
        assert diag.smoothing_supremum(traj, fit.exponent, 0.0) == 0.0

    def test_linear_model_monotone_and_uniform(self):
        # spectral oracle: the linear flow damps every mode, so the
        # velocity sup norm decays monotonically after the first step
        model = make_model(potential="quadratic", n=63)
        kappa = 5.0

        def rough(seed):
            # random signs on a fixed 1/k spectrum, normalized to one phase
            # radius (d2 is homogeneous for the quadratic potential): the
            # family shares a spectral envelope, shapes differ
            r = np.random.default_rng(seed)
            signs = r.choice([-1.0, 1.0], 20)
            vals = sum(
                s / (k + 1) * np.sin((k + 1) * np.pi * model.grid.x)
                for k, s in enumerate(signs)
            )
            u = Field(model.grid, vals)
            d = diag.phase_dist(u, zeros(model.grid), model.potential)
            return Field(model.grid, vals * (kappa / d))

        cfg = StepperConfig(dt=2.5e-4, t_end=0.5, newton_tol=1e-12)
        fits, trajs = [], []
        for seed in range(4):
            traj = solve_trajectory(rough(seed), cfg, model)
            ut = diag.trajectory_metrics(traj)["ut_Linf"][1:]
            assert np.all(np.diff(ut) <= 1e-12 * ut[0])
            # fit inside the multi-mode regime, before the slowest mode's
            # exponential tail takes over around t ~ 0.1
            fit = diag.smoothing_rate(traj, window=(0.001, 0.03))
            assert fit.exponent > 0  # decay, not growth
            fits.append(fit.exponent)
            trajs.append(traj)
        c2 = float(np.median(fits))
        sups = []
        for traj in trajs:
            g0 = diag.lyapunov_energy(traj.state(0), model.source, model.potential)
            sups.append(diag.smoothing_supremum(traj, c2, g0))
        assert max(sups) / min(sups) <= 3.0

    def test_spectral_solution_oracle(self):
        # exact modal solution of the linear problem vs the stepper
        model = make_model(potential="quadratic", n=31)
        grid = model.grid
        x = grid.x
        modes = [1, 5, 9]
        amps = [0.5, 0.3, 0.2]
        u0_vals = sum(a * np.sin(k * np.pi * x) for a, k in zip(amps, modes))
        cfg = StepperConfig(dt=2e-4, t_end=0.1, newton_tol=1e-13, record_every=50)
        traj = solve_trajectory(Field(grid, u0_vals), cfg, model)
        h = grid.h
        for i in range(traj.m):
            t = traj.times[i]
            exact = np.zeros_like(x)
            for a, k in zip(amps, modes):
                mu = 2.0 / h**2 * (1.0 - math.cos(k * math.pi * h))
                exact += a * math.exp(-(mu + 1.0) * t) * np.sin(k * np.pi * x)
            assert np.max(np.abs(traj.states[i] - exact)) <= 2e-3


class TestSeparation:
    def test_zero_run_full_margin(self):
        model = make_model(potential="logarithmic", theta=0.0)
        traj = zero_trajectory(model)
        rep = diag.separation_check(traj, 0.0)
        assert rep.margin == 1.0

    def test_unbounded_domain_rejected(self):
        model = make_model(potential="double_well")
        traj = zero_trajectory(model)
        with pytest.raises(ValueError):
            diag.separation_check(traj, 0.0)

    def test_margin_improves_with_time(self):
        model = make_model(potential="logarithmic", theta=0.0, n=63)
        u0 = from_function(model.grid, lambda x: 0.99 * np.sin(np.pi * x))
        cfg = StepperConfig(dt=1e-3, t_end=0.5, record_every=10)
        traj = solve_trajectory(u0, cfg, model)
        early = diag.separation_check(traj, 0.01)
        later = diag.separation_check(traj, 0.1)
        assert early.margin > 0.0
        assert later.margin >= early.margin

    def test_neumann_constant_approaches_ode_equilibrium(self):
        from dnl.stepper import ode_oracle

        model = make_model(
            bc=NEUMANN, n=16, potential="logarithmic", theta=0.0
        )
        u0 = 0.999
        cfg = StepperConfig(dt=1e-3, t_end=3.0, record_every=100)
        traj = solve_trajectory(constant(model.grid, u0), cfg, model)
        rep = diag.separation_check(traj, 0.0)
        # for zero source the scalar equilibrium is 0, so the margin
        # approaches 1; the oracle confirms the scalar decay
        ref = ode_oracle(u0, traj.times, model.dissipation, model.potential)
        assert abs(ref[-1]) < 0.05
        assert rep.slice_margins[-1] > 0.9
        assert np.all(np.diff(rep.slice_margins) >= -1e-12)


class TestEnergyIdentity:
    def test_zero_trajectory_zero_residual(self):
        model = make_model(potential="double_well")
        traj = zero_trajectory(model, n_records=201, dt=1e-2)
        rep = diag.energy_method_identity(traj, 0.5, 1.0)
        assert rep.residual == 0.0

    def test_requires_zero_source(self):
        model = make_model(potential="double_well", f=0.3)
        traj = zero_trajectory(model)

        with pytest.raises(ValueError):
            diag.energy_method_identity(traj, 0.02, 0.05)

    def test_residual_first_order_and_negative_control(self):
        model = make_model(potential="double_well")
        u0 = from_function(
            model.grid, lambda x: 0.8 * np.sin(np.pi * x) + 0.3 * np.sin(3 * np.pi * x)
        )
        residuals = {}
        for dt in (1e-3, 5e-4):
            cfg = StepperConfig(dt=dt, t_end=1.1, newton_tol=1e-12)
            traj = solve_trajectory(u0, cfg, model)
            rep = diag.energy_method_identity(traj, 0.1, 1.0)
            residuals[dt] = rep.residual
            assert rep.residual <= 0.05 * abs(rep.f_at_tau)
        ratio = residuals[1e-3] / residuals[5e-4]
        assert 1.7 <= ratio <= 2.3
        # negative control: dropping the weighted source term breaks the
        # identity by an O(1) amount
        cfg = StepperConfig(dt=1e-3, t_end=1.1, newton_tol=1e-12)
        traj = solve_trajectory(u0, cfg, model)
        broken = diag.energy_method_identity(traj, 0.1, 1.0, drop_source_term=True)
        assert broken.residual > 100.0 * residuals[1e-3]
        assert broken.residual > 1e-3 * abs(broken.f_at_tau)


class TestPerStepInequalities:
    @pytest.mark.parametrize("alpha", ["linear", "cubic", "sinh"])
    def test_dissipation_floor(self, alpha):
        model = make_model(alpha=alpha, potential="double_well")
        u0 = from_function(model.grid, lambda x: 0.7 * np.sin(np.pi * x))
        traj = solve_trajectory(StepperConfigured := u0, StepperConfig(dt=1e-3, t_end=0.3), model)
        h = model.grid.h
        sigma = model.dissipation.sigma
        for i in range(1, traj.m):
            v = traj.velocities[i]
            lhs = h * float(np.dot(model.dissipation.value(v), v))
            assert lhs >= sigma * h * float(np.dot(v, v)) - 1e-12

    def test_free_energy_per_step_decay(self):
        # lambda-convexity gives the exact per-step bound
        # E(w) - E(u) <= -sigma tau |v|^2 + (lam/2) tau^2 |v|^2 (+ solver slack)
        model = make_model(potential="double_well")
        tau = 1e-3
        tol = 1e-12
        cfg = StepperConfig(dt=tau, t_end=0.3, newton_tol=tol)
        u0 = from_function(model.grid, lambda x: 0.8 * np.sin(np.pi * x))
        traj = solve_trajectory(u0, cfg, model)
        e = diag.trajectory_metrics(traj)["E"]
        h = model.grid.h
        sigma = model.dissipation.sigma
        lam = model.potential.lam
        for i in range(1, traj.m):
            v = traj.velocities[i]
            vsq = h * float(np.dot(v, v))
            vnorm = math.sqrt(vsq)
            bound = (
                -sigma * tau * vsq
                + 0.5 * lam * tau * tau * vsq
                + tau * tol * (vnorm + 1.0)
            )
            assert e[i] - e[i - 1] <= bound + 1e-14
