"""Observable, law-checker, rate-fit, and concentration tests."""

import numpy as np
import pytest

from starknls import (
    Backend,
    Field,
    GridSpec,
    PhysParams,
    StopReason,
    TrajectoryRecord,
    blowup_sufficient_condition,
    check_energy_rate,
    check_mass_law,
    check_momentum_law,
    concentration_series,
    detect_blowup_and_fit,
    mass_in_window,
    sample,
    sup_mass_in_window,
    t_star_upper_bound,
)
from starknls.diagnostics import DiagnosticsSample
from starknls.errors import InsufficientDataError, NoBoundError, ResolutionError

from conftest import random_band_limited_field

Q_MASS_SQ = 2.7206990463513267


def run_cfg_text(**kw):
    defaults = dict(
        scenario="law", t_end=1.0, n=1, N=1024, L=20.0, a=0.0, E="0",
        recipe="gaussian", amplitude=0.5, width=1.0, k0="0",
        dt0=1e-3, cfl=1e300, nl=1.0, backend="gauge",
        sample_every=1,
    )
    defaults.update(kw)
    return """
[scenario]
id = {scenario}
t_end = {t_end}
backend = {backend}

[grid]
n = {n}
N = {N}
L = {L}

[physics]
a = {a}
E = {E}
nl_strength = {nl}

[initial]
recipe = {recipe}
amplitude = {amplitude}
width = {width}
k0 = {k0}

[controller]
dt0 = {dt0}
cfl = {cfl}

[observers]
sample_every_steps = {sample_every}
""".format(**defaults)


def run_trajectory(**kw):
    from starknls import ScenarioConfig, run_scenario

    cfg = ScenarioConfig.from_text(run_cfg_text(**kw))
    return run_scenario(cfg, write=False).traj


class TestSample:
    def test_ground_state_observables(self, gs_1d):
        params = PhysParams(n=1, a=0.1, E=(0.3,))
        s = sample(gs_1d.profile, 0.0, params)
        assert abs(s.e0) < 1e-6 * s.mass_sq
        assert abs(s.momentum[0]) < 1e-10
        assert abs(s.stark_moment) < 1e-10  # odd integrand, symmetric profile
        assert s.ev == pytest.approx(s.e0 + s.stark_moment, abs=1e-10)

    def test_boosted_packet_momentum(self):
        grid = GridSpec.create(1, 30.0, 2048)
        x = grid.axis_coordinates(0)
        k1 = 16 * np.pi / 30.0
        g = np.exp(-(x**2) / 2)
        f = Field(grid, g * np.exp(1j * k1 * x))
        s = sample(f, 0.0, PhysParams(n=1))
        g_mass = np.sum(g**2) * grid.dx[0]
        assert s.momentum[0] == pytest.approx(k1 * g_mass, abs=1e-8)

    def test_zero_field(self, grid_1d):
        z = Field(grid_1d, np.zeros(grid_1d.shape, dtype=complex))
        s = sample(z, 0.0, PhysParams(n=1, E=(0.5,)))
        assert (
            s.mass_sq == s.grad_sq == s.e0 == s.ev == s.variance
            == s.lp_sum == s.stark_moment == 0.0
        )
        assert s.momentum == (0.0,)

    def test_ev_identity_on_random_fields(self, grid_1d):
        params = PhysParams(n=1, a=0.2, E=(0.7,))
        for seed in range(4):
            f = random_band_limited_field(grid_1d, seed=seed)
            s = sample(f, 0.0, params)
            assert abs(s.ev - (s.e0 + s.stark_moment)) <= 1e-10 * max(
                1.0, abs(s.ev)
            )


class TestMassLaw:
    def test_conservative(self):
        traj = run_trajectory(a=0.0, t_end=0.5)
        rep = check_mass_law(traj)
        assert rep.max_rel_dev < 1e-10

    def test_damped_rate(self):
        traj = run_trajectory(a=0.1, t_end=0.5)
        rep = check_mass_law(traj)
        assert rep.max_rel_dev < 1e-10  # fitted rate within 1e-10 of 2a

    def test_closed_form_ratio(self):
        traj = run_trajectory(a=0.1, t_end=2.0)
        m = traj.column("mass_sq")
        assert m[-1] / m[0] == pytest.approx(np.exp(-0.4), rel=1e-12)

    def test_needs_two_samples(self):
        traj = TrajectoryRecord(params=PhysParams(n=1), backend=Backend.GAUGE_FRAME)
        with pytest.raises(InsufficientDataError):
            check_mass_law(traj)


class TestEnergyRate:
    def test_conservative_limit(self):
        traj = run_trajectory(a=0.0, t_end=1.0, dt0=1e-4)
        rep = check_energy_rate(traj, traj.params)
        assert rep.max_rel_dev < 1e-8

    def test_damped_rate(self):
        traj = run_trajectory(a=0.1, t_end=1.0)
        rep = check_energy_rate(traj, traj.params)
        assert rep.max_rel_dev < 1e-4

    def test_stark_conservative_ev(self):
        # with a = 0 the potential-frame energy is conserved
        traj = run_trajectory(a=0.0, E="0.5", t_end=1.0)
        rep = check_energy_rate(traj, traj.params)
        assert "dEV/dt" in rep.notes
        devv = float(rep.notes.split("dEV/dt dev=")[1])
        assert devv < 1e-4


class TestMomentumLaw:
    def test_e_zero_closed_form(self):
        traj = run_trajectory(a=0.25, t_end=1.0, k0="0.8")
        rep = check_momentum_law(traj, traj.params)
        assert rep.max_rel_dev < 1e-8

    def test_linear_stark_adjudicates_first_power(self):
        # nonlinearity off, direct potential: dP/dt = -E mass_sq exactly
        traj = run_trajectory(
            a=0.0, E="0.5", nl=0.0, backend="direct", t_end=1.0, width=2.0
        )
        rep = check_momentum_law(traj, traj.params)
        assert "q=1" in rep.notes.split(";")[0]
        assert rep.max_rel_dev < 1e-6

    def test_degenerate_flagged(self):
        traj = run_trajectory(a=0.0, t_end=0.2)
        rep = check_momentum_law(traj, traj.params)
        assert "degenerate" in rep.notes

    def test_full_equation_still_first_power(self):
        # damping + potential + nonlinearity: q=1 must still win
        traj = run_trajectory(a=0.1, E="0.4", t_end=1.0, amplitude=0.8)
        rep = check_momentum_law(traj, traj.params)
        assert "q=1" in rep.notes.split(";")[0]


def synthetic_trajectory(t, gsq, stop=StopReason.GRAD_THRESHOLD):
    traj = TrajectoryRecord(params=PhysParams(n=1), backend=Backend.GAUGE_FRAME)
    traj.stop_reason = stop
    for ti, gi in zip(t, gsq):
        traj.samples.append(DiagnosticsSample(
            t=float(ti), mass_sq=1.0, grad_sq=float(gi), e0=0.0, ev=0.0,
            momentum=(0.0,), variance=0.0, lp_sum=0.0, stark_moment=0.0,
        ))
        traj.dt_series.append(0.0)
        traj.fill_series.append(0.0)
    return traj


class TestBlowupFit:
    def test_manufactured_loglog(self):
        rng = np.random.default_rng(42)
        T_true, C = 1.0, 1.0
        sigma = np.geomspace(1e-6, 0.2, 200)[::-1]
        t = T_true - sigma
        gsq = C * np.log(np.log(1.0 / sigma)) / sigma
        gsq = gsq * (1.0 + 0.01 * rng.standard_normal(sigma.size))
        rep = detect_blowup_and_fit(synthetic_trajectory(t, gsq))
        assert rep.blew_up
        assert rep.T_star_est == pytest.approx(T_true, abs=1e-3)
        assert rep.rate_exponent == pytest.approx(0.5, abs=0.03)
        assert rep.loglog_residual <= rep.power_residual
        assert not rep.fit_unreliable

    def test_manufactured_pure_power(self):
        # the pseudo-conformal rate (T-t)^(-1) for the gradient norm
        T_true = 2.0
        sigma = np.geomspace(1e-6, 0.3, 150)[::-1]
        t = T_true - sigma
        gsq = sigma**-2.0
        rep = detect_blowup_and_fit(synthetic_trajectory(t, gsq))
        assert rep.rate_exponent == pytest.approx(1.0, abs=0.03)
        assert rep.T_star_est == pytest.approx(T_true, abs=1e-3)
        assert rep.power_residual <= rep.loglog_residual

    def test_constant_series_not_blowup(self):
        t = np.linspace(0, 1, 50)
        gsq = np.full(50, 2.0)
        rep = detect_blowup_and_fit(
            synthetic_trajectory(t, gsq, stop=StopReason.T_END)
        )
        assert not rep.blew_up

    def test_t_star_exceeds_last_sample(self):
        sigma = np.geomspace(1e-5, 0.2, 120)[::-1]
        t = 1.0 - sigma
        rep = detect_blowup_and_fit(synthetic_trajectory(t, sigma**-1.1))
        assert rep.T_star_est > t[-1]

    def test_sparse_window_flagged(self):
        sigma = np.geomspace(1e-4, 0.2, 12)[::-1]
        t = 1.0 - sigma
        rep = detect_blowup_and_fit(synthetic_trajectory(t, 1.0 / sigma))
        assert rep.fit_unreliable


class TestMassWindows:
    def test_full_box_captures_everything(self, gs_1d):
        grid = gs_1d.profile.grid
        full = mass_in_window(gs_1d.profile, (0.0,), 19.9)
        assert full == pytest.approx(gs_1d.mass_sq, rel=1e-12)

    def test_window_five_captures_99(self, gs_1d):
        m = mass_in_window(gs_1d.profile, (0.0,), 5.0)
        assert m >= 0.99 * gs_1d.mass_sq

    def test_monotone_in_radius(self, gs_1d):
        radii = [0.5, 1.0, 2.0, 4.0, 8.0]
        masses = [mass_in_window(gs_1d.profile, (0.0,), w) for w in radii]
        assert all(b >= a for a, b in zip(masses, masses[1:]))

    def test_sup_translation_invariant(self, gs_1d):
        grid = gs_1d.profile.grid
        m0, c0 = sup_mass_in_window(gs_1d.profile, 2.0)
        shifted = Field(grid, np.roll(gs_1d.profile.data, 217))
        m1, c1 = sup_mass_in_window(shifted, 2.0)
        assert abs(m1 - m0) <= 1e-10 * m0
        assert c1[0] != c0[0]

    def test_sup_matches_fixed_center(self, gs_1d):
        m_sup, center = sup_mass_in_window(gs_1d.profile, 3.0)
        m_fix = mass_in_window(gs_1d.profile, center, 3.0)
        assert m_sup == pytest.approx(m_fix, rel=1e-12)

    def test_tiny_window_rejected(self, gs_1d):
        with pytest.raises(ResolutionError):
            mass_in_window(gs_1d.profile, (0.0,), 1e-4)


class TestConcentrationSeries:
    def test_global_run_bounded_by_total_mass(self):
        from starknls import ScenarioConfig, run_scenario

        cfg = ScenarioConfig.from_text(run_cfg_text(
            a=0.1, t_end=1.0, amplitude=0.8,
        ) + "snapshot_every_steps = 200\n")
        traj = run_scenario(cfg, write=False).traj
        series = concentration_series(traj)
        masses = traj.column("mass_sq")
        for point in series:
            assert point.window_mass <= masses[0] + 1e-12

    def test_requires_snapshots(self):
        traj = TrajectoryRecord(params=PhysParams(n=1), backend=Backend.GAUGE_FRAME)
        with pytest.raises(InsufficientDataError):
            concentration_series(traj)


class TestTStarBound:
    def test_arithmetic(self):
        assert t_star_upper_bound(np.e, 1.0, 1.0) == pytest.approx(1.0, rel=1e-14)

    def test_threshold_case_rejected(self):
        with pytest.raises(NoBoundError):
            t_star_upper_bound(1.0, 0.5, 1.0)

    def test_zero_damping_rejected(self):
        with pytest.raises(NoBoundError):
            t_star_upper_bound(2.0, 0.0, 1.0)


class TestBlowupSufficientCondition:
    def test_ground_state_is_borderline_false(self, gs_1d):
        params = PhysParams(n=1, a=0.1)
        assert not blowup_sufficient_condition(gs_1d.profile, params)

    def test_quadratic_phase_supercritical_true(self, gs_1d):
        grid = gs_1d.profile.grid
        x = grid.axis_coordinates(0)
        data = 1.2 * gs_1d.profile.data.real * np.exp(-1j * x**2 / 4)
        assert blowup_sufficient_condition(Field(grid, data), PhysParams(n=1))

    def test_subcritical_false(self, gs_1d):
        grid = gs_1d.profile.grid
        half = Field(grid, 0.5 * gs_1d.profile.data)
        assert not blowup_sufficient_condition(half, PhysParams(n=1))
