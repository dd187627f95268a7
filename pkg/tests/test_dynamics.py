"""Upwind simulator: exact solutions, budgets, positivity, spectral agreement."""

import math

import numpy as np
import pytest

from canndyn import (CFLError, SimConfig, aeg_diagnostic, build_grid,
                     build_linearization, dissipativity_margin, initial_bump,
                     integrate, mass_balance_residual, scan_real_roots_K,
                     simulate, solve_steady, step, trivial_steady)
from helpers import (UNSTABLE_BRACKET, benchmark_model, dissipative_model,
                     gaussian, transport_model, unstable_model)


def transport_exact(grid, t, mu, ic):
    s = grid.nodes
    shifted = np.where(s >= t, ic(s - t), 0.0)
    return shifted * math.exp(-mu * t)


class TestStep:
    def test_zero_state_stays_zero_both_modes(self):
        model = dissipative_model()
        g = build_grid(model.s_max, 200)
        lin = build_linearization(model, trivial_steady(model, g))
        z = g.zeros()
        assert np.all(step(model, z, None, 0.01, "nonlinear").values == 0.0)
        assert np.all(step(model, z, lin, 0.01, "linearized").values == 0.0)

    def test_cfl_violation_raises(self):
        model = transport_model()
        g = build_grid(model.s_max, 100)
        with pytest.raises(CFLError):
            step(model, g.function(gaussian(3.0, 0.5)), None, 1.0, "nonlinear")

    def test_transport_decay_norm_tracks_exact_rate(self):
        # oracle: with no births the total mass decays exactly like e^(-mu t)
        mu = 0.4
        model = transport_model(mu=mu)
        g = build_grid(model.s_max, 800)
        rep = simulate(model, g.function(gaussian(2.0, 0.5)),
                       SimConfig(t_end=2.0, mode="nonlinear", cfl=0.5, record_every=50))
        expected = rep.norms[0] * math.exp(-mu * 2.0)
        assert rep.norms[-1] == pytest.approx(expected, rel=2e-3)

    def test_near_stationarity_at_solved_equilibrium(self):
        model = benchmark_model()
        drifts = []
        for n_cells in (400, 800):
            g = build_grid(model.s_max, n_cells)
            state = solve_steady(model, g, (0.0, 40.0), fp_tol=1e-9)
            rep = simulate(model, state.n,
                           SimConfig(t_end=5.0, mode="nonlinear", record_every=100))
            drift = float(g.weights @ np.abs(rep.final_profile.values - state.n.values))
            drifts.append(drift / integrate(state.n))
            assert abs(rep.growth_rate) < 0.02  # stationarity of the fitted rate
        assert drifts[0] < 0.1  # O(h + dt) t with t = 5
        assert drifts[1] < 0.7 * drifts[0]


class TestConvergenceOrder:
    def test_first_order_in_h_and_dt(self):
        # oracle: exact transport-decay solution; L1 error halves with (h, dt)
        mu, t_end = 0.4, 2.0
        model = transport_model(mu=mu)
        ic = gaussian(2.0, 0.5)
        errs = []
        for n_cells in (100, 200, 400):
            g = build_grid(model.s_max, n_cells)
            rep = simulate(model, g.function(ic),
                           SimConfig(t_end=t_end, mode="nonlinear", cfl=0.5,
                                     record_every=10 ** 9))
            exact = transport_exact(g, t_end, mu, ic)
            errs.append(float(g.weights @ np.abs(rep.final_profile.values - exact)))
        for e0, e1 in zip(errs, errs[1:]):
            assert 1.6 <= e0 / e1 <= 2.4


class TestMassBalance:
    def test_zero_state_residual_is_zero(self):
        model = transport_model()
        g = build_grid(model.s_max, 100)
        nxt = step(model, g.zeros(), None, 0.01, "nonlinear")
        assert mass_balance_residual(model, g.zeros(), nxt, 0.01) == 0.0

    def test_pure_transport_conserves_discrete_mass(self):
        # compact bump away from both ends: fluxes telescope exactly
        model = transport_model(mu=0.0)
        g = build_grid(model.s_max, 400)
        state = g.function(gaussian(3.0, 0.4))
        nxt = step(model, state, None, 0.01, "nonlinear")
        assert mass_balance_residual(model, state, nxt, 0.01) < 1e-10

    def test_generic_residual_shrinks_under_refinement(self):
        # measured after a few steps so the renewal boundary value has
        # settled; the first step from an inconsistent initial condition
        # legitimately reports an O(1) budget violation
        model = benchmark_model()
        residuals = []
        for n_cells in (200, 400, 800):
            g = build_grid(model.s_max, n_cells)
            state = g.function(gaussian(4.0, 1.0, 2.0))
            dt = 0.5 * float(np.diff(g.nodes).min())
            for _ in range(5):
                state = step(model, state, None, dt, "nonlinear")
            nxt = step(model, state, None, dt, "nonlinear")
            residuals.append(mass_balance_residual(model, state, nxt, dt))
        assert residuals[2] < residuals[0] / 1.5
        assert all(r < 0.2 for r in residuals)


class TestSimulateDiagnostics:
    def test_times_increase_and_final_always_recorded(self):
        model = transport_model()
        g = build_grid(model.s_max, 100)
        rep = simulate(model, g.function(gaussian(2.0, 0.5)),
                       SimConfig(t_end=1.0, mode="nonlinear", record_every=7))
        assert np.all(np.diff(rep.times) > 0)
        assert rep.times[-1] == pytest.approx(1.0)
        assert np.all(rep.norms >= 0)

    def test_snapshots_land_on_requested_times(self):
        model = transport_model()
        g = build_grid(model.s_max, 100)
        rep = simulate(model, g.function(gaussian(2.0, 0.5)),
                       SimConfig(t_end=1.0, mode="nonlinear", record_every=5),
                       snapshot_times=[0.0, 0.5, 1.0])
        times = [t for t, _ in rep.snapshots]
        assert times[0] == 0.0
        assert times[-1] == pytest.approx(1.0)
        assert abs(times[1] - 0.5) <= rep.dt

    def test_explicit_dt_is_respected(self):
        model = transport_model()
        g = build_grid(model.s_max, 100)
        rep = simulate(model, g.function(gaussian(2.0, 0.5)),
                       SimConfig(t_end=1.0, mode="nonlinear", dt=0.01, record_every=10))
        assert rep.dt == pytest.approx(0.01)

    def test_nonlinear_requires_nonnegative_initial(self):
        model = transport_model()
        g = build_grid(model.s_max, 100)
        with pytest.raises(ValueError):
            simulate(model, g.function(lambda s: np.sin(s)),
                     SimConfig(t_end=1.0, mode="nonlinear"))

    def test_blowup_reports_first_bad_time(self):
        # sustained supercritical growth overflows the float range; the
        # failure must carry the time at which the state went non-finite
        from canndyn import SimulationError
        from helpers import decay_model
        model = decay_model(beta0=5.0, b=0.01, mu=0.0, s_max=10.0)
        g = build_grid(model.s_max, 200)
        with np.errstate(over="ignore"), \
                pytest.raises(SimulationError, match="non-finite state at t"):
            simulate(model, g.function(gaussian(2.0, 0.5)),
                     SimConfig(t_end=200.0, mode="nonlinear", record_every=50))

    def test_sim_config_validation(self):
        with pytest.raises(ValueError):
            SimConfig(t_end=0.0)
        with pytest.raises(ValueError):
            SimConfig(t_end=1.0, dt=0.1, cfl=0.5)
        with pytest.raises(ValueError):
            SimConfig(t_end=1.0, cfl=1.5)
        with pytest.raises(ValueError):
            SimConfig(t_end=1.0, mode="semi-implicit")


class TestDecayBound:
    def test_margin_bounds_linearized_decay(self):
        # kappa = 0.1 for this model; the fitted rate must respect it
        model = dissipative_model()
        g = build_grid(model.s_max, 500)
        lin = build_linearization(model, trivial_steady(model, g))
        verdict = dissipativity_margin(lin)
        assert verdict.margin == pytest.approx(0.1, abs=1e-12)
        rng = np.random.default_rng(3)
        u0 = g.function(rng.uniform(0.0, 1.0, g.n_nodes))
        rep = simulate(model, u0, SimConfig(t_end=40.0, mode="linearized",
                                            record_every=20), lin=lin)
        assert rep.growth_rate <= -verdict.margin + 0.02

    def test_norm_trace_under_exponential_envelope(self):
        model = dissipative_model()
        g = build_grid(model.s_max, 400)
        lin = build_linearization(model, trivial_steady(model, g))
        kappa = dissipativity_margin(lin).margin
        rng = np.random.default_rng(4)
        u0 = g.function(rng.uniform(0.0, 1.0, g.n_nodes))
        rep = simulate(model, u0, SimConfig(t_end=30.0, mode="linearized",
                                            record_every=10), lin=lin)
        tail = slice(len(rep.times) // 2, None)
        t0 = rep.times[tail][0]
        n0 = rep.norms[tail][0]
        envelope = 1.1 * n0 * np.exp(-kappa * (rep.times[tail] - t0))
        assert np.all(rep.norms[tail] <= envelope)


class TestSpectralAgreement:
    def test_growth_rate_matches_rightmost_root(self):
        model = unstable_model()
        g = build_grid(model.s_max, 1200)
        state = solve_steady(model, g, UNSTABLE_BRACKET, fp_tol=1e-10)
        lin = build_linearization(model, state)
        _, roots = scan_real_roots_K(lin, (0.0, 2.0), 100, 1e-11)
        root = roots[-1].root
        rep = simulate(model, initial_bump(g, 2.0, 0.6, 1.0),
                       SimConfig(t_end=150.0, mode="linearized", record_every=25),
                       lin=lin)
        assert abs(rep.growth_rate - root) <= max(0.05 * abs(root), 0.02)

    def test_split_kernel_evolution_is_identical(self):
        # linearized stepping through a two-term representation of the same
        # kernel reproduces the single-term evolution exactly
        import dataclasses

        from canndyn import AttackKernel, KernelTerm, Rate1D
        base = unstable_model()
        term = base.alpha.terms[0]
        p0, p1, p2 = term.alpha1.params
        split = AttackKernel((
            KernelTerm(Rate1D("poly_exp", (0.4 * p0, p1, p2)), term.alpha2),
            KernelTerm(Rate1D("poly_exp", (0.6 * p0, p1, p2)), term.alpha2),
        ))
        split_model = dataclasses.replace(base, alpha=split)
        g = build_grid(base.s_max, 300)
        one = solve_steady(base, g, UNSTABLE_BRACKET, fp_tol=1e-10)
        lin1 = build_linearization(base, one)
        two = solve_steady(split_model, g, UNSTABLE_BRACKET, fp_tol=1e-10)
        lin2 = build_linearization(split_model, two)
        u = initial_bump(g, 2.0, 0.6, 1.0)
        a, b = u, u
        for _ in range(200):
            a = step(base, a, lin1, 0.01, "linearized")
            b = step(split_model, b, lin2, 0.01, "linearized")
        assert np.allclose(a.values, b.values, rtol=1e-9, atol=1e-12)

    def test_supercritical_trivial_growth_matches_renewal_root(self):
        from helpers import decay_model
        model = decay_model(beta0=2.2, b=1.0, mu=0.7, s_max=25.0)
        g = build_grid(model.s_max, 1000)
        lin = build_linearization(model, trivial_steady(model, g))
        _, roots = scan_real_roots_K(lin, (0.0, 2.0), 100, 1e-11)
        assert len(roots) == 1
        rep = simulate(model, initial_bump(g, 2.0, 0.6, 1.0),
                       SimConfig(t_end=60.0, mode="linearized", record_every=20),
                       lin=lin)
        assert abs(rep.growth_rate - roots[0].root) <= max(0.05 * roots[0].root, 0.02)


class TestPositivity:
    def test_positive_semigroup_keeps_nonnegative_data_nonnegative(self):
        model = unstable_model()
        g = build_grid(model.s_max, 500)
        state = solve_steady(model, g, UNSTABLE_BRACKET, fp_tol=1e-9)
        lin = build_linearization(model, state)
        rng = np.random.default_rng(11)
        for _ in range(5):
            u0 = g.function(rng.uniform(0.0, 1.0, g.n_nodes))
            rep = simulate(model, u0, SimConfig(t_end=20.0, mode="linearized",
                                                record_every=10), lin=lin)
            floor = -1e-12 * float(np.max(np.abs(rep.final_profile.values)))
            assert np.min(rep.min_values) >= floor


@pytest.fixture(scope="module")
def aeg_run():
    model = unstable_model()
    g = build_grid(model.s_max, 600)
    state = solve_steady(model, g, UNSTABLE_BRACKET, fp_tol=1e-10)
    lin = build_linearization(model, state)
    rep = simulate(model, initial_bump(g, 2.0, 0.6, 1.0),
                   SimConfig(t_end=120.0, mode="linearized", record_every=25),
                   lin=lin)
    return model, g, lin, rep


class TestAegDiagnostic:
    def test_growing_run_detects_aeg(self, aeg_run):
        _, _, _, rep = aeg_run
        verdict = aeg_diagnostic(rep, tol=0.02)
        assert verdict.applicable
        assert verdict.aeg_detected
        assert verdict.limit_profile is not None
        assert integrate(verdict.limit_profile) == pytest.approx(1.0, abs=1e-12)

    def test_two_initial_conditions_share_the_limit_profile(self, aeg_run):
        model, g, lin, rep = aeg_run
        other = simulate(model, initial_bump(g, 6.0, 1.5, 0.4),
                         SimConfig(t_end=120.0, mode="linearized", record_every=25),
                         lin=lin)
        va = aeg_diagnostic(rep, tol=0.02)
        vb = aeg_diagnostic(other, tol=0.02)
        dist = float(g.weights @ np.abs(va.limit_profile.values - vb.limit_profile.values))
        assert dist < 2 * 0.02

    def test_decaying_run_is_not_applicable(self):
        model = transport_model(mu=0.5)
        g = build_grid(model.s_max, 200)
        rep = simulate(model, g.function(gaussian(2.0, 0.5)),
                       SimConfig(t_end=3.0, mode="nonlinear", record_every=10))
        verdict = aeg_diagnostic(rep, tol=0.02)
        assert not verdict.applicable
        assert not verdict.aeg_detected
