import numpy as np
import pytest

from stripflow import Bathymetry, PhysParams, StripGrid, build_diffeo
from stripflow import spectral
from stripflow.diagnostics import (
    blowup_monitor,
    energy,
    equivalence_checks,
    fit_rate,
    gronwall_slope,
    state_norm,
)
from stripflow.dynamics import StripState, solve_state_pressure
from stripflow.pressure import TaylorCoefficient, taylor_coefficient
from stripflow.runner import measure, simulate

from conftest import random_band_limited


def report_for(state, bath, params, s=4.0, s0=2.0):
    diffeo = build_diffeo(bath, state.eta0, params)
    P = solve_state_pressure(state, diffeo, params)
    taylor = taylor_coefficient(P, diffeo, params)
    return energy(state, taylor, s, s0, params, diffeo), diffeo


class TestEnergy:
    def test_rest_energy_is_zero(self, grid):
        params = PhysParams(eps=0.3, beta=0.5, mu=1e-2)
        bath = Bathymetry.cosine(grid, 0.3)
        rep, _ = report_for(StripState.rest(grid), bath, params)
        assert rep.E_s == 0.0
        assert rep.E_low == 0.0
        assert rep.taylor_min == pytest.approx(params.g * params.rho_bar)

    def test_single_mode_closed_form(self, grid):
        # rest + one surface mode: E = g rho_bar pi a^2 (1+k^2)^{s0+1}
        #                              + g rho_bar pi a^2 k^2 (1+k^2)^{s-1}
        params = PhysParams(eps=0.0, beta=0.0, mu=1e-2, g=1.2, rho_bar=1.1)
        bath = Bathymetry.flat(grid)
        st = StripState.rest(grid)
        a, k = 0.04, 1.0
        st.eta0 = a * np.cos(k * grid.x)
        s, s0 = 4.0, 2.0
        rep, _ = report_for(st, bath, params, s, s0)
        grav = params.g * params.rho_bar
        low = grav * np.pi * a**2 * (1 + k**2) ** (s0 + 1)
        surf = grav * np.pi * a**2 * k**2 * (1 + k**2) ** (s - 1)
        assert np.isclose(rep.E_low, low, rtol=1e-10)
        assert np.isclose(rep.surface_term, surf, rtol=1e-10)
        assert np.isclose(rep.E_s, low + surf, rtol=1e-10)

    def test_two_sided_equivalence_scan(self, fine_grid, rng):
        # E_s is squeezed between multiples of the squared norm package
        grid = fine_grid
        params = PhysParams(eps=0.3, beta=0.3, mu=0.04, delta=0.04)
        bath = Bathymetry.cosine(grid, 0.2)
        ratios = []
        for _ in range(20):
            st = StripState.rest(grid)
            st.eta0 = 0.05 * np.cos(grid.x) + 0.02 * np.sin(2 * grid.x)
            st.V[0] = random_band_limited(grid, rng, amp=0.3)
            st.w = random_band_limited(grid, rng, amp=0.3)
            st.rho = random_band_limited(grid, rng, amp=0.3)
            rep, diffeo = report_for(st, bath, params)
            from stripflow.dynamics import vorticity
            from stripflow.diagnostics import vorticity_norm

            sq = params.sqrt_mu
            pack = (
                spectral.stack_norm(grid, [st.V[0], sq * st.w, sq * st.rho], 4.0) ** 2
                + vorticity_norm(grid, vorticity(st, diffeo, params), 3.0) ** 2
                + spectral.surface_norm(grid, st.eta0, 4.0) ** 2
            )
            ratios.append(rep.E_s / pack)
        assert max(ratios) / min(ratios) < 50.0
        assert min(ratios) > 0.0

    def test_continuity_in_state(self, grid, rng):
        params = PhysParams(eps=0.3, beta=0.3, mu=0.04)
        bath = Bathymetry.cosine(grid, 0.2)
        st = StripState.rest(grid)
        st.eta0 = 0.05 * np.cos(grid.x)
        st.V[0] = random_band_limited(grid, rng, amp=0.2)
        rep0, _ = report_for(st, bath, params)
        direction = random_band_limited(grid, rng)
        eps_fd = 1e-6
        st2 = st.copy()
        st2.V[0] = st.V[0] + eps_fd * direction
        rep1, _ = report_for(st2, bath, params)
        # first-order change is bounded by the perturbation's norm scale
        bound = 20.0 * eps_fd * spectral.field_norm(grid, direction, 4.0) * np.sqrt(rep0.E_s)
        assert abs(rep1.E_s - rep0.E_s) < bound


class TestEquivalenceChecks:
    def test_rest_passes(self, grid):
        params = PhysParams(eps=0.3, beta=0.5, mu=1e-2)
        bath = Bathymetry.cosine(grid, 0.3)
        rep, _ = report_for(StripState.rest(grid), bath, params)
        out = equivalence_checks(rep, reference=rep)
        assert out["ok"]

    def test_columnar_lift_has_zero_shear(self, grid):
        from stripflow.experiments import sw_initial
        from stripflow.shallow import lift_sw

        params = PhysParams(eps=0.3, beta=0.3, mu=1e-2)
        bath = Bathymetry.cosine(grid, 0.2)
        st = lift_sw(sw_initial(grid, 0.05, 0.05), bath, params)
        rep, _ = report_for(st, bath, params)
        assert rep.shear_ratio < 1e-10

    def test_ratio_monitoring_flags_growth(self, grid):
        params = PhysParams(eps=0.3, beta=0.5, mu=1e-2)
        bath = Bathymetry.cosine(grid, 0.3)
        st = StripState.rest(grid)
        st.eta0 = 0.05 * np.cos(grid.x)
        rep, _ = report_for(st, bath, params)
        inflated = type(rep)(**{**rep.__dict__, "shear_ratio": 100.0})
        out = equivalence_checks(inflated, reference=rep)
        assert not out["ok"]
        assert not out["flags"]["shear"]


class TestBlowupMonitor:
    def _setup(self, grid):
        params = PhysParams(eps=0.3, beta=0.3, mu=1e-2, c_star=0.2)
        bath = Bathymetry.cosine(grid, 0.2)
        st = StripState.rest(grid)
        st.eta0 = 0.05 * np.cos(grid.x)
        rep, diffeo = report_for(st, bath, params)
        return params, st, rep, diffeo

    def test_healthy_run_continues(self, grid):
        params, st, rep, diffeo = self._setup(grid)
        assert blowup_monitor(st, rep, rep.state_norm, params, diffeo) == "Continue"

    def test_taylor_degenerate(self, grid):
        params, st, rep, diffeo = self._setup(grid)
        bad = type(rep)(**{**rep.__dict__, "taylor_min": 0.01})
        assert blowup_monitor(st, bad, rep.state_norm, params, diffeo) == "TaylorDegenerate"

    def test_taylor_degenerate_from_synthetic_pressure(self, grid):
        # a synthetic pressure with a strong vertical gradient drives the
        # surface coefficient below half its floor
        params, st, rep, diffeo = self._setup(grid)
        P = 40.0 * np.broadcast_to(grid.r[:, None], (grid.n_r + 1,) + grid.xshape)
        a = taylor_coefficient(P, diffeo, params)
        bad = type(rep)(**{**rep.__dict__, "taylor_min": a.minimum})
        assert a.minimum < 0.5 * params.c_star
        assert blowup_monitor(st, bad, rep.state_norm, params, diffeo) == "TaylorDegenerate"

    def test_norm_spike(self, grid):
        params, st, rep, diffeo = self._setup(grid)
        spiked = type(rep)(**{**rep.__dict__, "state_norm": 20.0 * rep.state_norm})
        assert blowup_monitor(st, spiked, rep.state_norm, params, diffeo) == "NormBlowup"


class TestFitRate:
    def test_exact_sqrt(self):
        fit = fit_rate([(m, np.sqrt(m)) for m in (1e-1, 1e-2, 1e-3, 1e-4)])
        assert np.isclose(fit.slope, 0.5, atol=1e-12)
        assert not fit.degenerate

    def test_exact_linear(self):
        fit = fit_rate([(m, m) for m in (1e-1, 1e-2, 1e-3, 1e-4)])
        assert np.isclose(fit.slope, 1.0, atol=1e-12)

    def test_noise_floor_flagged(self):
        fit = fit_rate([(1e-1, 1e-14), (1e-2, 1e-14), (1e-4, 1e-15)])
        assert fit.degenerate

    def test_insufficient_samples(self):
        with pytest.raises(ValueError):
            fit_rate([(1e-1, 1.0), (1e-2, 0.3)])

    def test_insufficient_span(self):
        with pytest.raises(ValueError):
            fit_rate([(1e-1, 1.0), (5e-2, 0.7), (2e-2, 0.5)])


class TestGronwall:
    def test_synthetic_exponential(self):
        times = np.linspace(0, 2, 50)
        K = 0.7
        energies = np.exp(K * times)
        assert np.isclose(gronwall_slope(times, energies), K, rtol=1e-6)

    def test_needs_positive_initial(self):
        with pytest.raises(ValueError):
            gronwall_slope([0.0, 1.0], [0.0, 1.0])
