import numpy as np
import pytest

from stripflow import Bathymetry, PhysParams, StripGrid, build_diffeo
from stripflow import spectral
from stripflow.errors import DegenerateDepth
from stripflow.geometry import alinhac_unknown, check_nondegeneracy, sigma_grad
from stripflow.diagnostics import fit_rate


class TestPhysParams:
    def test_defaults_valid(self):
        p = PhysParams()
        assert p.growth_scale == max(p.eps, p.beta, p.delta / p.mu)

    @pytest.mark.parametrize(
        "kw", [dict(mu=0.0), dict(mu=1.5), dict(eps=1.2), dict(g=-1.0), dict(rho_bar=0.0)]
    )
    def test_rejects_bad_values(self, kw):
        with pytest.raises(ValueError):
            PhysParams(**kw)


class TestBathymetry:
    def test_presets(self, grid):
        for name in ("flat", "cosine", "gaussian"):
            b = Bathymetry.preset(grid, name, 0.2)
            assert b.values.shape == grid.xshape

    def test_from_file(self, grid, tmp_path):
        xs = np.linspace(0, grid.length, 200, endpoint=False)
        bs = 0.25 * np.cos(2 * np.pi * xs / grid.length)
        path = tmp_path / "bottom.txt"
        np.savetxt(path, np.column_stack([xs, bs]))
        b = Bathymetry.from_file(grid, path)
        assert np.allclose(b.values, 0.25 * np.cos(2 * np.pi * grid.x / grid.length), atol=1e-3)

    def test_unknown_preset(self, grid):
        with pytest.raises(ValueError):
            Bathymetry.preset(grid, "volcano")


class TestBuildDiffeo:
    def test_flat_configuration(self, flat_setup):
        grid, params, bath = flat_setup
        d = build_diffeo(bath, np.zeros(grid.xshape), params)
        assert np.allclose(d.eta_bar, grid.r[:, None])
        assert np.abs(d.eta).max() == 0.0
        assert np.allclose(d.h_tot, 1.0)

    def test_cosine_bottom_depth(self):
        grid = StripGrid(n_x=64, n_r=16)
        params = PhysParams(eps=0.0, beta=1.0, mu=0.1)
        bath = Bathymetry(grid, 0.3 * np.cos(2 * np.pi * grid.x / grid.length))
        d = build_diffeo(bath, np.zeros(grid.xshape), params)
        expect = 1.0 - 0.3 * np.cos(2 * np.pi * grid.x / grid.length)
        assert np.allclose(d.h_tot, expect, atol=1e-14)
        assert np.isclose(d.h_tot.min(), 0.7, atol=1e-12)

    def test_degenerate_depth(self, grid):
        params = PhysParams(eps=0.1, beta=1.0, mu=0.1)
        bath = Bathymetry(grid, np.full(grid.xshape, 1.2))
        with pytest.raises(DegenerateDepth):
            build_diffeo(bath, 0.01 * np.cos(grid.x), params)

    def test_depth_identity_everywhere(self, grid, params):
        bath = Bathymetry.cosine(grid, 0.3)
        e0 = 0.1 * np.cos(grid.x) - 0.05 * np.sin(3 * grid.x)
        d = build_diffeo(bath, e0, params)
        expect = 1.0 - params.beta * bath.values + params.eps * e0
        assert np.abs(d.h_tot - expect).max() < 1e-15
        # h_bar + eps h at every node (h is r-independent for this profile)
        assert np.abs(d.h_bar + params.eps * d.h - expect).max() < 1e-15


class TestSigmaGrad:
    def test_flat_is_plain_gradient(self, flat_setup, rng):
        grid, params, bath = flat_setup
        d = build_diffeo(bath, np.zeros(grid.xshape), params)
        f = np.sin(grid.x)[None, :] * np.cos(grid.r)[:, None]
        gx, gr = sigma_grad(f, d)
        assert np.allclose(gx[0], np.cos(grid.x)[None, :] * np.cos(grid.r)[:, None], atol=1e-11)
        assert np.allclose(gr, -np.sin(grid.r)[:, None] * np.sin(grid.x)[None, :], atol=1e-5)

    def test_linear_vertical_coordinate(self, grid, params):
        # f = height function: grad_phi f = 0 and dr_phi f = 1 exactly
        bath = Bathymetry.cosine(grid, 0.3)
        d = build_diffeo(bath, 0.1 * np.cos(grid.x), params)
        f = d.eta_bar + params.eps * d.eta
        gx, gr = sigma_grad(f, d)
        assert np.abs(gx).max() < 1e-12
        assert np.abs(gr - 1.0).max() < 1e-12

    def test_pullback_identity_under_refinement(self, params):
        # sigma_grad of F(x, z(x,r)) matches (grad F)(x, z(x,r))
        errs = []
        for n_r in (16, 32):
            grid = StripGrid(n_x=64, n_r=n_r)
            bath = Bathymetry.cosine(grid, 0.3)
            d = build_diffeo(bath, 0.1 * np.cos(grid.x), params)
            z = d.z_nodes()
            x = np.broadcast_to(grid.x, z.shape)
            f = np.sin(x) * np.cos(2.0 * z)
            gx, gr = sigma_grad(f, d)
            ex = np.cos(x) * np.cos(2.0 * z)
            er = -2.0 * np.sin(x) * np.sin(2.0 * z)
            errs.append(max(np.abs(gx[0] - ex).max(), np.abs(gr - er).max()))
        assert np.log2(errs[0] / errs[1]) > 3.5


class TestAlinhac:
    def test_flat_reduces_to_multiplier(self, flat_setup, rng):
        grid, params, bath = flat_setup
        d = build_diffeo(bath, np.zeros(grid.xshape), params)
        f = np.sin(2 * grid.x)[None, :] * grid.r[:, None]
        got = alinhac_unknown(f, 3.0, d)
        assert np.allclose(got, spectral.lambda_pow(grid, f, 3.0, dotted=True), atol=1e-12)

    def test_r_independent_field(self, grid, params):
        bath = Bathymetry.cosine(grid, 0.3)
        d = build_diffeo(bath, 0.1 * np.cos(grid.x), params)
        f = np.broadcast_to(np.sin(grid.x), (grid.n_r + 1,) + grid.xshape).copy()
        got = alinhac_unknown(f, 3.0, d)
        assert np.allclose(got, spectral.lambda_pow(grid, f, 3.0, dotted=True), atol=1e-12)

    def test_single_mode_against_direct_assembly(self, grid):
        params = PhysParams(eps=0.4, beta=0.0, mu=0.1)
        bath = Bathymetry.flat(grid)
        e0 = 0.2 * np.cos(grid.x)
        d = build_diffeo(bath, e0, params)
        f = np.sin(grid.x)[None, :] * grid.r[:, None]
        s = 2.0
        # direct term-by-term assembly for the single-mode metric
        sigma = grid.r[:, None] * 1.0 + params.eps * (1 + grid.r)[:, None] * e0[None, :]
        lam_sigma = params.eps * (1 + grid.r)[:, None] * spectral.lambda_pow(grid, e0, s, dotted=True)
        h_tot = 1.0 + params.eps * e0
        drf = np.sin(grid.x)[None, :] * np.ones_like(grid.r)[:, None]
        expect = spectral.lambda_pow(grid, f, s, dotted=True) - lam_sigma / h_tot * drf
        assert np.allclose(alinhac_unknown(f, s, d), expect, atol=1e-11)

    def test_commutator_smallness_slope(self):
        grid = StripGrid(n_x=64, n_r=32)
        s = 4.0
        bshape = np.cos(grid.x) + 0.4 * np.sin(2 * grid.x)
        e0shape = np.cos(grid.x) - 0.3 * np.cos(3 * grid.x)
        R = grid.r[:, None]
        f = np.sin(grid.x)[None, :] * R + 0.3 * np.cos(2 * grid.x)[None, :] * np.cos(np.pi * R / 2)
        samples = []
        for t in (1e-1, 1e-2, 1e-3, 1e-4):
            params = PhysParams(eps=t, beta=t, mu=0.1)
            d = build_diffeo(Bathymetry(grid, bshape), e0shape, params)
            gx, gr = d.ops.grad_phi(f), d.ops.dr_phi(f)
            fs = alinhac_unknown(f, s, d)
            rx = spectral.lambda_pow(grid, gx[0], s, dotted=True) - d.ops.grad_phi(fs)[0]
            rr = spectral.lambda_pow(grid, gr, s, dotted=True) - d.ops.dr_phi(fs)
            samples.append((t, np.sqrt(spectral.l2_strip(grid, rx) ** 2 + spectral.l2_strip(grid, rr) ** 2)))
        fit = fit_rate(samples)
        assert 0.9 <= fit.slope <= 1.1


class TestNondegeneracy:
    def test_rest_passes(self, flat_setup):
        grid, params, bath = flat_setup
        d = build_diffeo(bath, np.zeros(grid.xshape), params)
        rep = check_nondegeneracy(np.zeros((grid.n_r + 1,) + grid.xshape), d, params)
        assert rep["depth_ok"] and rep["density_ok"]
        assert rep["min_depth"] == 1.0 and rep["min_density"] == params.rho_bar

    def test_density_cancellation_flagged(self, grid):
        params = PhysParams(eps=0.5, beta=0.0, mu=0.1, delta=0.5)
        bath = Bathymetry.flat(grid)
        d = build_diffeo(bath, np.zeros(grid.xshape), params)
        rho = np.full((grid.n_r + 1,) + grid.xshape, -params.rho_bar / (params.eps * params.delta))
        rep = check_nondegeneracy(rho, d, params)
        assert not rep["density_ok"]
        assert rep["min_density"] <= 0.0

    def test_trough_over_bump_depth_scan(self, grid):
        # aligned bump and trough: the pointwise depth minimum drives the flag
        params = PhysParams(eps=1.0, beta=1.0, mu=0.1)
        bump = 0.25 * (1 + np.cos(grid.x))
        trough = -0.45 * 0.5 * (1 + np.cos(grid.x))
        bath = Bathymetry(grid, bump)
        d = build_diffeo(bath, trough, params)
        depth = 1.0 - bump + trough
        assert np.isclose(d.h_tot.min(), depth.min())
        rep = check_nondegeneracy(np.zeros((grid.n_r + 1,) + grid.xshape), d, params)
        assert depth.min() < params.h_min
        assert not rep["depth_ok"]
        # shifting the trough away from the bump restores the margin
        shifted = np.roll(trough, grid.n_x // 2)
        d2 = build_diffeo(bath, shifted, params)
        rep2 = check_nondegeneracy(np.zeros((grid.n_r + 1,) + grid.xshape), d2, params)
        assert rep2["depth_ok"]
