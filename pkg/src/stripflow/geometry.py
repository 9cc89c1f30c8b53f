"""Physical parameters, bathymetry, the sigma-coordinate map of the strip
onto the fluid domain, the transformed differential operators, and the
good-unknown correction used by the high-order diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import spectral
from .errors import DegenerateDensity, DegenerateDepth
from .grid import StripGrid


@dataclass(frozen=True)
class PhysParams:
    """Non-dimensional parameter tuple governing every equation."""

    eps: float = 0.5
    beta: float = 0.5
    mu: float = 1e-2
    delta: float = 0.0
    g: float = 1.0
    rho_bar: float = 1.0
    # admissible-depth window (the analysis never pins these; config-exposed)
    h_min: float = 0.1
    h_max: float = 10.0
    c_star: float = 0.1

    def __post_init__(self):
        if not (0.0 <= self.eps <= 1.0 and 0.0 <= self.beta <= 1.0 and 0.0 <= self.delta <= 1.0):
            raise ValueError("eps, beta, delta must lie in [0, 1]")
        if not (0.0 < self.mu <= 1.0):
            raise ValueError("mu must lie in (0, 1]")
        if self.g <= 0 or self.rho_bar <= 0:
            raise ValueError("g and rho_bar must be positive")

    @property
    def sqrt_mu(self) -> float:
        return float(np.sqrt(self.mu))

    @property
    def growth_scale(self) -> float:
        """eps v beta v delta/mu, the slope scale of the energy growth."""
        return max(self.eps, self.beta, self.delta / self.mu)


# -- bathymetry ------------------------------------------------------------------


@dataclass(frozen=True)
class Bathymetry:
    """Dimensionless bottom shape b(x); the physical bottom is -1 + beta b."""

    grid: StripGrid
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.grid.xshape:
            raise ValueError("bathymetry sampled off-grid")

    @cached_property
    def gradient(self) -> np.ndarray:
        return spectral.dx(self.grid, self.values)

    @classmethod
    def flat(cls, grid: StripGrid) -> "Bathymetry":
        return cls(grid, np.zeros(grid.xshape))

    @classmethod
    def cosine(cls, grid: StripGrid, amplitude: float = 0.3, mode: int = 1) -> "Bathymetry":
        phase = 2.0 * np.pi * mode * grid.x / grid.length
        vals = amplitude * np.cos(phase)
        if grid.d == 2:
            vals = vals[:, None] * np.cos(phase)[None, :]
        return cls(grid, vals)

    @classmethod
    def gaussian_ridge(cls, grid: StripGrid, amplitude: float = 0.3, width: float = 0.1) -> "Bathymetry":
        xc = 0.5 * grid.length
        prof = amplitude * np.exp(-((grid.x - xc) ** 2) / (2.0 * (width * grid.length) ** 2))
        prof = prof - prof.mean()
        if grid.d == 2:
            prof = prof[:, None] + prof[None, :]
        return cls(grid, prof)

    @classmethod
    def from_file(cls, grid: StripGrid, path) -> "Bathymetry":
        """Columnar text file with x and b samples, interpolated periodically."""
        data = np.loadtxt(path)
        if data.ndim != 2 or data.shape[1] < 2:
            raise ValueError("bathymetry file needs two columns (x, b)")
        xs, bs = data[:, 0], data[:, 1]
        order = np.argsort(xs)
        xs, bs = xs[order], bs[order]
        xq = np.concatenate([xs - grid.length, xs, xs + grid.length])
        bq = np.tile(bs, 3)
        vals = np.interp(grid.x, xq, bq)
        if grid.d == 2:
            vals = np.broadcast_to(vals[:, None], grid.xshape).copy()
        return cls(grid, vals)

    @classmethod
    def preset(cls, grid: StripGrid, name: str, amplitude: float = 0.3) -> "Bathymetry":
        if name == "flat":
            return cls.flat(grid)
        if name == "cosine":
            return cls.cosine(grid, amplitude)
        if name == "gaussian":
            return cls.gaussian_ridge(grid, amplitude)
        raise ValueError(f"unknown bathymetry preset {name!r}")


# -- sigma-coordinate operators ----------------------------------------------------


@dataclass(frozen=True)
class SigmaOps:
    """Transformed derivatives for a vertical map with slope field kappa and
    inverse layer thickness gamma:

        grad_phi f = grad f - kappa * d_r f,      dr_phi f = gamma * d_r f.

    kappa carries a leading component axis; both broadcast over strip fields.
    """

    grid: StripGrid
    kappa: np.ndarray
    gamma: np.ndarray

    def grad_phi(self, f: np.ndarray) -> np.ndarray:
        return spectral.dx(self.grid, f) - self.kappa * spectral.dr(self.grid, f)

    def dr_phi(self, f: np.ndarray) -> np.ndarray:
        return self.gamma * spectral.dr(self.grid, f)

    def div_phi(self, F_x: np.ndarray, F_r: np.ndarray) -> np.ndarray:
        """grad_phi . F_x + dr_phi F_r."""
        out = self.gamma * spectral.dr(self.grid, F_r)
        for i in range(self.grid.d):
            out = out + spectral.dx(self.grid, F_x[i])[i] - self.kappa[i] * spectral.dr(self.grid, F_x[i])
        return out

    def advect(self, V: np.ndarray, w: np.ndarray, f: np.ndarray) -> np.ndarray:
        """Dealiased V . grad_phi f + w dr_phi f."""
        gx = self.grad_phi(f)
        out = spectral.quadratic(self.grid, w, self.dr_phi(f))
        for i in range(self.grid.d):
            out = out + spectral.quadratic(self.grid, V[i], gx[i])
        return out


# -- the barycentric-profile diffeomorphism ------------------------------------------


@dataclass(frozen=True)
class DiffeoFields:
    """Metric data of the map (x, r) -> (x, eta_bar + eps*eta) with the
    linear-in-r profiles eta_bar = r(1 - beta b), eta = (1+r) eta0."""

    grid: StripGrid
    params: PhysParams
    bathymetry: Bathymetry
    eta0: np.ndarray
    dt_eta0: np.ndarray | None = None

    @cached_property
    def eta_bar(self) -> np.ndarray:
        r = self.grid.r_column(self.grid.r)
        return r * (1.0 - self.params.beta * self.bathymetry.values)

    @cached_property
    def eta(self) -> np.ndarray:
        r = self.grid.r_column(self.grid.r)
        return (1.0 + r) * self.eta0

    @cached_property
    def h_bar(self) -> np.ndarray:
        return 1.0 - self.params.beta * self.bathymetry.values

    @property
    def h(self) -> np.ndarray:
        return self.eta0

    @cached_property
    def h_tot(self) -> np.ndarray:
        """h_bar + eps h = 1 - beta b + eps eta0 (r-independent)."""
        return self.h_bar + self.params.eps * self.eta0

    @cached_property
    def grad_sum(self) -> np.ndarray:
        """Horizontal gradient of eta_bar + eps eta (components leading)."""
        r = self.grid.r_column(self.grid.r)
        gb = -self.params.beta * self.bathymetry.gradient
        g0 = self.params.eps * spectral.dx(self.grid, self.eta0)
        return r[None] * gb[:, None] + (1.0 + r)[None] * g0[:, None]

    @cached_property
    def surface_gradient(self) -> np.ndarray:
        return self.params.eps * spectral.dx(self.grid, self.eta0)

    @cached_property
    def bottom_gradient(self) -> np.ndarray:
        return self.params.beta * self.bathymetry.gradient

    @cached_property
    def ops(self) -> SigmaOps:
        return SigmaOps(self.grid, self.grad_sum / self.h_tot, 1.0 / self.h_tot)

    def z_nodes(self) -> np.ndarray:
        """Physical heights of the grid nodes, eta_bar + eps*eta."""
        return self.eta_bar + self.params.eps * self.eta

    def time_shifted(self, eta0: np.ndarray, dt_eta0: np.ndarray | None = None) -> "DiffeoFields":
        return DiffeoFields(self.grid, self.params, self.bathymetry, eta0, dt_eta0)


def build_diffeo(
    bathymetry: Bathymetry,
    eta0: np.ndarray,
    params: PhysParams,
    dt_eta0: np.ndarray | None = None,
) -> DiffeoFields:
    """Assemble the metric fields and enforce the depth window."""
    grid = bathymetry.grid
    if eta0.shape != grid.xshape:
        raise ValueError("surface field sampled off-grid")
    depth = 1.0 - params.beta * bathymetry.values + params.eps * eta0
    if depth.min() <= 0.0:
        raise DegenerateDepth(f"min depth {depth.min():.3e} <= 0")
    return DiffeoFields(grid, params, bathymetry, eta0, dt_eta0)


def sigma_grad(f: np.ndarray, diffeo: DiffeoFields) -> tuple[np.ndarray, np.ndarray]:
    """(grad_phi f, dr_phi f) with spectral x-derivatives and 4th-order
    vertical differences."""
    return diffeo.ops.grad_phi(f), diffeo.ops.dr_phi(f)


def alinhac_unknown(f: np.ndarray, s: float, diffeo: DiffeoFields) -> np.ndarray:
    """Good unknown f^(s): the dotted multiplier of order s applied to f,
    corrected by the metric so high-order derivatives commute with grad_phi
    up to O(eps v beta) remainders."""
    grid = diffeo.grid
    sigma = diffeo.eta_bar + diffeo.params.eps * diffeo.eta
    correction = spectral.lambda_pow(grid, sigma, s, dotted=True) / diffeo.h_tot
    return spectral.lambda_pow(grid, f, s, dotted=True) - correction * spectral.dr(grid, f)


def check_nondegeneracy(rho: np.ndarray, diffeo: DiffeoFields, params: PhysParams) -> dict:
    """Report minima of depth and density against the standing hypotheses."""
    depth = diffeo.h_tot
    density = params.rho_bar + params.eps * params.delta * rho
    report = {
        "min_depth": float(depth.min()),
        "max_depth": float(depth.max()),
        "min_density": float(density.min()),
        "depth_ok": bool(params.h_min <= depth.min() and depth.max() <= params.h_max),
        "density_ok": bool(density.min() >= params.c_star),
    }
    return report


def require_nondegenerate(rho: np.ndarray, diffeo: DiffeoFields, params: PhysParams):
    rep = check_nondegeneracy(rho, diffeo, params)
    if rep["min_depth"] <= 0.0:
        raise DegenerateDepth(f"min depth {rep['min_depth']:.3e}")
    if rep["min_density"] <= 0.0:
        raise DegenerateDensity(f"min density {rep['min_density']:.3e}")
    return rep
