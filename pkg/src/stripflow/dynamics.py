"""Prognostic core: tendencies for (V, w, rho, eta0) in sigma coordinates,
vorticity and its density source, RK4 stepping, and the divergence projection.

The pressure right-hand side is assembled from the non-pressure tendencies
(plus the time derivative of the metric coefficients, which is known before
the solve because the kinematic surface equation does not involve P), so that
the combined tendency keeps the discrete divergence and the bottom
impermeability stationary.  The projection then only removes time-integration
drift.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import spectral
from .errors import BlowUpSuspected, CFLViolation, InvalidStreamfunction
from .geometry import (
    Bathymetry,
    DiffeoFields,
    PhysParams,
    build_diffeo,
    require_nondegenerate,
)
from .grid import StripGrid
from .pressure import EllipticProblem, SolveInfo, solve_pressure


@dataclass
class StripState:
    """Prognostic fields on the strip; V carries a leading component axis."""

    V: np.ndarray
    w: np.ndarray
    rho: np.ndarray
    eta0: np.ndarray
    t: float = 0.0

    @classmethod
    def rest(cls, grid: StripGrid) -> "StripState":
        shape = (grid.n_r + 1,) + grid.xshape
        return cls(
            V=np.zeros((grid.d,) + shape),
            w=np.zeros(shape),
            rho=np.zeros(shape),
            eta0=np.zeros(grid.xshape),
        )

    def copy(self) -> "StripState":
        return StripState(self.V.copy(), self.w.copy(), self.rho.copy(), self.eta0.copy(), self.t)

    def shifted(self, tend: "Tendencies", dt: float) -> "StripState":
        return StripState(
            self.V + dt * tend.dV,
            self.w + dt * tend.dw,
            self.rho + dt * tend.drho,
            self.eta0 + dt * tend.deta0,
            self.t + dt,
        )

    def max_speed(self) -> tuple[float, float]:
        return float(np.abs(self.V).max()), float(np.abs(self.w).max())


@dataclass
class Tendencies:
    dV: np.ndarray
    dw: np.ndarray
    drho: np.ndarray
    deta0: np.ndarray
    P: np.ndarray
    diffeo: DiffeoFields
    solve_info: SolveInfo


@dataclass
class VorticityField:
    """Scaled curl; omega_x is scalar for d = 1, two components for d = 2;
    omega_r only exists for d = 2."""

    omega_x: np.ndarray
    omega_r: np.ndarray | None = None


def kinematic_deta0(state: StripState, grid: StripGrid, params: PhysParams) -> np.ndarray:
    """d_t eta0 = -eps V|_{r=0} . grad eta0 + w|_{r=0}."""
    g0 = spectral.dx(grid, state.eta0)
    out = state.w[-1].copy()
    for i in range(grid.d):
        out -= params.eps * spectral.quadratic(grid, state.V[i, -1], g0[i])
    return out


def _nu(state: StripState, params: PhysParams) -> np.ndarray:
    return 1.0 / (params.rho_bar + params.eps * params.delta * state.rho)


def assemble_pressure_problem(
    state: StripState, diffeo: DiffeoFields, params: PhysParams, with_R: bool = False
) -> tuple[EllipticProblem, dict]:
    """Elliptic problem for P plus the non-pressure tendencies it was built
    from (returned so the caller completes the momentum update without
    re-deriving them)."""
    grid = diffeo.grid
    require_nondegenerate(state.rho, diffeo, params)
    ops = diffeo.ops
    mu, eps = params.mu, params.eps
    nu = _nu(state, params)

    deta0 = kinematic_deta0(state, grid, params)

    # d_t of the coordinate map: eta has the fixed (1+r) eta0 profile.
    rp1 = grid.r_column(grid.r + 1.0)
    dt_eta = rp1 * deta0
    tcorr = eps * dt_eta / diffeo.h_tot

    grad_eta0 = spectral.dx(grid, state.eta0)

    B_V = np.empty_like(state.V)
    for i in range(grid.d):
        B_V[i] = (
            -eps * ops.advect(state.V, state.w, state.V[i])
            - params.g * params.rho_bar * spectral.quadratic(grid, nu, grad_eta0[i])
            + spectral.quadratic(grid, tcorr, spectral.dr(grid, state.V[i]))
        )
    B_w = (
        -eps * ops.advect(state.V, state.w, state.w)
        - (params.g * params.delta / mu) * spectral.quadratic(grid, nu, state.rho)
        + spectral.quadratic(grid, tcorr, spectral.dr(grid, state.w))
    )
    drho = -eps * ops.advect(state.V, state.w, state.rho) + spectral.quadratic(
        grid, tcorr, spectral.dr(grid, state.rho)
    )

    # time derivative of the metric coefficients entering the divergence
    grad_deta0 = spectral.dx(grid, deta0)
    h = diffeo.h_tot
    kappa_dot = (eps * rp1[None] * grad_deta0[:, None] - diffeo.ops.kappa * (eps * deta0)) / h
    gamma_dot = -eps * deta0 / h**2
    metric_term = gamma_dot * spectral.dr(grid, state.w)
    for i in range(grid.d):
        metric_term -= kappa_dot[i] * spectral.dr(grid, state.V[i])

    source = mu * (ops.div_phi(B_V, B_w) + metric_term)
    bottom = mu * (B_w[0] - np.sum(diffeo.bottom_gradient * B_V[:, 0], axis=0))

    # divergence-form source vector, for inspection and entry-wise tests:
    # R = (sqrt(mu) h G_V ; mu G_w - mu grad_sigma . G_V) with G the
    # d_t^phi-form tendencies (no metric-motion correction)
    R = None
    if with_R:
        G_V = np.stack(
            [B_V[i] - spectral.quadratic(grid, tcorr, spectral.dr(grid, state.V[i])) for i in range(grid.d)]
        )
        G_w = B_w - spectral.quadratic(grid, tcorr, spectral.dr(grid, state.w))
        R = np.concatenate(
            [
                np.sqrt(mu) * h * G_V,
                (mu * G_w - mu * np.sum(diffeo.grad_sum * G_V, axis=0))[None],
            ],
            axis=0,
        )

    problem = EllipticProblem(
        grid=grid,
        ops=ops,
        mu=mu,
        rho_bar=params.rho_bar,
        nu=nu,
        h_tot=np.broadcast_to(h, (grid.n_r + 1,) + grid.xshape),
        grad_sum=diffeo.grad_sum,
        bottom_slope=diffeo.bottom_gradient,
        source=source,
        bottom_data=bottom,
        R=R,
    )
    aux = {"B_V": B_V, "B_w": B_w, "drho": drho, "deta0": deta0, "nu": nu}
    return problem, aux


def solve_state_pressure(
    state: StripState, diffeo: DiffeoFields, params: PhysParams, info: SolveInfo | None = None
) -> np.ndarray:
    """Pressure of the given state (used standalone by the diagnostics)."""
    problem, _ = assemble_pressure_problem(state, diffeo, params)
    return solve_pressure(problem, info=info)


def euler_rhs(state: StripState, bathymetry: Bathymetry, params: PhysParams) -> Tendencies:
    """Full tendencies; solves the pressure problem as part of the evaluation."""
    diffeo = build_diffeo(bathymetry, state.eta0, params)
    problem, aux = assemble_pressure_problem(state, diffeo, params)
    info = SolveInfo(0, 0.0)
    P = solve_pressure(problem, info=info)

    ops = diffeo.ops
    nu = aux["nu"]
    gradP = ops.grad_phi(P)
    dV = np.stack([aux["B_V"][i] - nu * gradP[i] for i in range(diffeo.grid.d)])
    dw = aux["B_w"] - nu * ops.dr_phi(P) / params.mu

    checks = (
        float(np.abs(dV).max()) + float(np.abs(dw).max())
        + float(np.abs(aux["drho"]).max()) + float(np.abs(aux["deta0"]).max())
    )
    if not np.isfinite(checks):
        raise BlowUpSuspected("non-finite tendency")
    return Tendencies(dV, dw, aux["drho"], aux["deta0"], P, diffeo, info)


def divergence_report(state: StripState, bathymetry: Bathymetry, params: PhysParams) -> dict:
    """Constraint residuals.  The interior collocation rows are the ones the
    pressure construction and the projection control (solver tolerance); the
    two boundary rows carry the elliptic closure truncation, which accumulates
    at O(dr^4) per unit time and is reported separately."""
    diffeo = build_diffeo(bathymetry, state.eta0, params)
    grid = diffeo.grid
    div = diffeo.ops.div_phi(state.V, state.w)
    bottom = state.w[0] - np.sum(diffeo.bottom_gradient * state.V[:, 0], axis=0)
    scale = spectral.l2_strip(grid, state.V[0]) + spectral.l2_strip(
        grid, np.sqrt(params.mu) * state.w
    )
    for i in range(1, grid.d):
        scale += spectral.l2_strip(grid, state.V[i])
    scale = max(scale, 1e-30)
    interior = float(np.abs(div[1:-1]).max())
    return {
        "div_l2": spectral.l2_strip(grid, div),
        "div_rel": spectral.l2_strip(grid, div) / scale,
        "div_interior_linf": interior,
        "div_interior_rel": interior / scale,
        "bottom_linf": float(np.abs(bottom).max()),
        "scale": scale,
    }


def project_divergence_free(
    state: StripState, bathymetry: Bathymetry, params: PhysParams, rtol: float = 1e-12
) -> StripState:
    """Remove the discrete divergence and restore bottom impermeability by an
    auxiliary solve with the pressure operator (Dirichlet top)."""
    diffeo = build_diffeo(bathymetry, state.eta0, params)
    grid = diffeo.grid
    ops = diffeo.ops
    nu = _nu(state, params)
    div = ops.div_phi(state.V, state.w)
    bottom = state.w[0] - np.sum(diffeo.bottom_gradient * state.V[:, 0], axis=0)
    problem = EllipticProblem(
        grid=grid,
        ops=ops,
        mu=params.mu,
        rho_bar=params.rho_bar,
        nu=nu,
        h_tot=np.broadcast_to(diffeo.h_tot, (grid.n_r + 1,) + grid.xshape),
        grad_sum=diffeo.grad_sum,
        bottom_slope=diffeo.bottom_gradient,
        source=params.mu * div,
        bottom_data=params.mu * bottom,
    )
    chi = solve_pressure(problem, rtol=rtol)
    gradchi = ops.grad_phi(chi)
    V = np.stack([state.V[i] - nu * gradchi[i] for i in range(grid.d)])
    w = state.w - nu * ops.dr_phi(chi) / params.mu
    return StripState(V, w, state.rho.copy(), state.eta0.copy(), state.t)


def cfl_dt(state: StripState, bathymetry: Bathymetry, params: PhysParams, factor: float = 0.4) -> float:
    """Advective/gravity-wave step bound."""
    grid = bathymetry.grid
    depth = 1.0 - params.beta * bathymetry.values + params.eps * state.eta0
    vmax, wmax = state.max_speed()
    cx = np.sqrt(params.g * depth.max()) + params.eps * vmax
    dt_x = grid.dx / cx
    dt_r = grid.dr * depth.min() / (params.eps * wmax + 1e-30)
    return factor * min(dt_x, dt_r)


def step_rk4(
    state: StripState,
    dt: float,
    bathymetry: Bathymetry,
    params: PhysParams,
    project: bool = True,
    enforce_cfl: bool = True,
) -> StripState:
    """Classical four-stage step followed by the divergence projection."""
    if enforce_cfl:
        limit = cfl_dt(state, bathymetry, params, factor=0.5)
        if dt > limit:
            raise CFLViolation(f"dt={dt:.3e} exceeds bound {limit:.3e}")
    k1 = euler_rhs(state, bathymetry, params)
    k2 = euler_rhs(state.shifted(k1, 0.5 * dt), bathymetry, params)
    k3 = euler_rhs(state.shifted(k2, 0.5 * dt), bathymetry, params)
    k4 = euler_rhs(state.shifted(k3, dt), bathymetry, params)
    new = StripState(
        state.V + (dt / 6.0) * (k1.dV + 2.0 * k2.dV + 2.0 * k3.dV + k4.dV),
        state.w + (dt / 6.0) * (k1.dw + 2.0 * k2.dw + 2.0 * k3.dw + k4.dw),
        state.rho + (dt / 6.0) * (k1.drho + 2.0 * k2.drho + 2.0 * k3.drho + k4.drho),
        state.eta0 + (dt / 6.0) * (k1.deta0 + 2.0 * k2.deta0 + 2.0 * k3.deta0 + k4.deta0),
        state.t + dt,
    )
    if project:
        new = project_divergence_free(new, bathymetry, params)
    return new


# -- vorticity -------------------------------------------------------------------


def vorticity(state: StripState, diffeo: DiffeoFields, params: PhysParams) -> VorticityField:
    """Scaled curl of (V, w) in sigma coordinates."""
    ops = diffeo.ops
    sq = params.sqrt_mu
    if diffeo.grid.d == 1:
        om = ops.dr_phi(state.V[0]) / sq - sq * ops.grad_phi(state.w)[0]
        return VorticityField(om)
    gw = ops.grad_phi(state.w)
    omega_x = np.stack(
        [
            -ops.dr_phi(state.V[1]) / sq + sq * gw[1],
            ops.dr_phi(state.V[0]) / sq - sq * gw[0],
        ]
    )
    omega_r = ops.grad_phi(state.V[1])[0] - ops.grad_phi(state.V[0])[1]
    return VorticityField(omega_x, omega_r)


def vorticity_source(
    state: StripState, P: np.ndarray, diffeo: DiffeoFields, params: PhysParams
) -> np.ndarray:
    """Source of the scaled-vorticity transport equation stemming from the
    density variations: the baroclinic torque of the total pressure
    (perturbation plus the moving hydrostatic column), divided by delta.

    Derived by taking the scaled curl of the momentum equations; for d = 1,

        F = eps nu^2 [dr_phi rho (grad_phi P + g rho_bar grad eta0)
                      - grad_phi rho dr_phi P] + g rho_bar nu^2 grad_phi rho.
    """
    grid = diffeo.grid
    ops = diffeo.ops
    nu2 = _nu(state, params) ** 2
    eps, g, rb = params.eps, params.g, params.rho_bar
    grad_rho = ops.grad_phi(state.rho)
    dr_rho = ops.dr_phi(state.rho)
    gradP = ops.grad_phi(P)
    drP = ops.dr_phi(P)
    grad_eta0 = spectral.dx(grid, state.eta0)
    if grid.d == 1:
        return nu2 * (
            eps * (dr_rho * (gradP[0] + g * rb * grad_eta0[0]) - grad_rho[0] * drP)
            + g * rb * grad_rho[0]
        )
    # d = 2: horizontal pair plus the vertical component
    def perp(v):
        return np.stack([-v[1], v[0]])

    gpe = perp(gradP + g * rb * grad_eta0[:, None])
    gr = perp(grad_rho)
    F_x = nu2 * (eps * (dr_rho * gpe - gr * drP) + g * rb * gr)
    F_r = params.sqrt_mu * eps * nu2 * (
        gr[0] * (gradP[0] + g * rb * grad_eta0[0]) + gr[1] * (gradP[1] + g * rb * grad_eta0[1])
    )
    return np.concatenate([F_x, F_r[None]], axis=0)


# -- initial data ------------------------------------------------------------------


def init_from_streamfunction(
    psi,
    dpsi_dx,
    dpsi_dz,
    rho0: np.ndarray,
    eta0_init: np.ndarray,
    bathymetry: Bathymetry,
    params: PhysParams,
    bottom_tol: float = 1e-8,
) -> StripState:
    """Build (V, w) = (d_z psi, -d_x psi) from callables on the physical
    domain, pulled back to the sigma grid, then projected so the discrete
    invariants hold.  d = 1 only; psi must be constant along the bottom."""
    grid = bathymetry.grid
    if grid.d != 1:
        raise ValueError("streamfunction initialization is d = 1 only")
    diffeo = build_diffeo(bathymetry, eta0_init, params)
    z = diffeo.z_nodes()
    x = np.broadcast_to(grid.x, z.shape)
    psi_bottom = np.asarray(psi(grid.x, -1.0 + params.beta * bathymetry.values))
    if np.ptp(psi_bottom) > bottom_tol * max(1.0, np.abs(psi_bottom).max()):
        raise InvalidStreamfunction(
            f"psi varies by {np.ptp(psi_bottom):.2e} along the bottom"
        )
    V = np.asarray(dpsi_dz(x, z))[None]
    w = -np.asarray(dpsi_dx(x, z))
    state = StripState(V, w, rho0.copy(), eta0_init.copy())
    return project_divergence_free(state, bathymetry, params)
