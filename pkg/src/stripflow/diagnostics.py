"""Energy functional, equivalence ratios, blow-up monitoring, and rate fits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import spectral
from .dynamics import StripState, VorticityField, vorticity
from .geometry import DiffeoFields, PhysParams, alinhac_unknown, check_nondegeneracy
from .pressure import TaylorCoefficient


@dataclass
class EnergyReport:
    """Scalar diagnostics of one snapshot."""

    E_s: float
    E_low: float
    alinhac_terms: float
    surface_term: float
    vort_norm: float
    shear_ratio: float
    drw_norm: float
    w_norm: float
    taylor_min: float
    mean_eta0: float
    state_norm: float
    t: float


def vorticity_norm(grid, vort: VorticityField, s: float) -> float:
    if vort.omega_r is None:
        return spectral.field_norm(grid, vort.omega_x, s)
    comps = [vort.omega_x[0], vort.omega_x[1], vort.omega_r]
    return spectral.stack_norm(grid, comps, s)


def state_norm(state: StripState, grid, params: PhysParams, s: float) -> float:
    """The blow-up functional ||(V, sqrt(mu) w, sqrt(mu) rho)||_{H^s} + |eta0|_{H^s}."""
    sq = params.sqrt_mu
    fields = [state.V[i] for i in range(grid.d)] + [sq * state.w, sq * state.rho]
    return spectral.stack_norm(grid, fields, s) + spectral.surface_norm(grid, state.eta0, s)


def energy(
    state: StripState,
    taylor: TaylorCoefficient,
    s: float,
    s0: float,
    params: PhysParams,
    diffeo: DiffeoFields,
) -> EnergyReport:
    """Assemble the high-order energy: weighted good unknowns, the
    Taylor-weighted surface term (square-root weighting), the low-regularity
    block, and the vorticity norm."""
    grid = diffeo.grid
    mu, sq = params.mu, params.sqrt_mu
    h = diffeo.h_tot
    rho_tot = params.rho_bar + params.eps * params.delta * state.rho

    wV = np.sqrt(h * rho_tot)
    ww = np.sqrt(mu * h * rho_tot)
    wr = np.sqrt(mu * h)
    al = 0.0
    for i in range(grid.d):
        al += spectral.l2_strip(grid, wV * alinhac_unknown(state.V[i], s, diffeo)) ** 2
    al += spectral.l2_strip(grid, ww * alinhac_unknown(state.w, s, diffeo)) ** 2
    al += spectral.l2_strip(grid, wr * alinhac_unknown(state.rho, s, diffeo)) ** 2

    eta_s = spectral.lambda_pow(grid, state.eta0, s, dotted=True)
    amin = taylor.minimum
    surface = spectral.l2_surface(grid, np.sqrt(np.maximum(taylor.values, 0.0)) * eta_s) ** 2

    low_fields = [state.V[i] for i in range(grid.d)] + [sq * state.w, state.rho]
    E_low = spectral.stack_norm(grid, low_fields, s0 + 1) ** 2
    E_low += params.g * params.rho_bar * spectral.surface_norm(grid, state.eta0, s0 + 1) ** 2

    vort = vorticity(state, diffeo, params)
    vnorm = vorticity_norm(grid, vort, s - 1)

    drV = [spectral.dr(grid, state.V[i]) for i in range(grid.d)]
    shear = spectral.stack_norm(grid, drV, s - 1) / sq
    drw = spectral.field_norm(grid, spectral.dr(grid, state.w), s - 1)
    wn = spectral.field_norm(grid, state.w, s - 1)

    E_s = E_low + al + surface + vnorm**2
    return EnergyReport(
        E_s=E_s,
        E_low=E_low,
        alinhac_terms=al,
        surface_term=surface,
        vort_norm=vnorm,
        shear_ratio=shear,
        drw_norm=drw,
        w_norm=wn,
        taylor_min=amin,
        mean_eta0=float(state.eta0.mean()),
        state_norm=state_norm(state, grid, params, s),
        t=state.t,
    )


def equivalence_checks(report: EnergyReport, reference: EnergyReport | None = None, factor: float = 4.0) -> dict:
    """Ratio stability of the shear/vertical-derivative controls against
    sqrt(E_s); constants are fitted at the reference snapshot, never asserted
    against analysis constants."""
    root = np.sqrt(max(report.E_s, 1e-300))
    ratios = {
        "shear": report.shear_ratio / root,
        "drw": report.drw_norm / root,
        "w": report.w_norm / root,
    }
    out = {"ratios": ratios, "ok": True, "flags": {}}
    if reference is not None:
        ref_root = np.sqrt(max(reference.E_s, 1e-300))
        for key, num0 in (
            ("shear", reference.shear_ratio / ref_root),
            ("drw", reference.drw_norm / ref_root),
            ("w", reference.w_norm / ref_root),
        ):
            ok = ratios[key] <= factor * max(num0, 1e-14)
            out["flags"][key] = ok
            out["ok"] = out["ok"] and ok
    return out


def blowup_monitor(
    state: StripState,
    report: EnergyReport,
    initial_norm: float,
    params: PhysParams,
    diffeo: DiffeoFields,
    norm_factor: float = 10.0,
) -> str:
    """Continue / TaylorDegenerate / NormBlowup; depth and density are also
    checked defensively although the analysis rules them out."""
    if report.taylor_min < 0.5 * params.c_star:
        return "TaylorDegenerate"
    if not np.isfinite(report.state_norm):
        return "NormBlowup"
    if report.state_norm > norm_factor * max(initial_norm, 1e-12):
        return "NormBlowup"
    rep = check_nondegeneracy(state.rho, diffeo, params)
    if rep["min_depth"] <= 0.0 or rep["min_density"] <= 0.0:
        return "NormBlowup"
    return "Continue"


@dataclass
class RateFit:
    slope: float
    intercept: float
    residual: float
    degenerate: bool


def fit_rate(samples, floor: float = 1e-13) -> RateFit:
    """Least-squares slope of log(error) against log(mu); errors at the noise
    floor flag the fit as degenerate instead of failing."""
    samples = [(float(m), float(e)) for m, e in samples]
    if len(samples) < 3:
        raise ValueError("need at least three samples")
    mus = np.array([m for m, _ in samples])
    errs = np.array([e for _, e in samples])
    if mus.max() / mus.min() < 1e2:
        raise ValueError("samples must span at least two decades")
    degenerate = bool((errs < floor).any())
    errs = np.maximum(errs, floor)
    coeffs, res = np.polyfit(np.log(mus), np.log(errs), 1, full=True)[:2]
    residual = float(res[0]) if len(res) else 0.0
    return RateFit(float(coeffs[0]), float(coeffs[1]), residual, degenerate)


def gronwall_slope(times, energies, skip: float = 0.05) -> float:
    """max_t log(E(t)/E(0))/t over the recorded series, ignoring the earliest
    fraction where the quotient is noise-dominated."""
    times = np.asarray(times, dtype=float)
    energies = np.asarray(energies, dtype=float)
    if energies[0] <= 0:
        raise ValueError("needs a nonzero initial energy")
    mask = times > skip * times[-1]
    vals = np.log(energies[mask] / energies[0]) / times[mask]
    return float(vals.max())
