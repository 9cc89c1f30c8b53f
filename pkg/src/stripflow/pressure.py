"""Variable-coefficient anisotropic elliptic solve defining the pressure.

The discrete operator is the composition

    L P = mu * grad_phi . Q_x + dr_phi Q_r,
    Q_x = nu * grad_phi P,     Q_r = nu * dr_phi P,

with homogeneous Dirichlet data at r = 0 and the conormal row
N_b . (mu Q_x, Q_r) imposed at r = -1.  Pointwise algebra identifies
(mu Q_x * h, Q_r - mu grad_sigma . Q_x) with the flux A grad_mu P of the
equivalent divergence form, so the assembled matrix field A is kept for
positivity checks and the mode-wise preconditioner, while the solve itself
uses the composed form (it is the one that makes the prognostic tendencies
preserve the discrete divergence).

Krylov: GMRES preconditioned by the exact inverse of the flat-metric
operator, solved per horizontal Fourier mode through dense factorizations of
the vertical problem.  The preconditioner carries the same mu, which keeps
iteration counts uniform in the shallow-water parameter.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from . import spectral
from .errors import IllConditioned, InsufficientHistory, NoConvergence
from .geometry import DiffeoFields, PhysParams, SigmaOps
from .grid import StripGrid


@dataclass(frozen=True)
class TaylorCoefficient:
    """Surface field a = g rho_bar - (eps/(h_bar + eps h)) d_r P at r = 0."""

    values: np.ndarray

    @property
    def minimum(self) -> float:
        return float(self.values.min())


@dataclass
class EllipticProblem:
    """One pressure-type solve: metric operators, coefficient blocks, and the
    right-hand side in composed form (scalar source + conormal bottom data).
    ``R`` keeps the divergence-form vector source when the problem was posed
    that way (manufactured solutions, inspection)."""

    grid: StripGrid
    ops: SigmaOps
    mu: float
    rho_bar: float
    nu: np.ndarray
    h_tot: np.ndarray
    grad_sum: np.ndarray
    bottom_slope: np.ndarray
    source: np.ndarray
    bottom_data: np.ndarray
    R: np.ndarray | None = None

    # -- coefficient matrix (divergence form), kept for diagnostics ------------

    def A_blocks(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(horizontal block, off-diagonal column, vertical entry) of A."""
        shape = (self.grid.n_r + 1,) + self.grid.xshape
        alpha = np.broadcast_to(self.nu * self.h_tot, shape)
        off = -np.sqrt(self.mu) * self.nu * self.grad_sum
        gs2 = np.sum(self.grad_sum**2, axis=0)
        beta = self.nu * (1.0 + self.mu * gs2) / self.h_tot
        return alpha, off, np.broadcast_to(beta, shape)

    def A_eigen_min(self) -> float:
        """Nodewise minimum eigenvalue of A (d = 1: closed form; d = 2 via the
        block structure alpha I_2 + rank-one coupling)."""
        alpha, off, beta = self.A_blocks()
        c2 = np.sum(off**2, axis=0)
        half_tr = 0.5 * (alpha + beta)
        disc = np.sqrt(0.25 * (alpha - beta) ** 2 + c2)
        return float((half_tr - disc).min())

    def check_spd(self):
        if np.min(self.nu) <= 0.0 or np.min(self.h_tot) <= 0.0:
            raise IllConditioned("coefficient matrix lost positivity")
        if self.A_eigen_min() <= 0.0:
            raise IllConditioned("A is not positive definite nodewise")

    # -- the composed operator --------------------------------------------------

    def flux(self, P: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        ops = self.ops
        return self.nu * ops.grad_phi(P), self.nu * ops.dr_phi(P)

    def apply(self, P: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(interior rows mu grad_phi.Q_x + dr_phi Q_r, bottom conormal row)."""
        Qx, Qr = self.flux(P)
        interior = self.mu * self.ops.div_phi(Qx, np.zeros_like(Qr)) + self.ops.dr_phi(Qr)
        bottom = Qr[0] - self.mu * np.sum(self.bottom_slope * Qx[:, 0], axis=0)
        return interior, bottom

    def residual(self, P: np.ndarray) -> float:
        interior, bottom = self.apply(P)
        num = np.sqrt(
            np.sum((interior[1:-1] - self.source[1:-1]) ** 2)
            + np.sum((bottom - self.bottom_data) ** 2)
        )
        den = np.sqrt(np.sum(self.source[1:-1] ** 2) + np.sum(self.bottom_data**2))
        return float(num / max(den, 1e-300))


def _as_strip(grid: StripGrid, f) -> np.ndarray:
    shape = (grid.n_r + 1,) + grid.xshape
    return np.broadcast_to(np.asarray(f, dtype=float), shape)


def problem_from_divergence_form(
    diffeo: DiffeoFields, params: PhysParams, R: np.ndarray, nu: np.ndarray | None = None
) -> EllipticProblem:
    """Pose ``div_mu (A grad_mu P) = div_mu R`` through the composed form:
    the scalar source is (1/h) div_mu R and the bottom data is the vertical
    component of R at r = -1 (the conormal identity e.A grad_mu P = e.R)."""
    grid = diffeo.grid
    if nu is None:
        nu = _as_strip(grid, 1.0 / params.rho_bar)
    R_x, R_r = R[:-1], R[-1]
    div = spectral.dr(grid, R_r)
    for i in range(grid.d):
        div = div + np.sqrt(params.mu) * spectral.dx(grid, R_x[i])[i]
    source = div / diffeo.h_tot
    return EllipticProblem(
        grid=grid,
        ops=diffeo.ops,
        mu=params.mu,
        rho_bar=params.rho_bar,
        nu=_as_strip(grid, nu),
        h_tot=_as_strip(grid, diffeo.h_tot),
        grad_sum=diffeo.grad_sum,
        bottom_slope=diffeo.bottom_gradient,
        source=source,
        bottom_data=R_r[0].copy(),
        R=R,
    )


# -- preconditioner ------------------------------------------------------------


@lru_cache(maxsize=32)
def _flat_inverse(grid: StripGrid, mu: float, rho_bar: float) -> np.ndarray:
    """Dense inverses, one per horizontal mode, of the flat-strip operator
    (mu Delta_x + d_r^2)/rho_bar with the same boundary-row structure as the
    full problem (unknown slabs 0..n_r-1; Dirichlet slab n_r eliminated)."""
    n = grid.n_r
    D = grid.Dr
    DD = D @ D
    k2 = (grid.k_abs**2).reshape(-1)
    mats = np.empty((k2.size, n, n))
    base = DD[:, :n]
    for j, kk in enumerate(k2):
        M = (base - mu * kk * np.eye(n + 1, n)) / rho_bar
        M[0, :] = D[0, :n] / rho_bar
        mats[j] = M[:n, :]
    return np.linalg.inv(mats)


def _apply_flat_inverse(grid: StripGrid, inv: np.ndarray, v: np.ndarray) -> np.ndarray:
    vh = np.fft.rfftn(v, axes=tuple(range(-grid.d, 0)))
    spec_shape = vh.shape[1:]
    vh = vh.reshape(grid.n_r, -1)
    uh = np.einsum("mij,jm->im", inv, vh)
    uh = uh.reshape((grid.n_r,) + spec_shape)
    return np.fft.irfftn(uh, s=grid.xshape, axes=tuple(range(-grid.d, 0)))


# -- driver ---------------------------------------------------------------------


@dataclass
class SolveInfo:
    iterations: int
    residual: float


def solve_pressure(
    problem: EllipticProblem,
    rtol: float = 1e-10,
    info: SolveInfo | None = None,
    x0: np.ndarray | None = None,
) -> np.ndarray:
    """Solve for P with P(r=0) = 0; raises NoConvergence past the iteration
    cap 10 sqrt(n_x^d n_r) and IllConditioned if A fails the positivity check."""
    problem.check_spd()
    grid = problem.grid
    n, xshape = grid.n_r, grid.xshape
    nun = int(n * np.prod(xshape))
    cap = max(60, int(10.0 * np.sqrt(np.prod(xshape) * n)))

    b = np.concatenate(
        [problem.bottom_data[None], problem.source[1:n]], axis=0
    ).reshape(-1)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        if info is not None:
            info.iterations, info.residual = 0, 0.0
        return np.zeros((n + 1,) + xshape)

    def embed(u: np.ndarray) -> np.ndarray:
        P = np.zeros((n + 1,) + xshape)
        P[:n] = u.reshape((n,) + xshape)
        return P

    def matvec(u: np.ndarray) -> np.ndarray:
        interior, bottom = problem.apply(embed(u))
        return np.concatenate([bottom[None], interior[1:n]], axis=0).reshape(-1)

    inv = _flat_inverse(grid, problem.mu, problem.rho_bar)

    def psolve(v: np.ndarray) -> np.ndarray:
        return _apply_flat_inverse(grid, inv, v.reshape((n,) + xshape)).reshape(-1)

    A = LinearOperator((nun, nun), matvec=matvec)
    M = LinearOperator((nun, nun), matvec=psolve)

    count = [0]

    def cb(_):
        count[0] += 1

    u = np.zeros(nun) if x0 is None else x0[:n].reshape(-1).copy()
    target = rtol
    for _ in range(4):
        u, _ = gmres(
            A, b, x0=u, M=M, rtol=target, atol=0.0, restart=40,
            maxiter=max(1, cap // 40), callback=cb, callback_type="pr_norm",
        )
        true_res = np.linalg.norm(b - matvec(u)) / bnorm
        if true_res <= rtol:
            break
        target *= 0.1
        if count[0] >= cap:
            break
    else:
        true_res = np.linalg.norm(b - matvec(u)) / bnorm
    if true_res > 100 * rtol:
        raise NoConvergence(f"pressure solve stalled at residual {true_res:.2e}")
    if info is not None:
        info.iterations, info.residual = count[0], float(true_res)
    return embed(u)


# -- Rayleigh-Taylor coefficient --------------------------------------------------


def taylor_coefficient(P: np.ndarray, diffeo: DiffeoFields, params: PhysParams) -> TaylorCoefficient:
    """a = g rho_bar - (eps/(h_bar + eps h)) d_r P evaluated at the surface
    (one-sided vertical stencil)."""
    drP_top = spectral.dr(diffeo.grid, P)[-1]
    a = params.g * params.rho_bar - params.eps * drP_top / diffeo.h_tot
    return TaylorCoefficient(a)


def taylor_time_derivative(history: list, dt: float) -> np.ndarray:
    """Backward finite difference of the Taylor coefficient in time."""
    if len(history) < 2:
        raise InsufficientHistory("need at least two snapshots")
    vals = [h.values if isinstance(h, TaylorCoefficient) else np.asarray(h) for h in history]
    if len(vals) == 2:
        return (vals[-1] - vals[-2]) / dt
    return (3.0 * vals[-1] - 4.0 * vals[-2] + vals[-3]) / (2.0 * dt)
