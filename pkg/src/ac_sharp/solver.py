"""Time steppers for the accelerated gradient flow of the Ginzburg-Landau
energy with boundary contact energy.

Two interchangeable schemes:

* semi-implicit: diffusion implicit, reaction and Robin data explicit; the
  Helmholtz solve (I - tau L) u = rhs is done by conjugate gradients with an
  exact preconditioner (FFT in theta reduces the operator to independent
  tridiagonal systems in r), so the loop certifies the residual in one or
  two iterations.
* minimizing movement: each step is a proximal minimization of the energy
  with an L^2 penalty, solved by Barzilai-Borwein descent with radial
  truncation after every inner iterate; the one-step energy inequality holds
  by construction.

The minimizing-movement clock is tau_MM = tau / eps: the proximal step
discretizes the unaccelerated L^2 gradient flow of E_eps, while the PDE
carries a 1/eps acceleration, so a PDE step tau corresponds to tau/eps on
the functional clock.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .energetics import EnergeticsContext, gl_energy
from .grid import DiskField, PolarGrid, boundary_trace, laplacian_robin


class LinearSolveDiverged(Exception):
    pass


class StabilityViolation(Exception):
    """Pre-truncation state escaped the invariant ball: tau too large."""


class InnerLoopStalled(Exception):
    """Proximal minimization made no sufficient progress."""


class DissipationViolation(Exception):
    """Energy dissipation identity residual exceeded its tolerance."""


def radial_truncate(u: DiskField, radius: float) -> DiskField:
    """Pointwise radial truncation onto the ball of the given radius.

    1-Lipschitz and never increases the discrete Dirichlet energy.
    """
    if radius <= 0:
        raise ValueError("truncation radius must be positive")
    norm = np.sqrt(np.sum(u.values ** 2, axis=0))
    scale = np.where(norm > radius, radius / np.maximum(norm, 1e-300), 1.0)
    return DiskField(u.grid, u.values * scale[None])


class HelmholtzSolver:
    """CG solve of (I - tau L) u = rhs with an exact spectral preconditioner.

    L is the conservative polar Laplacian with zero flux at the outer face;
    its theta-translation invariance makes the operator block-circulant, so
    a real FFT in theta decouples it into one SPD tridiagonal system per
    angular mode.  Applying that direct solve as the preconditioner lets the
    CG loop converge to round-off in a step or two while still certifying
    the residual.
    """

    def __init__(self, grid: PolarGrid, tau: float):
        self.grid = grid
        self.tau = tau
        g = grid
        r = g.r
        dr, dth = g.dr, g.dtheta
        n_modes = g.N_theta // 2 + 1
        m = np.arange(n_modes)
        lam = (2.0 - 2.0 * np.cos(2.0 * np.pi * m / g.N_theta)) / dth ** 2
        r_lo = np.arange(g.N_r) * dr          # inner face radii (0 at center)
        r_hi = np.arange(1, g.N_r + 1) * dr
        r_hi[-1] = 0.0                        # zero flux at the rim face
        lower = -tau * r_lo / (r * dr * dr)   # coupling to j-1
        upper = -tau * r_hi / (r * dr * dr)   # coupling to j+1
        diag = 1.0 - (lower + upper)          # row sum zero for the operator
        diag = diag[None, :] + tau * lam[:, None] / r[None, :] ** 2
        self._lower = np.broadcast_to(lower, (n_modes, g.N_r)).copy()
        self._upper = np.broadcast_to(upper, (n_modes, g.N_r)).copy()
        # prefactored Thomas sweeps
        bp = diag.copy()
        w = np.zeros_like(bp)
        for j in range(1, g.N_r):
            w[:, j] = self._lower[:, j] / bp[:, j - 1]
            bp[:, j] = bp[:, j] - w[:, j] * self._upper[:, j - 1]
        self._w = w
        self._bp = bp
        self._measures = grid.cell_measures()

    def apply_operator(self, u: np.ndarray) -> np.ndarray:
        lap = laplacian_robin(DiskField(self.grid, u), None).values
        return u - self.tau * lap

    def apply_inverse(self, rhs: np.ndarray) -> np.ndarray:
        g = self.grid
        rhs_hat = np.fft.rfft(rhs, axis=-1)          # (k, N_r, modes)
        x = np.moveaxis(rhs_hat, -1, 1).copy()       # (k, modes, N_r)
        for j in range(1, g.N_r):
            x[:, :, j] -= self._w[:, j] * x[:, :, j - 1]
        x[:, :, -1] /= self._bp[:, -1]
        for j in range(g.N_r - 2, -1, -1):
            x[:, :, j] = (x[:, :, j] - self._upper[:, j] * x[:, :, j + 1]) / self._bp[:, j]
        out_hat = np.moveaxis(x, 1, -1)
        return np.fft.irfft(out_hat, n=g.N_theta, axis=-1)

    def _dot(self, a: np.ndarray, b: np.ndarray) -> float:
        return float(np.sum(a * b * self._measures[None]))

    def solve(self, rhs: np.ndarray, tol: float = 1e-10,
              max_iter: int = 8) -> np.ndarray:
        """Preconditioned CG in the measure-weighted inner product."""
        x = self.apply_inverse(rhs)
        r = rhs - self.apply_operator(x)
        b_norm = np.sqrt(self._dot(rhs, rhs))
        if b_norm == 0.0:
            return np.zeros_like(rhs)
        z = self.apply_inverse(r)
        p = z
        rz = self._dot(r, z)
        for _ in range(max_iter):
            if np.sqrt(self._dot(r, r)) <= tol * b_norm:
                return x
            ap = self.apply_operator(p)
            alpha = rz / self._dot(p, ap)
            x = x + alpha * p
            r = r - alpha * ap
            z = self.apply_inverse(r)
            rz_new = self._dot(r, z)
            p = z + (rz_new / rz) * p
            rz = rz_new
        if np.sqrt(self._dot(r, r)) <= tol * b_norm:
            return x
        raise LinearSolveDiverged(
            f"relative residual {np.sqrt(self._dot(r, r)) / b_norm:.3e} "
            f"after {max_iter} CG iterations")


@dataclass
class SchemeParams:
    scheme: str = "semi_implicit"   # "semi_implicit" | "min_move" | "midpoint"
    tau_factor: float = 0.2         # tau = tau_factor * eps^2
    linear_tol: float = 1e-10
    inner_tol: float = 1e-6
    max_inner: int = 400
    stability_slack: float = 1e-6

    def tau(self, eps: float) -> float:
        return self.tau_factor * eps * eps


@dataclass
class SolverState:
    u: DiskField
    time: float = 0.0
    step_index: int = 0
    dissipation_ledger: float = 0.0
    energy_history: list = field(default_factory=list)

    def record_energy(self, ctx: EnergeticsContext, eps: float):
        bulk, boundary = gl_energy(ctx, self.u, self.u.grid, eps)
        self.energy_history.append((self.time, bulk + boundary, bulk, boundary))
        return bulk + boundary

    def discrete_energy(self, ctx: EnergeticsContext, eps: float) -> float:
        """The scheme-consistent energy the dissipation ledger tracks."""
        return _DiscreteEnergy(ctx, self.u.grid, eps).value(self.u.values)


def _reaction(ctx: EnergeticsContext, u: DiskField, eps: float) -> np.ndarray:
    _, grad_f = ctx.potential(u.states())
    return np.moveaxis(grad_f, -1, 0) / (eps * eps)


def _robin_data(ctx: EnergeticsContext, u: DiskField, eps: float) -> np.ndarray:
    """(1/eps) grad sigma sampled at the boundary cells, shape (k, N_theta).

    Cell sampling (not trace extrapolation) makes the semi-discrete flow the
    exact metric gradient flow of the discrete energy, which is what the
    dissipation ledger is checked against.
    """
    _, grad_sigma = ctx.sigma(np.moveaxis(u.values[:, -1, :], 0, -1))
    return grad_sigma.T / eps


def step_semi_implicit(state: SolverState, ctx: EnergeticsContext,
                       grid: PolarGrid, eps: float, tau: float,
                       helmholtz: HelmholtzSolver | None = None,
                       params: SchemeParams | None = None) -> SolverState:
    """(I - tau L) u' = u - (tau/eps^2) DF(u) + tau * (Robin flux term).

    Robin data is frozen at the old state, keeping the linear operator
    symmetric; the new state is radially truncated onto |u| <= R_N.
    """
    params = params or SchemeParams()
    if helmholtz is None or helmholtz.tau != tau:
        helmholtz = HelmholtzSolver(grid, tau)
    u = state.u
    rhs = u.values - tau * _reaction(ctx, u, eps)
    g_rob = _robin_data(ctx, u, eps)
    rhs[:, -1, :] += tau * grid.R_omega * (-g_rob) / (grid.r[-1] * grid.dr)
    new_vals = helmholtz.solve(rhs, tol=params.linear_tol)
    sup = float(np.sqrt(np.sum(new_vals ** 2, axis=0)).max())
    r_n = ctx.mp.R_N
    if sup > r_n + params.stability_slack:
        raise StabilityViolation(
            f"pre-truncation sup norm {sup:.6f} exceeds R_N={r_n}; reduce tau")
    new_u = radial_truncate(DiskField(grid, new_vals), r_n)
    measures = grid.cell_measures()
    delta = new_u.values - u.values
    ledger_inc = eps * float(np.sum(delta * delta * measures[None])) / tau
    return SolverState(new_u, state.time + tau, state.step_index + 1,
                       state.dissipation_ledger + ledger_inc,
                       state.energy_history)


class _DiscreteEnergy:
    """The discrete functional whose critical points the schemes share."""

    def __init__(self, ctx: EnergeticsContext, grid: PolarGrid, eps: float):
        self.ctx = ctx
        self.grid = grid
        self.eps = eps
        self.measures = grid.cell_measures()
        g = grid
        self._r_face = np.arange(1, g.N_r) * g.dr
        self._bdry_over_cell = g.R_omega / (g.r[-1] * g.dr)

    def dirichlet(self, v: np.ndarray) -> float:
        g = self.grid
        dr, dth = g.dr, g.dtheta
        radial = (v[:, 1:, :] - v[:, :-1, :]) / dr
        d_rad = float(np.sum(self._r_face[None, :, None] * radial ** 2) * dr * dth)
        ang = (np.roll(v, -1, axis=2) - v) / (g.r[None, :, None] * dth)
        d_ang = float(np.sum(ang ** 2 * self.measures[None]))
        return d_rad + d_ang

    def value(self, v: np.ndarray) -> float:
        states = np.moveaxis(v, 0, -1)
        f_val, _ = self.ctx.potential(states)
        bulk = 0.5 * self.eps * self.dirichlet(v) \
            + float(np.sum(f_val * self.measures)) / self.eps
        sig, _ = self.ctx.sigma(np.moveaxis(v[:, -1, :], 0, -1))
        boundary = float(np.sum(sig) * self.grid.R_omega * self.grid.dtheta)
        return bulk + boundary

    def strong_gradient(self, v: np.ndarray) -> np.ndarray:
        """Cell-measure-normalized gradient of value(); the EL residual."""
        u = DiskField(self.grid, v)
        lap = laplacian_robin(u, None).values
        _, grad_f = self.ctx.potential(np.moveaxis(v, 0, -1))
        res = -self.eps * lap + np.moveaxis(grad_f, -1, 0) / self.eps
        _, grad_sig = self.ctx.sigma(np.moveaxis(v[:, -1, :], 0, -1))
        res[:, -1, :] += self._bdry_over_cell * grad_sig.T
        return res

    def norm(self, v: np.ndarray) -> float:
        return float(np.sqrt(np.sum(v * v * self.measures[None])))


def euler_lagrange_residual(ctx: EnergeticsContext, grid: PolarGrid,
                            u: DiskField, eps: float) -> float:
    """L^2 norm of the steady-state Euler-Lagrange residual of the energy."""
    de = _DiscreteEnergy(ctx, grid, eps)
    return de.norm(de.strong_gradient(u.values))


def step_min_move(state: SolverState, ctx: EnergeticsContext, grid: PolarGrid,
                  eps: float, tau: float,
                  params: SchemeParams | None = None,
                  helmholtz: HelmholtzSolver | None = None) -> SolverState:
    """Proximal step: minimize E(u) + ||u - u^n||^2/(2 tau_MM), tau_MM=tau/eps.

    Inner solver: descent preconditioned by the exact inverse of the
    quadratic part (prox + Dirichlet), with Barzilai-Borwein scaling and
    backtracking on the objective; every iterate is radially truncated
    (which cannot increase the objective), so the accepted step satisfies
    the one-step minimization inequality exactly.
    """
    params = params or SchemeParams()
    tau_mm = tau / eps
    de = _DiscreteEnergy(ctx, grid, eps)
    measures = de.measures
    u_n = state.u.values
    r_n = ctx.mp.R_N
    # quadratic-part Hessian is ((1/tau_mm) I - eps L0) = (1/tau_mm)(I - tau L0)
    if helmholtz is None or helmholtz.tau != tau:
        helmholtz = HelmholtzSolver(grid, tau)

    def prox(v):
        d = v - u_n
        return float(np.sum(d * d * measures[None])) / (2.0 * tau_mm)

    def phi(v):
        return de.value(v) + prox(v)

    def grad(v):
        return de.strong_gradient(v) + (v - u_n) / tau_mm

    def truncate(v):
        norm = np.sqrt(np.sum(v ** 2, axis=0))
        scale = np.where(norm > r_n, r_n / np.maximum(norm, 1e-300), 1.0)
        return v * scale[None]

    v = u_n.copy()
    phi_v = phi(v)
    g = grad(v)
    scale_bb = 1.0
    prev_v = None
    prev_d = None
    for it in range(params.max_inner):
        g_norm = de.norm(g)
        u_norm = de.norm(v)
        if g_norm <= params.inner_tol * (1.0 + u_norm):
            break
        d = tau_mm * helmholtz.apply_inverse(g)      # near-Newton direction
        if prev_v is not None:
            dv = v - prev_v
            dd = d - prev_d
            denom = float(np.sum(dv * dd * measures[None]))
            num = float(np.sum(dv * dv * measures[None]))
            if denom > 1e-300:
                scale_bb = min(max(num / denom, 0.1), 10.0)
        step = scale_bb
        accepted = False
        for _ in range(40):
            trial = truncate(v - step * d)
            phi_t = phi(trial)
            if phi_t <= phi_v:
                accepted = True
                break
            step *= 0.5
        if accepted and phi_v - phi_t <= 4.0 * np.finfo(float).eps * abs(phi_v):
            break              # objective decrement below float resolution
        if not accepted:
            if g_norm <= 100.0 * params.inner_tol * (1.0 + u_norm):
                break          # flat landscape near the minimizer
            raise InnerLoopStalled(
                f"no sufficient decrease after backtracking at inner step {it}")
        prev_v, prev_d = v, d
        v, phi_v = trial, phi_t
        g = grad(v)
    else:
        g_norm = de.norm(g)
        if g_norm > params.inner_tol * 50.0 * (1.0 + de.norm(v)):
            raise InnerLoopStalled(
                f"EL residual {g_norm:.3e} after {params.max_inner} iterations")
    new_u = DiskField(grid, v)
    delta = v - u_n
    ledger_inc = eps * float(np.sum(delta * delta * measures[None])) / tau
    return SolverState(new_u, state.time + tau, state.step_index + 1,
                       state.dissipation_ledger + ledger_inc,
                       state.energy_history)


def step_midpoint(state: SolverState, ctx: EnergeticsContext, grid: PolarGrid,
                  eps: float, tau: float,
                  helmholtz_half: HelmholtzSolver | None = None,
                  params: SchemeParams | None = None) -> SolverState:
    """Implicit-midpoint step; the energy-consistent variant.

    Evaluating the full right-hand side at (u^n + u^{n+1})/2 makes the
    dissipation-ledger identity hold to second order in tau, where the
    operator-split scheme drifts at first order.  The midpoint system is
    solved by fixed-point iteration, each pass one Helmholtz solve with
    tau/2.
    """
    params = params or SchemeParams()
    if helmholtz_half is None or helmholtz_half.tau != 0.5 * tau:
        helmholtz_half = HelmholtzSolver(grid, 0.5 * tau)
    u = state.u
    base = u.values + 0.5 * tau * laplacian_robin(u, None).values
    new_vals = u.values.copy()
    for _ in range(params.max_inner):
        mid = DiskField(grid, 0.5 * (u.values + new_vals))
        rhs = base - tau * _reaction(ctx, mid, eps)
        g_rob = _robin_data(ctx, mid, eps)
        rhs[:, -1, :] += tau * grid.R_omega * (-g_rob) / (grid.r[-1] * grid.dr)
        nxt = helmholtz_half.solve(rhs, tol=params.linear_tol)
        delta = float(np.abs(nxt - new_vals).max())
        new_vals = nxt
        if delta <= 1e-13 * (1.0 + float(np.abs(new_vals).max())):
            break
    else:
        raise LinearSolveDiverged("midpoint fixed-point iteration stalled")
    sup = float(np.sqrt(np.sum(new_vals ** 2, axis=0)).max())
    r_n = ctx.mp.R_N
    if sup > r_n + params.stability_slack:
        raise StabilityViolation(
            f"pre-truncation sup norm {sup:.6f} exceeds R_N={r_n}; reduce tau")
    new_u = radial_truncate(DiskField(grid, new_vals), r_n)
    measures = grid.cell_measures()
    delta_u = new_u.values - u.values
    ledger_inc = eps * float(np.sum(delta_u * delta_u * measures[None])) / tau
    return SolverState(new_u, state.time + tau, state.step_index + 1,
                       state.dissipation_ledger + ledger_inc,
                       state.energy_history)


def run(ctx: EnergeticsContext, grid: PolarGrid, u0: DiskField, eps: float,
        t_final: float, params: SchemeParams | None = None,
        callback=None, tol_dissip: float | None = None,
        record_every: int = 1):
    """Advance to t_final, keeping the energy ledger.

    callback(state) fires after every accepted step.  When tol_dissip is
    given, the relative residual of the energy dissipation identity
    |E(T) - E(0) + ledger| / max(|E(0)|, ledger) must not exceed it.
    Returns the final state (energy history attached).
    """
    params = params or SchemeParams()
    tau = params.tau(eps)
    state = SolverState(radial_truncate(u0, ctx.mp.R_N))
    state.record_energy(ctx, eps)
    e0 = state.discrete_energy(ctx, eps)
    if params.scheme == "semi_implicit":
        helmholtz = HelmholtzSolver(grid, tau)
    elif params.scheme == "midpoint":
        helmholtz = HelmholtzSolver(grid, 0.5 * tau)
    elif params.scheme == "min_move":
        helmholtz = HelmholtzSolver(grid, tau)
    else:
        raise ValueError(f"unknown scheme {params.scheme!r}")
    n_steps = int(round(t_final / tau))
    for n in range(n_steps):
        if params.scheme == "semi_implicit":
            state = step_semi_implicit(state, ctx, grid, eps, tau, helmholtz,
                                       params)
        elif params.scheme == "midpoint":
            state = step_midpoint(state, ctx, grid, eps, tau, helmholtz, params)
        else:
            state = step_min_move(state, ctx, grid, eps, tau, params, helmholtz)
        if (n + 1) % record_every == 0 or n + 1 == n_steps:
            state.record_energy(ctx, eps)
        if callback is not None:
            callback(state)
    e_final = state.discrete_energy(ctx, eps)
    residual = abs(e_final - e0 + state.dissipation_ledger)
    state.dissipation_residual = residual
    denom = max(abs(e0), state.dissipation_ledger, 1e-300)
    state.dissipation_residual_rel = residual / denom
    if tol_dissip is not None and state.dissipation_residual_rel > tol_dissip:
        raise DissipationViolation(
            f"dissipation identity residual {state.dissipation_residual_rel:.3e} "
            f"exceeds {tol_dissip:.1e}")
    return state
