"""Potential, quasi-distance, boundary energy density and related algebra.

Everything is derived from one scalar profile f: a C^2 monotone smoothing
that is the identity below delta_N^2 and a plateau above 2*delta_N^2.  The
potential is F(u) = f(d_N^2(u)) inside a large ball, the scalar transform
d_F integrates sqrt(2 f(lambda^2)) across the gap between the wells, and the
boundary density is a smooth overshoot of d_F scaled by cos(alpha).

All evaluations accept batched states of shape (..., k) and are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

from .wells import ManifoldPair

# quintic on [0,1] with value/slope/curvature (0,1,0) at 0 and (1,0,0) at 1
_HERMITE = np.array([3.0, -7.0, 4.0, 0.0, 1.0, 0.0])       # 3x^5 -7x^4 +4x^3 +x
_HERMITE_D = np.polyder(_HERMITE)
_HERMITE_DD = np.polyder(_HERMITE_D)

_SAFE_D = 1e-14


@dataclass(frozen=True)
class SmoothingF:
    """The C^2 ramp f: identity on [0, delta^2], plateau 2*delta^2 beyond."""

    delta_N: float

    @property
    def s_lo(self) -> float:
        return self.delta_N ** 2

    @property
    def s_hi(self) -> float:
        return 2.0 * self.delta_N ** 2

    @property
    def plateau(self) -> float:
        return self.s_hi

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        x = np.clip((s - self.s_lo) / self.s_lo, 0.0, 1.0)
        mid = self.s_lo * (1.0 + np.polyval(_HERMITE, x))
        return np.where(s <= self.s_lo, s, np.where(s >= self.s_hi, self.s_hi, mid))

    def deriv(self, s):
        s = np.asarray(s, dtype=float)
        x = np.clip((s - self.s_lo) / self.s_lo, 0.0, 1.0)
        mid = np.polyval(_HERMITE_D, x)
        return np.where(s <= self.s_lo, 1.0, np.where(s >= self.s_hi, 0.0, mid))

    def second_deriv(self, s):
        s = np.asarray(s, dtype=float)
        x = np.clip((s - self.s_lo) / self.s_lo, 0.0, 1.0)
        mid = np.polyval(_HERMITE_DD, x) / self.s_lo
        return np.where((s <= self.s_lo) | (s >= self.s_hi), 0.0, mid)

    def assert_monotone(self, n: int = 2048):
        s = np.linspace(0.0, 3.0 * self.s_lo, n)
        if np.any(self.deriv(s) < -1e-13):
            raise ValueError("smoothing f is not monotone")


def _overshoot_coeffs(lambda_b: float) -> tuple[float, float]:
    # piecewise-cos^2 density: c1 on [0, 1/2], c2 on [1/2, 1]; c2 < 1 keeps
    # the overshoot nonnegative, c1 + c2 = 4 normalizes the mass
    c2 = 1.0 / (1.0 + lambda_b)
    return 4.0 - c2, c2


class BoundaryOvershoot:
    """C^{1,1} rescaling S of [0, c_F] with S >= id and S'(c_F/2) = 0.

    The plateau-boundary kink of d_F sits at the value c_F/2; a vanishing
    derivative there is what makes sigma = cos(alpha) S(d_F) a C^{1,1} map.
    lambda_b = 0 falls back to S = id (Lipschitz only; test use).
    """

    def __init__(self, c_f: float, lambda_b: float = 0.5):
        if lambda_b < 0:
            raise ValueError("lambda_b must be nonnegative")
        self.c_f = c_f
        self.lambda_b = lambda_b
        if lambda_b > 0:
            self._c1, self._c2 = _overshoot_coeffs(lambda_b)

    def _bx(self, x):
        c1, c2 = self._c1, self._c2
        lo = 0.5 * c1 * x + c1 * np.sin(2.0 * np.pi * x) / (4.0 * np.pi)
        hi_at_half = 0.25 * c1
        hi = hi_at_half + 0.5 * c2 * (x - 0.5) + c2 * np.sin(2.0 * np.pi * x) / (4.0 * np.pi)
        return np.where(x <= 0.5, lo, hi)

    def _bx_deriv(self, x):
        c = np.where(x <= 0.5, self._c1, self._c2)
        return c * np.cos(np.pi * x) ** 2

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self.lambda_b == 0:
            return s.copy()
        x = np.clip(s / self.c_f, 0.0, 1.0)
        return self.c_f * self._bx(x)

    def deriv(self, s):
        s = np.asarray(s, dtype=float)
        if self.lambda_b == 0:
            return np.ones_like(s)
        x = np.clip(s / self.c_f, 0.0, 1.0)
        return self._bx_deriv(x)

    def assert_admissible(self, n: int = 4096):
        s = np.linspace(0.0, self.c_f, n)
        v = self(s)
        if np.any(v + 1e-12 < s):
            raise ValueError("overshoot must dominate the identity")
        if np.any(np.diff(v) < -1e-12):
            raise ValueError("overshoot must be nondecreasing")
        if self.lambda_b > 0 and abs(self.deriv(0.5 * self.c_f)) > 1e-12:
            raise ValueError("overshoot derivative must vanish at c_F/2")


@dataclass
class EnergeticsContext:
    """Bundles the well pair with every scalar construction derived from it."""

    mp: ManifoldPair
    alpha_deg: float = 90.0
    lambda_b: float = 0.5
    tail_stiffness: float = 1.0
    n_spline: int = 4096
    f: SmoothingF = field(init=False)
    c_F: float = field(init=False)
    R_1: float = field(init=False)
    R_2: float = field(init=False)
    c_1: float = field(init=False)

    def __post_init__(self):
        if not 0.0 < self.alpha_deg <= 90.0:
            raise ValueError("contact angle must lie in (0, 90] degrees")
        self.f = SmoothingF(self.mp.delta_N)
        self.f.assert_monotone()
        self.R_1 = self.mp.R_N + 1.0
        self.R_2 = 2.0 * self.R_1
        self.c_1 = self.tail_stiffness * self.R_1 ** 2 / 4.0 if self.tail_stiffness > 0 else 0.0
        self._build_transition_table()
        self.overshoot = BoundaryOvershoot(self.c_F, self.lambda_b)
        self.overshoot.assert_admissible()

    # -- the scalar transform G(t) = int_0^t sqrt(2 f(l^2)) dl --------------

    def _g_integrand(self, lam):
        return np.sqrt(2.0 * self.f(lam * lam))

    def _g_exact(self, t: float) -> float:
        d = self.mp.delta_N
        t1, t2 = d, math.sqrt(2.0) * d
        if t <= t1:
            return t * t / math.sqrt(2.0)
        base = t1 * t1 / math.sqrt(2.0)
        if t <= t2:
            return base + quad(self._g_integrand, t1, t, epsabs=1e-13, epsrel=1e-13)[0]
        mid = quad(self._g_integrand, t1, t2, epsabs=1e-13, epsrel=1e-13)[0]
        return base + mid + 2.0 * d * (t - t2)

    def _build_transition_table(self):
        half = self.mp.dist_N / 2.0
        knots = np.linspace(0.0, half, self.n_spline + 1)
        vals = np.array([self._g_exact(t) for t in knots])
        self._g_spline = CubicSpline(knots, vals)
        self.c_F = 2.0 * self._g_exact(half)

    def transition_integral(self, t):
        """G(t) for t in [0, dist_N/2], spline-evaluated, exact at knots."""
        t = np.asarray(t, dtype=float)
        return self._g_spline(np.clip(t, 0.0, self.mp.dist_N / 2.0))

    def c_f_requadrature(self, n_panels: int = 64) -> float:
        """Recompute c_F by composite Gauss-Legendre with n_panels panels.

        Only the transition strip [delta_N, sqrt(2) delta_N] needs numerical
        quadrature; the identity and plateau branches integrate in closed
        form.  Doubling n_panels must leave the value stable.
        """
        d = self.mp.delta_N
        half = self.mp.dist_N / 2.0
        t1, t2 = d, math.sqrt(2.0) * d
        nodes, weights = np.polynomial.legendre.leggauss(8)
        edges = np.linspace(t1, min(t2, half), n_panels + 1)
        mid = 0.5 * (edges[:-1] + edges[1:])
        hw = 0.5 * np.diff(edges)
        pts = mid[:, None] + hw[:, None] * nodes[None, :]
        strip = float(np.sum(hw[:, None] * weights[None, :] * self._g_integrand(pts)))
        total = t1 * t1 / math.sqrt(2.0) + strip
        if half > t2:
            total += 2.0 * d * (half - t2)
        return 2.0 * total

    # -- potential ----------------------------------------------------------

    def potential(self, u: np.ndarray):
        """(F(u), grad F(u)) for u of shape (..., k)."""
        u = np.asarray(u, dtype=float)
        norm_u = np.linalg.norm(u, axis=-1)
        _, _, d_n = self.mp.dist_to_wells(u)
        s = d_n * d_n
        f_val = self.f(s)
        fp = self.f.deriv(s)
        grad = np.zeros_like(u)
        # f' vanishes wherever the projection could be ambiguous
        # (d_N >= sqrt(2) delta_N there), so the normal is only queried where
        # it is well-defined
        active = fp > 0.0
        if np.any(active):
            nu = self.mp.unit_normal(u[active])
            grad[active] = (fp[active] * 2.0 * d_n[active])[..., None] * nu
        F = f_val.copy()
        tail = norm_u > self.R_1
        if np.any(tail):
            excess = norm_u[tail] - self.R_1
            F[tail] = self.f.plateau + self.tail_stiffness * excess ** 4
            radial = u[tail] / norm_u[tail][..., None]
            grad[tail] = (4.0 * self.tail_stiffness * excess ** 3)[..., None] * radial
        return F, grad

    # -- quasi-distance ------------------------------------------------------

    def quasi_distance(self, u: np.ndarray) -> np.ndarray:
        """d_F(u) in [0, c_F] for u of shape (..., k)."""
        u = np.asarray(u, dtype=float)
        d_minus, d_plus, _ = self.mp.dist_to_wells(u)
        half = self.mp.dist_N / 2.0
        out = np.full(u.shape[:-1], self.c_F / 2.0)
        lo = d_minus <= half
        hi = (d_plus <= half) & ~lo
        out = np.where(lo, self.transition_integral(d_minus), out)
        out = np.where(hi, self.c_F - self.transition_integral(d_plus), out)
        return out

    def quasi_distance_grad(self, u: np.ndarray) -> np.ndarray:
        """The a.e. gradient of d_F; zero on N and on the plateau."""
        u = np.asarray(u, dtype=float)
        d_minus, d_plus, _ = self.mp.dist_to_wells(u)
        half = self.mp.dist_N / 2.0
        grad = np.zeros_like(u)
        lo = d_minus <= half
        hi = (d_plus <= half) & ~lo
        for mask, shape, dist, sign in ((lo, self.mp.minus, d_minus, 1.0),
                                        (hi, self.mp.plus, d_plus, -1.0)):
            if not np.any(mask):
                continue
            p, ok = shape.project(u[mask])
            v = u[mask] - p
            d = dist[mask]
            mag = np.sqrt(2.0 * self.f(d * d))
            nu = np.zeros_like(v)
            pos = (d > _SAFE_D) & ok
            nu[pos] = v[pos] / d[pos][..., None]
            grad[mask] = sign * mag[..., None] * nu
        return grad

    # -- projection of spatial gradients -------------------------------------

    def pi_projection(self, u: np.ndarray, g: np.ndarray) -> np.ndarray:
        """Columnwise projection of g = grad u onto the direction of Dd_F(u).

        u has shape (..., k) and g shape (..., k, m); returns the same shape
        as g, zero where Dd_F(u) vanishes.
        """
        dd = self.quasi_distance_grad(u)
        mag = np.linalg.norm(dd, axis=-1, keepdims=True)
        e = np.where(mag > 0.0, dd / np.where(mag > 0.0, mag, 1.0), 0.0)
        coef = np.einsum("...k,...km->...m", e, g)
        return e[..., :, None] * coef[..., None, :]

    # -- boundary energy density ---------------------------------------------

    def sigma(self, u: np.ndarray):
        """(sigma(u), grad sigma(u)); sigma = cos(alpha) S(d_F(u))."""
        u = np.asarray(u, dtype=float)
        cos_a = math.cos(math.radians(self.alpha_deg))
        psi = self.quasi_distance(u)
        val = cos_a * self.overshoot(psi)
        grad = (cos_a * self.overshoot.deriv(psi))[..., None] * self.quasi_distance_grad(u)
        return val, grad

    def young_gap(self) -> float:
        """sigma(N+) - sigma(N-); equals c_F cos(alpha) by construction."""
        return self.c_F * math.cos(math.radians(self.alpha_deg))


def gl_energy(ctx: EnergeticsContext, field, grid, eps: float):
    """Ginzburg-Landau energy split (bulk, boundary) of a field on a grid.

    bulk = int eps/2 |grad u|^2 + F(u)/eps,  boundary = int_dOmega sigma(u).
    """
    from . import grid as grid_ops

    grad = grid_ops.gradient(field)
    gsq = np.sum(grad * grad, axis=(0, 1))
    F, _ = ctx.potential(field.states())
    bulk = grid.integrate(0.5 * eps * gsq + F / eps)
    u_b = grid_ops.boundary_trace(field).T
    sig, _ = ctx.sigma(u_b)
    boundary = grid.integrate_boundary(sig)
    return bulk, boundary
