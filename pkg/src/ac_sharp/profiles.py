"""One-dimensional transition profile and well-prepared initial data.

The scalar potential F~ across the gap between the wells drives the
first-order profile ODE a'(t) = sqrt(2 F~(a(t))), a(0) = 0, whose solution
connects -dist_N/2 to +dist_N/2 with exponential tails.  A linear-blend
truncation pins the profile to the well values at +-2L, and the initial
field places that truncated profile across a tubular neighborhood of the
starting interface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .energetics import EnergeticsContext
from .grid import DiskField, PolarGrid, signed_distance_to_curve


class StalledProfile(Exception):
    """Profile integration stalled before reaching the well tube."""


class ProfileTooWide(Exception):
    """The transition tube does not fit the regular neighborhood of the
    initial interface."""


def f_tilde(ctx: EnergeticsContext, lam) -> np.ndarray:
    """Scalar potential across the gap: F~(l) = f((dist_N/2 -+ |l|)^2)."""
    lam = np.asarray(lam, dtype=float)
    half = ctx.mp.dist_N / 2.0
    return ctx.f((half - np.abs(lam)) ** 2)


@dataclass
class Profile:
    """Sampled heteroclinic profile on [-T_box, T_box] with derivatives.

    The stored derivative is the ODE right-hand side at the stored value, so
    the equipartition identity a'^2/2 = F~(a) is exact at the nodes.
    """

    t: np.ndarray
    a: np.ndarray
    a_prime: np.ndarray
    dist_N: float

    def __post_init__(self):
        self._interp = PchipInterpolator(self.t, self.a)
        self._interp_d = PchipInterpolator(self.t, self.a_prime)

    def __call__(self, t) -> np.ndarray:
        half = self.dist_N / 2.0
        return np.clip(self._interp(np.clip(t, self.t[0], self.t[-1])), -half, half)

    def deriv(self, t) -> np.ndarray:
        inside = (np.asarray(t) >= self.t[0]) & (np.asarray(t) <= self.t[-1])
        return np.where(inside, self._interp_d(np.clip(t, self.t[0], self.t[-1])), 0.0)

    @property
    def t_box(self) -> float:
        return float(self.t[-1])

    def well_gap(self) -> float:
        """dist_N/2 - a(T_box): how far the tail is from the well value."""
        return self.dist_N / 2.0 - float(self.a[-1])


def default_t_box(ctx: EnergeticsContext) -> float:
    """Plateau crossing time plus enough e-folds of the sqrt(2) tail."""
    half = ctx.mp.dist_N / 2.0
    delta = ctx.mp.delta_N
    crossing = (half - delta) / (math.sqrt(2.0) * delta)
    return crossing + 14.0


def solve_profile(ctx: EnergeticsContext, t_box: float | None = None,
                  n_steps: int = 20000) -> Profile:
    """Integrate the profile ODE forward from a(0) = 0 and mirror oddly.

    A classical 4th-order one-step method runs until the identity branch of
    the smoothing (where the ODE is linear, a' = sqrt(2)(dist_N/2 - a));
    from there the closed form supplies the exponential tail exactly.
    """
    if t_box is None:
        t_box = default_t_box(ctx)
    half = ctx.mp.dist_N / 2.0
    delta = ctx.mp.delta_N
    switch = half - delta                 # identity branch of f from here on
    h = t_box / n_steps
    t = np.linspace(0.0, t_box, n_steps + 1)
    a = np.empty(n_steps + 1)
    a[0] = 0.0

    def rhs(val: float) -> float:
        return math.sqrt(2.0 * float(f_tilde(ctx, val)))

    i_switch = None
    for i in range(n_steps):
        if a[i] >= switch:
            i_switch = i
            break
        k1 = rhs(a[i])
        k2 = rhs(a[i] + 0.5 * h * k1)
        k3 = rhs(a[i] + 0.5 * h * k2)
        k4 = rhs(a[i] + h * k3)
        a[i + 1] = a[i] + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if a[i + 1] <= a[i] + 1e-300:
            raise StalledProfile(f"profile stalled at t={t[i]:.3f}, a={a[i]:.6f}")
    if i_switch is None:
        raise StalledProfile("profile never reached the identity branch; "
                             "increase t_box")
    # linear tail: half - a decays exactly like exp(-sqrt(2) t)
    gap0 = half - a[i_switch]
    a[i_switch:] = half - gap0 * np.exp(-math.sqrt(2.0) * (t[i_switch:] - t[i_switch]))
    if half - a[-1] > 1e-8:
        raise StalledProfile("profile tail above 1e-8 at t_box; increase t_box")
    t_full = np.concatenate([-t[:0:-1], t])
    a_full = np.concatenate([-a[:0:-1], a])
    ap_full = np.sqrt(2.0 * f_tilde(ctx, a_full))
    return Profile(t_full, a_full, ap_full, ctx.mp.dist_N)


@dataclass
class TruncatedProfile:
    """Piecewise blend pinning the profile to +-dist_N/2 at +-2L."""

    base: Profile
    L: float

    def __post_init__(self):
        if self.L <= 0:
            raise ValueError("L must be positive")
        if 2.0 * self.L > self.base.t_box:
            raise ValueError("truncation window exceeds the sampled profile")

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        half = self.base.dist_N / 2.0
        L = self.L
        a_l = float(self.base(L))
        mid = self.base(t)
        up = ((2.0 * L - t) / L) * a_l + ((t - L) / L) * half
        lo = ((t + 2.0 * L) / L) * (-a_l) + ((t + L) / L) * half
        out = np.where(t > L, up, np.where(t < -L, lo, mid))
        return np.clip(np.where(t >= 2.0 * L, half,
                                np.where(t <= -2.0 * L, -half, out)), -half, half)

    def deriv(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        half = self.base.dist_N / 2.0
        L = self.L
        a_l = float(self.base(L))
        blend_slope = (half - a_l) / L
        out = np.where((np.abs(t) > L) & (np.abs(t) < 2.0 * L), blend_slope,
                       self.base.deriv(t))
        return np.where(np.abs(t) >= 2.0 * L, 0.0, out)

def truncate_profile(profile: Profile, L: float) -> TruncatedProfile:
    return TruncatedProfile(profile, L)


def truncation_defect(ctx: EnergeticsContext, trunc: TruncatedProfile,
                      n: int = 8001) -> float:
    """sup_t | |a'_2L| - sqrt(2 F~(a_2L)) |; decays like exp(-c L)."""
    t = np.linspace(-2.5 * trunc.L, 2.5 * trunc.L, n)
    return float(np.abs(np.abs(trunc.deriv(t))
                        - np.sqrt(2.0 * f_tilde(ctx, trunc(t)))).max())


def transition_energy(ctx: EnergeticsContext, trunc: TruncatedProfile,
                      n: int = 20001) -> float:
    """int_{-2L}^{2L} (1/2)|a'_2L|^2 + F~(a_2L) dt.

    The one-dimensional interface energy; approaches c_F from above as L
    grows (equipartition makes the untruncated integrand equal |a'|^2, whose
    integral is exactly c_F).
    """
    t = np.linspace(-2.0 * trunc.L, 2.0 * trunc.L, n)
    integrand = 0.5 * trunc.deriv(t) ** 2 + f_tilde(ctx, trunc(t))
    return float(np.trapezoid(integrand, t))


def minimal_pair_endpoints(ctx: EnergeticsContext, ray: np.ndarray | None = None):
    """Well points p-+ with |p+ - p-| = dist_N.

    Point wells are themselves; concentric spheres use radially aligned
    points on the given ray (default first axis).
    """
    mp = ctx.mp
    k = mp.ambient_dim
    if ray is None:
        ray = np.zeros(k)
        ray[0] = 1.0
    ray = np.asarray(ray, dtype=float)
    ray = ray / np.linalg.norm(ray)
    p = []
    for shape in (mp.minus, mp.plus):
        if shape.kind == "point":
            p.append(shape.center.copy())
        else:
            in_span = (ray @ shape.axes.T) @ shape.axes
            nrm = np.linalg.norm(in_span)
            if nrm < 1e-12:
                raise ValueError("ray is orthogonal to the well span")
            p.append(shape.center + shape.radius * in_span / nrm)
    p_minus, p_plus = p
    gap = float(np.linalg.norm(p_plus - p_minus))
    if abs(gap - mp.dist_N) > 1e-9 * max(1.0, mp.dist_N):
        raise ValueError("selected endpoints do not realize dist_N; "
                         "choose a different ray")
    return p_minus, p_plus


def initial_data(ctx: EnergeticsContext, grid: PolarGrid, curve, eps: float,
                 beta: float = 0.5, profile: Profile | None = None,
                 ray: np.ndarray | None = None,
                 tube_radius: float | None = None) -> DiskField:
    """Well-prepared phase field around the initial interface.

    u(x) = (p+ + p-)/2 + a_{2L}(d(x)/eps) (p+ - p-)/dist_N with 2L =
    eps^(-beta); the field equals the well values exactly outside the
    eps^beta tube of the extended interface.
    """
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    if profile is None:
        profile = solve_profile(ctx)
    if tube_radius is None:
        tube_radius = 0.45 * grid.R_omega
    if eps ** beta > tube_radius:
        raise ProfileTooWide(
            f"transition width {eps ** beta:.3f} exceeds the tubular radius "
            f"{tube_radius:.3f} of the signed distance")
    two_l = eps ** (-beta)
    trunc = truncate_profile(profile, two_l / 2.0)
    p_minus, p_plus = minimal_pair_endpoints(ctx, ray)
    d, _, _ = signed_distance_to_curve(grid, curve)
    amp = trunc(d.values[0] / eps)
    mid = 0.5 * (p_plus + p_minus)
    direction = (p_plus - p_minus) / np.linalg.norm(p_plus - p_minus)
    values = mid[:, None, None] + direction[:, None, None] * amp[None, :, :]
    return DiskField(grid, values)


def profile_table(profile: Profile) -> np.ndarray:
    """(t, a, a') rows for CSV export."""
    return np.stack([profile.t, profile.a, profile.a_prime], axis=1)
