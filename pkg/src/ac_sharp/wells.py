"""Well-pair geometry: the two zero sets of the potential and their exact
distance/projection/normal/curvature queries.

Wells are restricted to points and round spheres (optionally living in an
affine coordinate subspace) so that every geometric query has a closed form.
All queries accept batched inputs of shape (..., k).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class AmbiguousProjection(Exception):
    """Nearest point on the wells is not unique (tie or sphere center)."""


class NotTangent(Exception):
    """Vector fails the tangency check at the given base point."""


_TIE_TOL = 1e-12


@dataclass(frozen=True)
class WellShape:
    """A single well: a point or a round sphere in R^k.

    For a sphere, ``axes`` is an orthonormal basis (rows) of the linear span
    of the sphere around its center; it defaults to the first
    ``intrinsic_dim + 1`` coordinate axes.  A point has intrinsic_dim 0.
    """

    kind: str                      # "point" | "sphere"
    center: np.ndarray
    radius: float = 0.0
    intrinsic_dim: int = 0
    axes: np.ndarray | None = None

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float)
        object.__setattr__(self, "center", center)
        k = center.shape[0]
        if self.kind == "point":
            if self.radius != 0.0:
                raise ValueError("point well has no radius")
        elif self.kind == "sphere":
            if self.radius <= 0.0:
                raise ValueError("sphere radius must be positive")
            if not 1 <= self.intrinsic_dim <= k - 1:
                raise ValueError("sphere intrinsic_dim must lie in [1, k-1]")
            if self.axes is None:
                axes = np.eye(k)[: self.intrinsic_dim + 1]
            else:
                axes = np.asarray(self.axes, dtype=float)
                if axes.shape != (self.intrinsic_dim + 1, k):
                    raise ValueError("axes must have shape (intrinsic_dim+1, k)")
                if not np.allclose(axes @ axes.T, np.eye(len(axes)), atol=1e-12):
                    raise ValueError("axes rows must be orthonormal")
            object.__setattr__(self, "axes", axes)
        else:
            raise ValueError(f"unknown well kind {self.kind!r}")

    @property
    def ambient_dim(self) -> int:
        return self.center.shape[0]

    def extent(self) -> float:
        """max |u| over the well."""
        return float(np.linalg.norm(self.center)) + self.radius

    def distance(self, u: np.ndarray) -> np.ndarray:
        """Euclidean distance from u (..., k) to the well."""
        v = np.asarray(u, dtype=float) - self.center
        if self.kind == "point":
            return np.linalg.norm(v, axis=-1)
        w = v @ self.axes.T                      # in-span coordinates
        rho = np.linalg.norm(w, axis=-1)
        orth2 = np.maximum(np.sum(v * v, axis=-1) - rho * rho, 0.0)
        return np.sqrt((rho - self.radius) ** 2 + orth2)

    def project(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Nearest point on the well and a validity mask.

        The mask is False where the projection is ambiguous (in-span part of
        u - center vanishes for a sphere).
        """
        u = np.asarray(u, dtype=float)
        if self.kind == "point":
            p = np.broadcast_to(self.center, u.shape).copy()
            return p, np.ones(u.shape[:-1], dtype=bool)
        v = u - self.center
        w = v @ self.axes.T
        rho = np.linalg.norm(w, axis=-1)
        ok = rho > _TIE_TOL * max(1.0, self.radius)
        safe = np.where(ok[..., None], rho[..., None], 1.0)
        p = self.center + (self.radius / safe) * (w @ self.axes)
        return p, ok

    def tangent_check(self, p: np.ndarray, v: np.ndarray, tol: float = 1e-10) -> bool:
        if self.kind == "point":
            return True
        radial = (p - self.center) / self.radius
        in_span = v - (v @ self.axes.T) @ self.axes
        return abs(float(v @ radial)) <= tol * max(1.0, np.linalg.norm(v)) and (
            np.linalg.norm(in_span) <= tol * max(1.0, np.linalg.norm(v))
        )


def _pair_distance(a: WellShape, b: WellShape) -> float:
    """Minimal Euclidean distance between two disjoint well shapes."""
    if a.kind == "point" and b.kind == "point":
        return float(np.linalg.norm(a.center - b.center))
    if a.kind == "point":
        return float(b.distance(a.center))
    if b.kind == "point":
        return float(a.distance(b.center))
    # sphere/sphere: closed form when both spans coincide (covers concentric
    # circles and full spheres); anything else is outside the supported zoo
    if a.axes.shape == b.axes.shape and np.allclose(a.axes, b.axes, atol=1e-12):
        d = b.center - a.center
        w = d @ a.axes.T
        rho = float(np.linalg.norm(w))
        orth2 = max(float(d @ d) - rho * rho, 0.0)
        # three cases: external separation, or one sphere nested in the other
        in_span = max(rho - a.radius - b.radius, a.radius - rho - b.radius,
                      b.radius - rho - a.radius, 0.0)
        return float(np.sqrt(in_span ** 2 + orth2))
    raise NotImplementedError("sphere/sphere wells with different spans")


@dataclass(frozen=True)
class ManifoldPair:
    """The pair N = N+ ∪ N- with its derived constants.

    dist_N is the minimal distance between the wells, delta_N the radius of
    the tubular neighborhood on which the nearest-point projection is smooth,
    and R_N a ball radius containing the dist_N/2 neighborhood of N.
    """

    minus: WellShape
    plus: WellShape
    dist_N: float = field(init=False)
    delta_N: float = field(init=False)
    R_N: float = field(init=False)

    def __post_init__(self):
        if self.minus.ambient_dim != self.plus.ambient_dim:
            raise ValueError("wells must share the ambient dimension")
        if self.ambient_dim < 2:
            raise ValueError("ambient dimension must be at least 2")
        dist = _pair_distance(self.minus, self.plus)
        if dist <= 0.0:
            raise ValueError("wells must be disjoint")
        radii = [s.radius for s in (self.minus, self.plus) if s.kind == "sphere"]
        delta = dist / 8.0
        if radii:
            delta = min(delta, min(radii) / 2.0)
        r_n = max(self.minus.extent(), self.plus.extent()) + dist / 2.0 + 1.0
        object.__setattr__(self, "dist_N", dist)
        object.__setattr__(self, "delta_N", delta)
        object.__setattr__(self, "R_N", r_n)

    @property
    def ambient_dim(self) -> int:
        return self.minus.ambient_dim

    # -- distance ----------------------------------------------------------

    def dist_to_wells(self, u: np.ndarray):
        """(d_minus, d_plus, d_N) for u of shape (..., k)."""
        d_minus = self.minus.distance(u)
        d_plus = self.plus.distance(u)
        return d_minus, d_plus, np.minimum(d_minus, d_plus)

    # -- projection --------------------------------------------------------

    def project_batch(self, u: np.ndarray):
        """Nearest point on N, the side (+1/-1) and a validity mask.

        Ambiguous entries (equidistant wells, sphere centers) are masked
        False; their projection values are unspecified.
        """
        u = np.asarray(u, dtype=float)
        d_minus, d_plus, _ = self.dist_to_wells(u)
        scale = max(1.0, self.dist_N)
        tie = np.abs(d_minus - d_plus) <= _TIE_TOL * scale
        side = np.where(d_plus < d_minus, 1, -1)
        p_minus, ok_minus = self.minus.project(u)
        p_plus, ok_plus = self.plus.project(u)
        take_plus = (side == 1)[..., None]
        p = np.where(take_plus, p_plus, p_minus)
        ok = np.where(side == 1, ok_plus, ok_minus) & ~tie
        return p, side, ok

    def project(self, u: np.ndarray):
        """Nearest point and side for a single state; raises on ambiguity."""
        p, side, ok = self.project_batch(u)
        if not np.all(ok):
            raise AmbiguousProjection(f"projection of {np.asarray(u)} is not unique")
        return p, int(side) if np.isscalar(side) or side.ndim == 0 else side

    # -- normal ------------------------------------------------------------

    def unit_normal(self, u: np.ndarray) -> np.ndarray:
        """(u - P_N u)/|u - P_N u|; the zero vector on N itself."""
        u = np.asarray(u, dtype=float)
        p, _, ok = self.project_batch(u)
        if not np.all(ok):
            raise AmbiguousProjection("unit normal undefined at ambiguous points")
        v = u - p
        d = np.linalg.norm(v, axis=-1, keepdims=True)
        on_n = d <= _TIE_TOL
        return np.where(on_n, 0.0, v / np.where(on_n, 1.0, d))

    # -- curvature ---------------------------------------------------------

    def second_fundamental_form(self, p: np.ndarray, v: np.ndarray,
                                w: np.ndarray) -> np.ndarray:
        """A(v, w) at p on a well, for v, w tangent there.

        For a sphere of radius r: A(v, w) = -(v·w)/r^2 (p - c); zero for a
        point well.
        """
        p = np.asarray(p, dtype=float)
        v = np.asarray(v, dtype=float)
        w = np.asarray(w, dtype=float)
        d_minus = float(self.minus.distance(p))
        d_plus = float(self.plus.distance(p))
        shape = self.minus if d_minus <= d_plus else self.plus
        if min(d_minus, d_plus) > 1e-9 * max(1.0, self.dist_N):
            raise ValueError("base point does not lie on a well")
        if shape.kind == "point":
            return np.zeros_like(p)
        for vec in (v, w):
            if not shape.tangent_check(p, vec):
                raise NotTangent("input vector is not tangent to the well")
        return -(float(v @ w) / shape.radius ** 2) * (p - shape.center)


def well_shape_from_config(cfg: dict, k: int) -> WellShape:
    """Build a WellShape from its JSON description."""
    kind = cfg["type"]
    center = np.asarray(cfg["center"], dtype=float)
    if center.shape != (k,):
        raise ValueError(f"center must have length {k}")
    if kind == "point":
        return WellShape("point", center)
    axes = np.asarray(cfg["axes"], dtype=float) if "axes" in cfg else None
    return WellShape("sphere", center, float(cfg["radius"]),
                     int(cfg.get("intrinsic_dim", k - 1)), axes)


def manifold_pair_from_config(cfg: dict) -> ManifoldPair:
    """{"minus": {...}, "plus": {...}, "k": int} -> ManifoldPair."""
    k = int(cfg["k"])
    return ManifoldPair(well_shape_from_config(cfg["minus"], k),
                        well_shape_from_config(cfg["plus"], k))


def two_point_pair(separation: float = 2.0, k: int = 2) -> ManifoldPair:
    """Point wells at ±separation/2 on the first axis."""
    c = np.zeros(k)
    c[0] = separation / 2.0
    return ManifoldPair(WellShape("point", -c), WellShape("point", c))


def concentric_circles_pair(r_minus: float = 1.0, r_plus: float = 3.0,
                            k: int = 2) -> ManifoldPair:
    """Concentric circle wells of the given radii centered at the origin."""
    c = np.zeros(k)
    return ManifoldPair(WellShape("sphere", c, r_minus, 1),
                        WellShape("sphere", c, r_plus, 1))
