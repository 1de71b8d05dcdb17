"""Front tracking for planar curve-shortening flow in a disk with a fixed
contact angle at the boundary circle.

The interface is a polyline.  Interior nodes move by the curvature vector of
the circumscribed circle through each node triple; endpoints carry a ghost
node placed so that a chord meeting the rim at exactly the target angle is a
discrete equilibrium.  A closed-curve mode (no boundary) exists for
validation against the shrinking circle.
"""

from __future__ import annotations

import numpy as np
from scipy.interpolate import CubicSpline

from .grid import DegenerateCurve, PolarGrid, DiskField, signed_distance_to_curve


class CurveCollapse(Exception):
    """Curve length fell below the resolvable threshold (extinction)."""


def _rot90(v: np.ndarray) -> np.ndarray:
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


class InterfaceCurve:
    """Oriented polyline; the left normal of the traversal points into the
    plus phase.  Open curves keep both endpoints on the rim of the disk."""

    def __init__(self, nodes: np.ndarray, boundary_radius: float | None = None,
                 closed: bool = False, time: float = 0.0,
                 target_spacing: float | None = None):
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim != 2 or nodes.shape[1] != 2 or len(nodes) < 3:
            raise ValueError("nodes must be an (n>=3, 2) array")
        self.nodes = nodes
        self.boundary_radius = boundary_radius
        self.closed = closed
        self.time = time
        if not closed:
            if boundary_radius is None:
                raise ValueError("open curves need the boundary radius")
            r_ends = np.hypot(*nodes[[0, -1]].T)
            if np.any(np.abs(r_ends - boundary_radius) > 1e-10 * boundary_radius):
                raise ValueError("endpoints must lie on the boundary circle")
            r_int = np.hypot(*nodes[1:-1].T)
            if np.any(r_int >= boundary_radius):
                raise ValueError("interior nodes must lie strictly inside")
        if target_spacing is None:
            seg = np.diff(nodes, axis=0)
            target_spacing = float(np.linalg.norm(seg, axis=1).mean())
        self.target_spacing = target_spacing

    # -- elementary geometry -------------------------------------------------

    def segments(self) -> np.ndarray:
        if self.closed:
            return np.vstack([self.nodes, self.nodes[:1]])[1:] - self.nodes
        return np.diff(self.nodes, axis=0)

    def spacings(self) -> np.ndarray:
        return np.linalg.norm(self.segments(), axis=1)

    def length(self) -> float:
        return float(self.spacings().sum())

    def copy(self) -> "InterfaceCurve":
        return InterfaceCurve(self.nodes.copy(), self.boundary_radius,
                              self.closed, self.time, self.target_spacing)

    def check_simple(self):
        """Raise DegenerateCurve on self-intersection (segment pair test)."""
        pts = self.nodes
        if self.closed:
            a = pts
            b = np.roll(pts, -1, axis=0)
        else:
            a = pts[:-1]
            b = pts[1:]
        n = len(a)
        d = b - a
        ii, jj = np.triu_indices(n, k=2)
        if self.closed:
            keep = ~((ii == 0) & (jj == n - 1))
            ii, jj = ii[keep], jj[keep]
        r = d[ii]
        s = d[jj]
        qp = a[jj] - a[ii]
        denom = r[:, 0] * s[:, 1] - r[:, 1] * s[:, 0]
        ok = np.abs(denom) > 1e-300
        denom_safe = np.where(ok, denom, 1.0)
        t = np.where(ok, (qp[:, 0] * s[:, 1] - qp[:, 1] * s[:, 0]) / denom_safe, -1.0)
        u = np.where(ok, (qp[:, 0] * r[:, 1] - qp[:, 1] * r[:, 0]) / denom_safe, -1.0)
        hit = ok & (t > 1e-12) & (t < 1 - 1e-12) & (u > 1e-12) & (u < 1 - 1e-12)
        if np.any(hit):
            raise DegenerateCurve("curve is self-intersecting")

    def node_tangents(self) -> np.ndarray:
        """Unit tangents at nodes (central; one-sided at open ends)."""
        pts = self.nodes
        if self.closed:
            t = np.roll(pts, -1, axis=0) - np.roll(pts, 1, axis=0)
        else:
            t = np.empty_like(pts)
            t[1:-1] = pts[2:] - pts[:-2]
            t[0] = -3.0 * pts[0] + 4.0 * pts[1] - pts[2]
            t[-1] = 3.0 * pts[-1] - 4.0 * pts[-2] + pts[-3]
        return t / np.linalg.norm(t, axis=1, keepdims=True)

    def node_normals(self) -> np.ndarray:
        """Unit left normals (pointing into the plus phase)."""
        return _rot90(self.node_tangents())


def curvature_vectors(pts: np.ndarray, closed: bool) -> np.ndarray:
    """Curvature vector at each node via the circumscribed circle.

    For a node triple (a, b, c) the vector is (O - b)/|O - b|^2 with O the
    circumcenter; zero when the triple is (numerically) collinear.  Exact for
    nodes sampled on a circle.  Endpoints of open curves get zero here.
    """
    n = len(pts)
    kvec = np.zeros_like(pts)
    if closed:
        a = np.roll(pts, 1, axis=0)
        b = pts
        c = np.roll(pts, -1, axis=0)
        sel = slice(None)
    else:
        a, b, c = pts[:-2], pts[1:-1], pts[2:]
        sel = slice(1, n - 1)
    u = a - c
    v = b - c
    det = u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]
    scale = np.maximum(np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1), 1e-300)
    ok = np.abs(det) > 1e-13 * scale
    rhs_u = 0.5 * (np.sum(a * a, axis=1) - np.sum(c * c, axis=1))
    rhs_v = 0.5 * (np.sum(b * b, axis=1) - np.sum(c * c, axis=1))
    det_safe = np.where(ok, det, 1.0)
    ox = (rhs_u * v[:, 1] - rhs_v * u[:, 1]) / det_safe
    oy = (rhs_v * u[:, 0] - rhs_u * v[:, 0]) / det_safe
    center = np.stack([ox, oy], axis=1)
    to_center = center - b
    r2 = np.maximum(np.sum(to_center * to_center, axis=1), 1e-300)
    kv = np.where(ok[:, None], to_center / r2[:, None], 0.0)
    kvec[sel] = kv
    return kvec


def _endpoint_frame(p: np.ndarray, radius: float):
    n_b = -p / radius                 # inner normal of the disk boundary
    t_b = _rot90(n_b)
    return t_b, n_b


def _endpoint_ghost(p0: np.ndarray, p1: np.ndarray, radius: float,
                    alpha_deg: float, first: bool) -> np.ndarray:
    """Ghost across the rim making the target contact angle an equilibrium.

    The chord direction d* that meets the rim at exactly alpha (with the
    orientation convention of InterfaceCurve) is reflected about its
    perpendicular through the endpoint; at equilibrium the ghost is collinear
    with the chord and the endpoint feels zero curvature.
    """
    a = np.radians(alpha_deg)
    t_b, n_b = _endpoint_frame(p0, radius)
    sgn = -1.0 if first else 1.0
    d_star = sgn * np.cos(a) * t_b + np.sin(a) * n_b
    chord = p1 - p0
    s = np.linalg.norm(chord)
    m = _rot90(d_star)
    ghost_dir = 2.0 * (chord @ m) * m - chord
    return p0 + ghost_dir * (s / max(np.linalg.norm(ghost_dir), 1e-300))


def redistribute(curve: InterfaceCurve, n_nodes: int | None = None) -> InterfaceCurve:
    """Resample to uniform arclength through a cubic spline of the nodes."""
    pts = curve.nodes
    n = n_nodes or len(pts)
    if curve.closed:
        loop = np.vstack([pts, pts[:1]])
        s = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(loop, axis=0), axis=1))])
        spl = CubicSpline(s, loop, bc_type="periodic")
        s_new = np.linspace(0.0, s[-1], n + 1)[:-1]
        new = spl(s_new)
    else:
        s = np.concatenate([[0.0], np.cumsum(curve.spacings())])
        spl = CubicSpline(s, pts)
        s_new = np.linspace(0.0, s[-1], n)
        new = spl(s_new)
        new[0], new[-1] = pts[0], pts[-1]
        # resampling may nudge interior nodes; keep them off the rim
        if curve.boundary_radius is not None:
            r = np.hypot(new[1:-1, 0], new[1:-1, 1])
            cap = curve.boundary_radius * (1.0 - 1e-12)
            over = r > cap
            if np.any(over):
                new[1:-1][over] *= (cap / r[over])[:, None]
    return InterfaceCurve(new, curve.boundary_radius, curve.closed, curve.time,
                          curve.target_spacing)


def evolve_mcf(curve: InterfaceCurve, dt: float, alpha_deg: float = 90.0,
               redistribute_nodes: bool = True) -> InterfaceCurve:
    """One explicit curve-shortening step with contact-angle enforcement."""
    pts = curve.nodes.copy()
    kvec = curvature_vectors(pts, curve.closed)
    new = pts + dt * kvec
    if not curve.closed:
        radius = curve.boundary_radius
        for idx, nbr, first in ((0, 1, True), (-1, -2, False)):
            ghost = _endpoint_ghost(pts[idx], pts[nbr], radius, alpha_deg, first)
            triple = np.array([ghost, pts[idx], pts[nbr]])
            kv = curvature_vectors(triple, closed=False)[1]
            moved = pts[idx] + dt * kv
            new[idx] = moved * (radius / max(np.linalg.norm(moved), 1e-300))
    out = InterfaceCurve(new, curve.boundary_radius, curve.closed,
                         curve.time + dt, curve.target_spacing)
    if out.length() < 4.0 * curve.target_spacing:
        raise CurveCollapse(f"curve length {out.length():.3e} below threshold")
    if redistribute_nodes:
        out = redistribute(out)
    return out


def advance_to(curve: InterfaceCurve, t_target: float, alpha_deg: float = 90.0,
               cfl: float = 0.2) -> InterfaceCurve:
    """Advance the tracker to t_target with stable substeps."""
    cur = curve
    while cur.time < t_target - 1e-14:
        h = cur.spacings().min()
        dt = min(cfl * h * h, t_target - cur.time)
        cur = evolve_mcf(cur, dt, alpha_deg)
    return cur


def contact_points(curve: InterfaceCurve):
    """Endpoints on the rim and the measured contact angles in degrees."""
    if curve.closed:
        raise ValueError("closed curves have no contact points")
    radius = curve.boundary_radius
    normals = curve.node_normals()
    angles = []
    for idx in (0, -1):
        p = curve.nodes[idx]
        n_b = -p / radius
        cosang = float(np.clip(normals[idx] @ n_b, -1.0, 1.0))
        angles.append(np.degrees(np.arccos(cosang)))
    return curve.nodes[0].copy(), curve.nodes[-1].copy(), tuple(angles)


def region_indicator(curve: InterfaceCurve, grid: PolarGrid) -> DiskField:
    """Characteristic function of the plus phase on the grid cells.

    Cells are assigned by the sign of the signed distance to the
    (tangent-extended) curve; ties (distance exactly zero) go to the plus
    side - a deterministic rule.
    """
    d, _, _ = signed_distance_to_curve(grid, curve)
    return DiskField(grid, (d.values[0] >= 0.0).astype(float))


# -- curve factories -----------------------------------------------------------


def diameter_curve(radius: float, n_nodes: int = 129, angle_deg: float = 0.0,
                   ) -> InterfaceCurve:
    """Straight diameter; traversal direction angle_deg, plus phase on its
    left."""
    a = np.radians(angle_deg)
    direction = np.array([np.cos(a), np.sin(a)])
    s = np.linspace(-radius, radius, n_nodes)
    return InterfaceCurve(s[:, None] * direction, radius)


def chord_curve(radius: float, offset: float, n_nodes: int = 129) -> InterfaceCurve:
    """Horizontal chord at height -offset, traversed toward +x (plus phase
    above).  offset = radius*cos(alpha) meets the rim at angle alpha."""
    if not -radius < offset < radius:
        raise ValueError("offset must lie inside the disk")
    y0 = -offset
    x_e = np.sqrt(radius * radius - y0 * y0)
    x = np.linspace(-x_e, x_e, n_nodes)
    pts = np.stack([x, np.full_like(x, y0)], axis=1)
    pts[0] *= radius / np.linalg.norm(pts[0])
    pts[-1] *= radius / np.linalg.norm(pts[-1])
    return InterfaceCurve(pts, radius)


def chord_for_angle(radius: float, alpha_deg: float, n_nodes: int = 129) -> InterfaceCurve:
    return chord_curve(radius, radius * np.cos(np.radians(alpha_deg)), n_nodes)


def arc_curve(radius: float, arc_radius: float, alpha_deg: float,
              n_nodes: int = 129, center: np.ndarray | None = None) -> InterfaceCurve:
    """Circular arc meeting the rim at the given angle, plus phase on the
    side away from the arc center.

    The center distance is derived from the two-circle angle relation
    |c|^2 = R^2 + rho^2 + 2 R rho cos(alpha) unless given explicitly.
    """
    a = np.radians(alpha_deg)
    if center is None:
        d = np.sqrt(radius ** 2 + arc_radius ** 2 + 2.0 * radius * arc_radius * np.cos(a))
        center = np.array([0.0, -d])
    center = np.asarray(center, dtype=float)
    d = np.linalg.norm(center)
    if not abs(radius - arc_radius) < d < radius + arc_radius:
        raise ValueError("arc does not intersect the boundary circle")
    # intersection points: p.c = (R^2 + d^2 - rho^2)/2
    pc = 0.5 * (radius ** 2 + d ** 2 - arc_radius ** 2)
    e = center / d
    along = pc / d
    perp = np.sqrt(max(radius ** 2 - along ** 2, 0.0))
    e_perp = _rot90(e)
    q1 = along * e + perp * e_perp
    q2 = along * e - perp * e_perp
    phi1 = np.arctan2(*(q1 - center)[::-1])
    phi2 = np.arctan2(*(q2 - center)[::-1])
    # traverse clockwise around the arc center so the left normal points away
    # from it
    if phi2 < phi1:
        phi2 += 2.0 * np.pi
    phis = np.linspace(phi2, phi1, n_nodes)
    pts = center + arc_radius * np.stack([np.cos(phis), np.sin(phis)], axis=1)
    pts[0] *= radius / np.linalg.norm(pts[0])
    pts[-1] *= radius / np.linalg.norm(pts[-1])
    return InterfaceCurve(pts, radius)


def circle_curve(radius: float, n_nodes: int = 256,
                 center=(0.0, 0.0)) -> InterfaceCurve:
    """Closed circle (validation mode), plus phase inside (CCW traversal...
    the left normal of a CCW circle points inward)."""
    phis = np.linspace(0.0, 2.0 * np.pi, n_nodes, endpoint=False)
    pts = np.asarray(center, dtype=float) + radius * np.stack(
        [np.cos(phis), np.sin(phis)], axis=1)
    return InterfaceCurve(pts, closed=True)
