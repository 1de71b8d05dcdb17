"""Cell-centered polar grid on a disk with the discrete calculus used by the
solver and the diagnostics.

The grid is staggered so no node sits at r = 0; the innermost radial ghost is
the diametrically opposite cell, the outermost ghost encodes a prescribed
flux.  Gradients are per-cell least-squares fits over the neighbor stencil
(exact on Cartesian linears), the Laplacian is the conservative flux form
(summing it recovers the boundary flux exactly), and quadrature is the
midpoint rule with cell measures r dr dtheta.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree


class DegenerateCurve(Exception):
    """Curve is self-intersecting or otherwise unusable."""


@dataclass(frozen=True)
class PolarGrid:
    R_omega: float
    N_r: int
    N_theta: int

    def __post_init__(self):
        if self.R_omega <= 0:
            raise ValueError("disk radius must be positive")
        if self.N_r < 8 or self.N_theta < 16:
            raise ValueError("grid too coarse")
        if self.N_theta % 2:
            raise ValueError("N_theta must be even (across-center coupling)")

    @property
    def dr(self) -> float:
        return self.R_omega / self.N_r

    @property
    def dtheta(self) -> float:
        return 2.0 * np.pi / self.N_theta

    @property
    def r(self) -> np.ndarray:
        return (np.arange(self.N_r) + 0.5) * self.dr

    @property
    def theta(self) -> np.ndarray:
        return np.arange(self.N_theta) * self.dtheta

    def cell_measures(self) -> np.ndarray:
        """(N_r, N_theta) array of r dr dtheta."""
        return np.broadcast_to((self.r * self.dr * self.dtheta)[:, None],
                               (self.N_r, self.N_theta)).copy()

    def boundary_measures(self) -> np.ndarray:
        return np.full(self.N_theta, self.R_omega * self.dtheta)

    def cell_centers_xy(self) -> np.ndarray:
        """(2, N_r, N_theta) Cartesian cell centers."""
        r = self.r[:, None]
        t = self.theta[None, :]
        return np.stack([r * np.cos(t), r * np.sin(t)])

    def boundary_points_xy(self) -> np.ndarray:
        """(2, N_theta) points on r = R_omega at cell angles."""
        t = self.theta
        return self.R_omega * np.stack([np.cos(t), np.sin(t)])

    # -- quadrature ----------------------------------------------------------

    def integrate(self, values: np.ndarray) -> float:
        return float(np.sum(values * self.cell_measures()))

    def integrate_boundary(self, samples: np.ndarray) -> float:
        return float(np.sum(samples * self.boundary_measures()))


class DiskField:
    """k-component grid function; values indexed (component, r, theta)."""

    def __init__(self, grid: PolarGrid, values: np.ndarray):
        values = np.asarray(values, dtype=float)
        if values.ndim == 2:
            values = values[None]
        if values.shape[1:] != (grid.N_r, grid.N_theta):
            raise ValueError("values shape does not match the grid")
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains non-finite values")
        self.grid = grid
        self.values = values

    @property
    def k(self) -> int:
        return self.values.shape[0]

    def copy(self) -> "DiskField":
        return DiskField(self.grid, self.values.copy())

    def states(self) -> np.ndarray:
        """(N_r, N_theta, k) view for batched pointwise maps."""
        return np.moveaxis(self.values, 0, -1)

    @classmethod
    def from_states(cls, grid: PolarGrid, states: np.ndarray) -> "DiskField":
        return cls(grid, np.moveaxis(states, -1, 0))

    @classmethod
    def constant(cls, grid: PolarGrid, value: np.ndarray) -> "DiskField":
        value = np.atleast_1d(np.asarray(value, dtype=float))
        vals = np.broadcast_to(value[:, None, None],
                               (value.shape[0], grid.N_r, grid.N_theta)).copy()
        return cls(grid, vals)

    def sup_norm(self) -> float:
        """max over cells of the Euclidean length of the state vector."""
        return float(np.sqrt(np.sum(self.values ** 2, axis=0)).max())

    def sample(self, points: np.ndarray) -> np.ndarray:
        """Bilinear sample at Cartesian points (n, 2) -> (n, k).

        Radius is clamped to the cell-center range; theta wraps periodically.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        g = self.grid
        r = np.hypot(pts[:, 0], pts[:, 1])
        th = np.mod(np.arctan2(pts[:, 1], pts[:, 0]), 2.0 * np.pi)
        jr = np.clip(r / g.dr - 0.5, 0.0, g.N_r - 1.0)
        j0 = np.clip(np.floor(jr).astype(int), 0, g.N_r - 2)
        wj = jr - j0
        it = th / g.dtheta
        i0 = np.floor(it).astype(int) % g.N_theta
        wi = it - np.floor(it)
        i1 = (i0 + 1) % g.N_theta
        v = self.values
        out = ((1 - wj) * (1 - wi))[None] * v[:, j0, i0] \
            + ((1 - wj) * wi)[None] * v[:, j0, i1] \
            + (wj * (1 - wi))[None] * v[:, j0 + 1, i0] \
            + (wj * wi)[None] * v[:, j0 + 1, i1]
        return out.T


# -- discrete operators ------------------------------------------------------


def gradient(field: DiskField) -> np.ndarray:
    """Per-cell gradient in the Cartesian frame, shape (k, 2, N_r, N_theta).

    Radial derivative: central differences, closed across the center by the
    diametrically opposite cell, one-sided (3-point) at the rim.  Tangential
    derivative: central difference along the chord, whose direction is the
    exact cell tangent, divided by the chord length 2 r sin(dtheta).  Exact
    on Cartesian linears, second-order on smooth fields.
    """
    g = field.grid
    v = field.values
    dr = g.dr
    d_r = np.empty_like(v)
    d_r[:, 1:-1, :] = (v[:, 2:, :] - v[:, :-2, :]) / (2.0 * dr)
    opposite = np.roll(v[:, 0, :], g.N_theta // 2, axis=-1)
    d_r[:, 0, :] = (v[:, 1, :] - opposite) / (2.0 * dr)
    d_r[:, -1, :] = (3.0 * v[:, -1, :] - 4.0 * v[:, -2, :] + v[:, -3, :]) / (2.0 * dr)
    chord = 2.0 * g.r * np.sin(g.dtheta)
    d_t = (np.roll(v, -1, axis=2) - np.roll(v, 1, axis=2)) / chord[None, :, None]
    c = np.cos(g.theta)[None, :]
    s = np.sin(g.theta)[None, :]
    return np.stack([d_r * c - d_t * s, d_r * s + d_t * c], axis=1)


def laplacian_robin(field: DiskField, robin_rhs: np.ndarray | None = None) -> DiskField:
    """Conservative 5-point polar Laplacian with a prescribed outer flux.

    robin_rhs (k, N_theta) carries the boundary data of the inward-normal
    condition d_n u = robin_rhs; the outward face flux is set to -robin_rhs
    so that the discrete divergence theorem holds exactly.  The inner face at
    r = 0 has zero area and drops out.
    """
    g = field.grid
    v = field.values
    lap = np.zeros_like(v)
    r = g.r
    dr, dth = g.dr, g.dtheta
    r_face = np.arange(1, g.N_r) * dr            # interior faces j-1/2, j>=1
    flux = (v[:, 1:, :] - v[:, :-1, :]) / dr     # at interior faces
    lap[:, :-1, :] += (r_face[:, None] * flux) / (r[:-1, None] * dr)
    lap[:, 1:, :] -= (r_face[:, None] * flux) / (r[1:, None] * dr)
    if robin_rhs is not None:
        robin_rhs = np.asarray(robin_rhs, dtype=float)
        outer = -robin_rhs                        # outward flux at r = R
        lap[:, -1, :] += g.R_omega * outer / (r[-1] * dr)
    lap += (np.roll(v, -1, axis=2) - 2.0 * v + np.roll(v, 1, axis=2)) \
        / (r[None, :, None] ** 2 * dth ** 2)
    return DiskField(g, lap)


def boundary_trace(field: DiskField) -> np.ndarray:
    """(k, N_theta) linear extrapolation of the field to r = R_omega."""
    v = field.values
    return 1.5 * v[:, -1, :] - 0.5 * v[:, -2, :]


# -- snapshots ----------------------------------------------------------------


def save_snapshot(field: DiskField, path_base: str, time: float, epsilon: float):
    """Write `<base>.bin` (little-endian float64, (k, r, theta) order) and a
    JSON sidecar with the grid metadata."""
    g = field.grid
    data = np.ascontiguousarray(field.values, dtype="<f8")
    with open(path_base + ".bin", "wb") as fh:
        fh.write(data.tobytes())
    meta = {"k": field.k, "N_r": g.N_r, "N_theta": g.N_theta,
            "R_omega": g.R_omega, "time": time, "epsilon": epsilon}
    with open(path_base + ".json", "w") as fh:
        json.dump(meta, fh, sort_keys=True)
        fh.write("\n")


def load_snapshot(path_base: str) -> tuple[DiskField, dict]:
    with open(path_base + ".json") as fh:
        meta = json.load(fh)
    grid = PolarGrid(meta["R_omega"], meta["N_r"], meta["N_theta"])
    raw = np.fromfile(path_base + ".bin", dtype="<f8")
    values = raw.reshape(meta["k"], meta["N_r"], meta["N_theta"])
    return DiskField(grid, values), meta


# -- distance to a polyline ----------------------------------------------------


class PolylineDistance:
    """Exact nearest-point queries against a polyline (optionally closed).

    A KD-tree over segment midpoints prunes candidates; the winner is found
    by exact point-segment projection over the pruned set.
    """

    def __init__(self, points: np.ndarray, closed: bool = False):
        pts = np.asarray(points, dtype=float)
        if closed:
            pts = np.vstack([pts, pts[:1]])
        self.pts = pts
        self.a = pts[:-1]
        self.b = pts[1:]
        self.seg = self.b - self.a
        self.len2 = np.maximum(np.sum(self.seg ** 2, axis=1), 1e-300)
        self.mid = 0.5 * (self.a + self.b)
        self.seg_len = np.sqrt(self.len2)
        self.tree = cKDTree(self.mid)
        # left normals per segment and pseudo-normals per interior vertex
        t = self.seg / self.seg_len[:, None]
        self.normal = np.stack([-t[:, 1], t[:, 0]], axis=1)

    def query(self, x: np.ndarray, k_candidates: int = 12):
        """Nearest feet of x (n, 2): returns (dist, foot, seg_idx, t)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        nseg = len(self.a)
        k = min(k_candidates, nseg)
        _, idx = self.tree.query(x, k=k)
        if k == 1:
            idx = idx[:, None]
        ax = x[:, None, :] - self.a[idx]
        t = np.clip(np.einsum("nij,nij->ni", ax, self.seg[idx]) / self.len2[idx], 0.0, 1.0)
        foot = self.a[idx] + t[..., None] * self.seg[idx]
        d2 = np.sum((x[:, None, :] - foot) ** 2, axis=2)
        best = np.argmin(d2, axis=1)
        rows = np.arange(len(x))
        return (np.sqrt(d2[rows, best]), foot[rows, best],
                idx[rows, best], t[rows, best])

    def signed_distance(self, x: np.ndarray, k_candidates: int = 12):
        """(signed d, foot, unit direction grad d) w.r.t. the left normal."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        dist, foot, seg_idx, t = self.query(x, k_candidates)
        # pseudo-normal at the foot: interior feet use the segment normal,
        # junction feet average the adjacent segment normals
        n = self.normal[seg_idx].copy()
        at_start = t <= 1e-12
        at_end = t >= 1.0 - 1e-12
        prev_ok = at_start & (seg_idx > 0)
        next_ok = at_end & (seg_idx < len(self.a) - 1)
        n[prev_ok] = n[prev_ok] + self.normal[seg_idx[prev_ok] - 1]
        n[next_ok] = n[next_ok] + self.normal[seg_idx[next_ok] + 1]
        sign = np.where(np.einsum("ni,ni->n", x - foot, n) >= 0.0, 1.0, -1.0)
        d = sign * dist
        away = x - foot
        safe = np.maximum(dist, 1e-300)
        direction = sign[:, None] * away / safe[:, None]
        tiny = dist <= 1e-13
        if np.any(tiny):
            nn = self.normal[seg_idx[tiny]]
            direction[tiny] = nn / np.linalg.norm(nn, axis=1, keepdims=True)
        return d, foot, direction


def extended_curve_points(curve, extension: float | None = None) -> np.ndarray:
    """Curve nodes with tangent elongations glued past both endpoints."""
    nodes = np.asarray(curve.nodes, dtype=float)
    if getattr(curve, "closed", False):
        return nodes
    if extension is None:
        extension = 2.0 * _curve_scale(nodes)
    t0 = nodes[0] - nodes[1]
    t0 /= np.linalg.norm(t0)
    t1 = nodes[-1] - nodes[-2]
    t1 /= np.linalg.norm(t1)
    return np.vstack([nodes[0] + extension * t0, nodes, nodes[-1] + extension * t1])


def _curve_scale(nodes: np.ndarray) -> float:
    span = nodes.max(axis=0) - nodes.min(axis=0)
    return float(max(np.linalg.norm(span), 1.0))


def signed_distance_to_curve(grid: PolarGrid, curve, extension: float | None = None):
    """Signed distance field to the tangent-extended curve.

    Positive on the side the curve's stored normal points into.  Returns
    (DiskField of the signed distance, foot points (2, N_r, N_theta),
    unit gradient (2, N_r, N_theta)).
    """
    if hasattr(curve, "check_simple"):
        curve.check_simple()
    pts = extended_curve_points(curve, extension)
    pd = PolylineDistance(pts, closed=getattr(curve, "closed", False))
    xy = grid.cell_centers_xy().reshape(2, -1).T
    d, foot, direction = pd.signed_distance(xy)
    shape = (grid.N_r, grid.N_theta)
    return (DiskField(grid, d.reshape(shape)),
            foot.T.reshape(2, *shape),
            direction.T.reshape(2, *shape))
