"""Polar-structured triangulations of the computational domain.

Two generators: `mesh_annulus` for the region between a star-shaped obstacle
and the outer circle, and `mesh_disk` for the obstacle-free verification
geometry.  Vertices sit on an n_theta x (n_radial + 1) polar grid.  Rings
with radius above the first alignment knot are exact circles placed so that
every cutoff-knot radius is an element boundary (the shipped profiles are
only piecewise smooth there); rings below it blend from the obstacle curve
to that first circle with a geometric grading that keeps the radial spacing
within a bounded multiple of the local circumferential spacing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .cutoffs import CUTOFF_KNOT_RADII

TAG_INTERIOR = 0
TAG_OBSTACLE = 1
TAG_OUTER = 2

# radial spacing may exceed the local circumferential spacing by this factor
# before triangles get too thin (keeps the minimum angle comfortably > 15 deg)
_ASPECT = 3.0


@dataclass(frozen=True)
class StarObstacle:
    """Star-shaped obstacle boundary r = radial_fn(theta) > 0, 2*pi-periodic."""

    radial_fn: Callable[[np.ndarray], np.ndarray]
    r_min: float
    r_max: float

    def __post_init__(self):
        if not 0 < self.r_min <= self.r_max:
            raise ValueError("obstacle radial bounds must satisfy 0 < r_min <= r_max")

    @staticmethod
    def butterfly() -> "StarObstacle":
        """The (0.3 + sin^2 t)(1.5 + 1.4 cos 2t) boundary, radii in [0.130, 1.249]."""
        fn = lambda t: (0.3 + np.sin(t) ** 2) * (1.5 + 1.4 * np.cos(2 * t))
        t = np.linspace(0.0, 2.0 * np.pi, 20001)
        r = fn(t)
        return StarObstacle(fn, float(r.min()), float(r.max()))

    @staticmethod
    def circle(radius: float) -> "StarObstacle":
        return StarObstacle(lambda t: np.full_like(np.asarray(t, float), radius),
                            radius, radius)


@dataclass(frozen=True)
class TriQuadRule:
    """Symmetric quadrature on the reference triangle.

    `points` are barycentric, `weights` sum to 1; the physical-element
    integral is |T| * sum_q w_q f(x_q).
    """

    degree: int
    points: np.ndarray
    weights: np.ndarray

    def map_to(self, verts: np.ndarray) -> np.ndarray:
        """Physical quadrature points for element vertices (.., 3, 2)."""
        return np.einsum("qk,...kd->...qd", self.points, verts)


def _perm3(a: float, b: float, c: float) -> list[tuple]:
    pts = {(a, b, c), (b, c, a), (c, a, b), (a, c, b), (c, b, a), (b, a, c)}
    return sorted(pts)


def quad_rule(degree: int) -> TriQuadRule:
    """Positive-weight symmetric Gaussian rule exact to the given degree."""
    if degree == 1:
        pts = [(1 / 3, 1 / 3, 1 / 3)]
        wts = [1.0]
    elif degree == 2:
        pts = [(0.5, 0.5, 0.0), (0.0, 0.5, 0.5), (0.5, 0.0, 0.5)]
        wts = [1 / 3] * 3
    elif degree in (3, 4):
        # 6-point degree-4 rule; the classical 4-point degree-3 rule has a
        # negative centroid weight, which we exclude by contract
        a1, w1 = 0.445948490915965, 0.223381589678011
        a2, w2 = 0.091576213509771, 0.109951743655322
        pts = [(1 - 2 * a1, a1, a1), (a1, 1 - 2 * a1, a1), (a1, a1, 1 - 2 * a1),
               (1 - 2 * a2, a2, a2), (a2, 1 - 2 * a2, a2), (a2, a2, 1 - 2 * a2)]
        wts = [w1] * 3 + [w2] * 3
    elif degree == 5:
        s = math.sqrt(15.0)
        a, wa = (6 - s) / 21, (155 - s) / 1200
        b, wb = (6 + s) / 21, (155 + s) / 1200
        pts = [(1 / 3, 1 / 3, 1 / 3),
               (1 - 2 * a, a, a), (a, 1 - 2 * a, a), (a, a, 1 - 2 * a),
               (1 - 2 * b, b, b), (b, 1 - 2 * b, b), (b, b, 1 - 2 * b)]
        wts = [9 / 40] + [wa] * 3 + [wb] * 3
    elif degree == 6:
        a1, w1 = 0.249286745170910, 0.116786275726379
        a2, w2 = 0.063089014491502, 0.050844906370207
        b, c, w3 = 0.310352451033785, 0.053145049844816, 0.082851075618374
        pts = [(1 - 2 * a1, a1, a1), (a1, 1 - 2 * a1, a1), (a1, a1, 1 - 2 * a1),
               (1 - 2 * a2, a2, a2), (a2, 1 - 2 * a2, a2), (a2, a2, 1 - 2 * a2)]
        pts += _perm3(b, c, 1 - b - c)
        wts = [w1] * 3 + [w2] * 3 + [w3] * 6
    else:
        raise ValueError(f"unsupported quadrature degree {degree} (expected 1..6)")
    return TriQuadRule(degree, np.asarray(pts, float), np.asarray(wts, float))


@dataclass(frozen=True)
class PolarStructure:
    """Index map of the structured grid, kept for O(1) point location."""

    kind: str  # 'annulus' or 'disk'
    n_theta: int
    n_radial: int
    targets: np.ndarray          # ring radii for disks / circular-ring radii
    rad: np.ndarray | None       # (n_radial + 1, n_theta) per-ray ring radii

    def ring_radii(self, theta: float) -> np.ndarray:
        """Radii of all rings along the ray at angle theta."""
        if self.kind == "disk" or self.rad is None:
            return self.targets
        dtheta = 2.0 * np.pi / self.n_theta
        pos = (theta % (2.0 * np.pi)) / dtheta
        i0 = int(pos) % self.n_theta
        w = pos - int(pos)
        return (1.0 - w) * self.rad[:, i0] + w * self.rad[:, (i0 + 1) % self.n_theta]


@dataclass
class TriMesh:
    """Triangulation with boundary tags and the polar index structure."""

    vertices: np.ndarray          # (V, 2)
    triangles: np.ndarray         # (T, 3) CCW
    boundary_tags: np.ndarray     # (V,) in {TAG_INTERIOR, TAG_OBSTACLE, TAG_OUTER}
    h_max: float = field(init=False)
    structure: PolarStructure | None = None
    _edges: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, float)
        self.triangles = np.asarray(self.triangles, np.int64)
        self.boundary_tags = np.asarray(self.boundary_tags, np.int8)
        areas = self.signed_areas()
        if np.any(areas <= 0.0):
            bad = int(np.argmin(areas))
            raise ValueError(f"triangle {bad} has non-positive area {areas[bad]:.3e}")
        self.h_max = float(np.sqrt(self._sq_edge_lengths().max()))

    def _sq_edge_lengths(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d = p - np.roll(p, -1, axis=1)
        return np.einsum("tkd,tkd->tk", d, d)

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                      - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))

    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted vertex pairs, shape (E, 2)."""
        if self._edges is None:
            e = np.vstack([self.triangles[:, [0, 1]],
                           self.triangles[:, [1, 2]],
                           self.triangles[:, [2, 0]]])
            e.sort(axis=1)
            self._edges = np.unique(e, axis=0)
        return self._edges

    def euler_characteristic(self) -> int:
        v = self.vertices.shape[0]
        e = self.edges().shape[0]
        f = self.triangles.shape[0]
        return v - e + f

    def min_angle_deg(self) -> float:
        sq = self._sq_edge_lengths()  # edge k is opposite vertex k+2 (mod 3)
        a2, b2, c2 = sq[:, 0], sq[:, 1], sq[:, 2]
        angles = []
        for x2, y2, z2 in ((a2, b2, c2), (b2, c2, a2), (c2, a2, b2)):
            cosang = (y2 + z2 - x2) / (2.0 * np.sqrt(y2 * z2))
            angles.append(np.arccos(np.clip(cosang, -1.0, 1.0)))
        return float(np.degrees(np.min(angles)))

    def save_text(self, path) -> None:
        """Plain-text dump: header, V lines 'x y tag', T lines 'i j k'."""
        with open(path, "w") as f:
            f.write(f"vertices {len(self.vertices)} triangles {len(self.triangles)}\n")
            for (x, y), tag in zip(self.vertices, self.boundary_tags):
                f.write(f"{float(x)!r} {float(y)!r} {int(tag)}\n")
            for i, j, k in self.triangles:
                f.write(f"{i} {j} {k}\n")


def _smooth_periodic(values: np.ndarray, sigma: float = 1.5) -> np.ndarray:
    """Circular Gaussian smoothing (sigma in grid steps)."""
    n = values.size
    half = max(1, int(4 * sigma))
    offs = np.arange(-half, half + 1)
    kern = np.exp(-0.5 * (offs / sigma) ** 2)
    kern /= kern.sum()
    out = np.zeros_like(values)
    for o, w in zip(offs, kern):
        out += w * np.roll(values, -o)
    return out


def _layer_masses(r_lo, b, r_hi, dtheta, cap):
    """Per-ray density masses of the three radial-spacing zones.

    Spacing at radius r is min(cap, max(b, _ASPECT * r * dtheta)): the local
    boundary edge length b near the obstacle (keeps the sheared flank quads
    as balanced as rays allow), the aspect-bounded circumferential multiple
    in between, the uniform cap far out.
    """
    a = _ASPECT * dtheta
    rb1 = np.minimum(b / a, r_hi)          # below: spacing b
    rb2 = min(cap / a, r_hi)               # above: spacing cap
    m1 = np.maximum(rb1 - r_lo, 0.0) / b
    log_lo = np.maximum(r_lo, rb1)
    m2 = np.log(np.maximum(rb2 / log_lo, 1.0)) / a
    m3 = np.maximum(r_hi - np.maximum(r_lo, rb2), 0.0) / cap
    return m1, m2, m3, rb1, rb2, log_lo


def _boundary_layer_radii(r_obs: np.ndarray, b_local: np.ndarray, r_hi: float,
                          dtheta: float, cap: float, n: int) -> np.ndarray:
    """(n+1, n_theta) ring radii from the obstacle curve out to the circle r_hi.

    Positions invert the cumulative 1/spacing density at n+1 uniform
    fractions per ray, so every ray reaches r_hi in the same number of steps
    while honouring its own local spacing profile.
    """
    a = _ASPECT * dtheta
    b = np.minimum(b_local, cap)
    m1, m2, m3, rb1, rb2, log_lo = _layer_masses(r_obs, b, r_hi, dtheta, cap)
    total = m1 + m2 + m3
    f = np.linspace(0.0, 1.0, n + 1)[:, None] * total[None, :]
    r_zone1 = r_obs + f * b
    f2 = np.clip(f - m1, 0.0, m2)
    r_zone2 = log_lo * np.exp(f2 * a)
    f3 = np.maximum(f - m1 - m2, 0.0)
    rad = np.where(f <= m1, r_zone1, r_zone2 + f3 * cap)
    rad[-1] = r_hi
    return rad


def _ideal_inner_count(r_obs: np.ndarray, b_local: np.ndarray, r_hi: float,
                       dtheta: float, cap: float) -> int:
    b = np.minimum(b_local, cap)
    m1, m2, m3, *_ = _layer_masses(r_obs, b, r_hi, dtheta, cap)
    return max(1, int(np.ceil((m1 + m2 + m3).max())))


def _allocate(ideal: list[int], total: int) -> list[int]:
    """Scale ideal interval counts to sum to `total`, each at least 1."""
    if total < len(ideal):
        raise ValueError("n_radial too small for the knot-aligned schedule")
    raw = [max(1.0, c * total / sum(ideal)) for c in ideal]
    counts = [int(c) for c in raw]
    rema = sorted(range(len(raw)), key=lambda i: raw[i] - counts[i], reverse=True)
    k = 0
    while sum(counts) < total:
        counts[rema[k % len(rema)]] += 1
        k += 1
    while sum(counts) > total:
        idx = [i for i in range(len(counts)) if counts[i] > 1]
        counts[max(idx, key=lambda i: counts[i])] -= 1
    return counts


def _disk_targets(r_outer: float, n_theta: int, n_radial: int | None,
                  knots) -> np.ndarray:
    """Circular ring radii for the disk: uniform within knot segments."""
    r_cap = r_outer * 2.0 * np.pi / n_theta
    cuts = [0.0] + sorted(k for k in knots if 0 < k < r_outer * (1 - 1e-12)) + [r_outer]
    ideal = [max(1, round((cuts[i + 1] - cuts[i]) / r_cap))
             for i in range(len(cuts) - 1)]
    n_req = sum(ideal) if n_radial is None else n_radial
    try:
        counts = _allocate(ideal, n_req)
    except ValueError:
        cuts, counts = [0.0, r_outer], [n_req]
    parts = [np.array([0.0])]
    for i, n in enumerate(counts):
        parts.append(np.linspace(cuts[i], cuts[i + 1], n + 1)[1:])
    return np.concatenate(parts)


def _annulus_radii(obstacle: StarObstacle, r_outer: float, n_theta: int,
                   n_radial: int | None, knots) -> np.ndarray:
    """(n_radial + 1, n_theta) per-ray ring radii for the annulus.

    A boundary layer climbs from the obstacle curve to the first knot circle
    with spacing tracking the local boundary edge length; above it the rings
    are circles, uniform within each knot segment so knot radii are exact
    element boundaries.
    """
    dtheta = 2.0 * np.pi / n_theta
    r_cap = r_outer * dtheta
    theta = dtheta * np.arange(n_theta)
    r_obs = np.asarray(obstacle.radial_fn(theta), float)
    r_shift = np.asarray(obstacle.radial_fn(theta + 1e-6), float)
    r_prime = (r_shift - np.asarray(obstacle.radial_fn(theta - 1e-6), float)) / 2e-6
    b_local = _smooth_periodic(np.hypot(r_obs, r_prime) * dtheta)

    inner_knots = sorted(
        k for k in knots if obstacle.r_max * 1.05 < k < r_outer * (1 - 1e-12))
    rho1 = inner_knots[0] if inner_knots else r_outer
    cuts = [rho1] + inner_knots[1:] + [r_outer] if inner_knots else [rho1]
    ideal = [_ideal_inner_count(r_obs, b_local, rho1, dtheta, r_cap)]
    ideal += [max(1, round((cuts[i + 1] - cuts[i]) / r_cap))
              for i in range(len(cuts) - 1)]
    n_req = sum(ideal) if n_radial is None else n_radial
    try:
        counts = _allocate(ideal, n_req)
    except ValueError:
        rho1, cuts, counts = r_outer, [r_outer], [n_req]
    rad = [_boundary_layer_radii(r_obs, b_local, rho1, dtheta, r_cap, counts[0])]
    for i, n in enumerate(counts[1:]):
        circle_r = np.linspace(cuts[i], cuts[i + 1], n + 1)[1:]
        rad.append(np.broadcast_to(circle_r[:, None], (n, n_theta)).copy())
    return np.vstack(rad)


def _split_quads(n_theta: int, ring_index: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """Triangulate the quad grid, cutting each quad along its shorter diagonal."""
    tris = []
    n_rings = ring_index.shape[0]
    for j in range(n_rings - 1):
        v00 = ring_index[j]
        v01 = ring_index[j + 1]
        v10 = np.roll(v00, -1)
        v11 = np.roll(v01, -1)
        d_a = np.einsum("id,id->i", coords[v00] - coords[v11], coords[v00] - coords[v11])
        d_b = np.einsum("id,id->i", coords[v10] - coords[v01], coords[v10] - coords[v01])
        i = np.arange(n_theta)
        use_a = (d_a < d_b) | ((d_a == d_b) & ((i + j) % 2 == 0))
        # CCW per triangle: the physical loop around a quad runs
        # v00 -> v01 -> v11 -> v10
        t1 = np.where(use_a[:, None], np.stack([v00, v01, v11], 1),
                      np.stack([v00, v01, v10], 1))
        t2 = np.where(use_a[:, None], np.stack([v00, v11, v10], 1),
                      np.stack([v01, v11, v10], 1))
        tris.append(t1)
        tris.append(t2)
    return np.vstack(tris)


def mesh_annulus(obstacle: StarObstacle, r_outer: float, n_theta: int,
                 n_radial: int, knots=CUTOFF_KNOT_RADII) -> TriMesh:
    """Triangulate the annulus between the obstacle curve and the outer circle."""
    if n_theta < 8 or n_theta % 2:
        raise ValueError("n_theta must be even and at least 8")
    if n_radial < 2:
        raise ValueError("n_radial must be at least 2")
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    r_obs = np.asarray(obstacle.radial_fn(theta), float)
    if np.any(r_obs >= r_outer) or obstacle.r_max >= r_outer:
        raise ValueError("obstacle reaches or exceeds the outer radius")
    if np.any(r_obs <= 0):
        raise ValueError("obstacle radial function must be positive")

    rad = _annulus_radii(obstacle, r_outer, n_theta, n_radial, knots)
    n_rings = rad.shape[0]
    coords = np.empty((n_rings * n_theta, 2))
    ring_index = np.arange(n_rings * n_theta).reshape(n_rings, n_theta)
    coords[:, 0] = (rad * np.cos(theta)).ravel()
    coords[:, 1] = (rad * np.sin(theta)).ravel()

    tris = _split_quads(n_theta, ring_index, coords)
    tags = np.zeros(coords.shape[0], np.int8)
    tags[ring_index[0]] = TAG_OBSTACLE
    tags[ring_index[-1]] = TAG_OUTER
    structure = PolarStructure("annulus", n_theta, n_rings - 1,
                               rad.min(axis=1), rad)
    return TriMesh(coords, tris, tags, structure=structure)


def mesh_disk(r_outer: float, n_theta: int, n_radial: int,
              knots=CUTOFF_KNOT_RADII) -> TriMesh:
    """Triangulate the disk with a central vertex fan on the innermost ring."""
    if n_theta < 8 or n_theta % 2:
        raise ValueError("n_theta must be even and at least 8")
    if n_radial < 1:
        raise ValueError("n_radial must be at least 1")
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    targets = _disk_targets(r_outer, n_theta, n_radial, knots)
    ring_r = targets[1:]  # circles; ring "0" collapses to the centre vertex
    n_rings = ring_r.size
    coords = np.empty((1 + n_rings * n_theta, 2))
    coords[0] = 0.0
    ring_index = 1 + np.arange(n_rings * n_theta).reshape(n_rings, n_theta)
    coords[1:, 0] = (ring_r[:, None] * np.cos(theta)).ravel()
    coords[1:, 1] = (ring_r[:, None] * np.sin(theta)).ravel()

    fan = np.stack([np.zeros(n_theta, np.int64), ring_index[0],
                    np.roll(ring_index[0], -1)], axis=1)
    tris = fan if n_rings == 1 else np.vstack(
        [fan, _split_quads(n_theta, ring_index, coords)])
    tags = np.zeros(coords.shape[0], np.int8)
    tags[ring_index[-1]] = TAG_OUTER
    structure = PolarStructure("disk", n_theta, n_rings, targets, None)
    return TriMesh(coords, tris, tags, structure=structure)


def auto_n_radial(obstacle: StarObstacle | None, r_outer: float, n_theta: int,
                  knots=CUTOFF_KNOT_RADII) -> int:
    """Radial interval count giving approximately uniform edge lengths."""
    if obstacle is None:
        return _disk_targets(r_outer, n_theta, None, knots).size - 1
    return _annulus_radii(obstacle, r_outer, n_theta, None, knots).shape[0] - 1


def locate(mesh: TriMesh, points: np.ndarray, tol: float = 1e-10):
    """Find containing triangles via the polar index map.

    Returns (tri_indices, barycentric (P, 3)).  Raises ValueError for points
    outside the meshed domain.
    """
    pts = np.atleast_2d(np.asarray(points, float))
    st = mesh.structure
    if st is None:
        raise ValueError("mesh has no polar structure")
    n_theta = st.n_theta
    dtheta = 2.0 * np.pi / n_theta
    tri_of_quad = _quad_triangle_table(mesh)
    out_t = np.empty(pts.shape[0], np.int64)
    out_b = np.empty((pts.shape[0], 3))
    for p_idx, p in enumerate(pts):
        theta = math.atan2(p[1], p[0]) % (2.0 * np.pi)
        r = math.hypot(p[0], p[1])
        i0 = int(theta / dtheta) % n_theta
        radii = st.ring_radii(theta)
        j0 = int(np.clip(np.searchsorted(radii, r) - 1, 0, len(radii) - 2))
        hit = None
        for dj in (0, -1, 1, -2, 2):
            for di in (0, -1, 1):
                j = j0 + dj
                if not 0 <= j <= len(radii) - 2:
                    continue
                i = (i0 + di) % n_theta
                for t in tri_of_quad[j * n_theta + i]:
                    b = _barycentric(mesh, t, p)
                    if b.min() >= -tol:
                        hit = (t, b)
                        break
                if hit:
                    break
            if hit:
                break
        if hit is None:
            hit = _locate_fallback(mesh, p, tol)
        out_t[p_idx] = hit[0]
        out_b[p_idx] = np.clip(hit[1], 0.0, 1.0)
    return out_t, out_b


def _barycentric(mesh: TriMesh, t: int, p: np.ndarray) -> np.ndarray:
    v = mesh.vertices[mesh.triangles[t]]
    m = np.array([[v[1, 0] - v[0, 0], v[2, 0] - v[0, 0]],
                  [v[1, 1] - v[0, 1], v[2, 1] - v[0, 1]]])
    rhs = p - v[0]
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    l1 = (m[1, 1] * rhs[0] - m[0, 1] * rhs[1]) / det
    l2 = (-m[1, 0] * rhs[0] + m[0, 0] * rhs[1]) / det
    return np.array([1.0 - l1 - l2, l1, l2])


def _quad_triangle_table(mesh: TriMesh):
    cache = getattr(mesh, "_quad_table", None)
    if cache is not None:
        return cache
    st = mesh.structure
    n_theta = st.n_theta
    centroids = mesh.vertices[mesh.triangles].mean(axis=1)
    theta = np.arctan2(centroids[:, 1], centroids[:, 0]) % (2.0 * np.pi)
    i = (theta / (2.0 * np.pi / n_theta)).astype(int) % n_theta
    n_quads = (len(st.targets) - 1) * n_theta
    table = [[] for _ in range(n_quads)]
    for t in range(len(mesh.triangles)):
        radii = st.ring_radii(theta[t])
        r = math.hypot(*centroids[t])
        j = int(np.clip(np.searchsorted(radii, r) - 1, 0, len(radii) - 2))
        for jj in (j - 1, j, j + 1):
            if 0 <= jj <= len(radii) - 2:
                table[jj * n_theta + i[t]].append(t)
    mesh._quad_table = table
    return table


def _locate_fallback(mesh: TriMesh, p: np.ndarray, tol: float):
    from scipy.spatial import cKDTree

    tree = getattr(mesh, "_centroid_tree", None)
    if tree is None:
        tree = cKDTree(mesh.vertices[mesh.triangles].mean(axis=1))
        mesh._centroid_tree = tree
    _, idx = tree.query(p, k=min(32, len(mesh.triangles)))
    for t in np.atleast_1d(idx):
        b = _barycentric(mesh, int(t), p)
        if b.min() >= -1e-8:
            return int(t), b
    raise ValueError(f"point {p} lies outside the meshed domain")
