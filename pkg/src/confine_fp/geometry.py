"""Disk meshes, boundary distance and triangle quadrature.

The computational domain is always a disk ``B(0, radius)``.  It is
triangulated by concentric rings: ring ``k`` (``k = 1..n_rings``) sits at
radius ``k * radius / n_rings`` and carries ``6k`` equally spaced vertices,
the first of which lies on the positive x axis.  Neighbouring rings are
stitched together by merging their angular orderings, which keeps the mesh
invariant under rotations by 60 degrees.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import EvaluationError, InvalidArgument

BOUNDARY_TOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Conforming triangulation of a disk.

    ``boundary_normals`` holds one outward unit vector per boundary vertex,
    ordered like ``np.flatnonzero(boundary_mask)``.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_mask: np.ndarray
    boundary_normals: np.ndarray
    radius: float
    n_rings: int = 0

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def h(self) -> float:
        """Nominal mesh size (ring spacing)."""
        return self.radius / self.n_rings

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return _frozen(0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]))

    @property
    def areas(self) -> np.ndarray:
        return self.signed_areas

    @cached_property
    def basis_gradients(self) -> np.ndarray:
        """Gradients of the three barycentric hat functions, shape (T, 3, 2)."""
        p = self.vertices[self.triangles]
        x, y = p[..., 0], p[..., 1]
        two_a = 2.0 * self.signed_areas
        g = np.empty((self.n_triangles, 3, 2))
        g[:, 0, 0] = y[:, 1] - y[:, 2]
        g[:, 0, 1] = x[:, 2] - x[:, 1]
        g[:, 1, 0] = y[:, 2] - y[:, 0]
        g[:, 1, 1] = x[:, 0] - x[:, 2]
        g[:, 2, 0] = y[:, 0] - y[:, 1]
        g[:, 2, 1] = x[:, 1] - x[:, 0]
        return _frozen(g / two_a[:, None, None])

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        """Longest edge of every triangle."""
        p = self.vertices[self.triangles]
        e = np.stack(
            [
                np.linalg.norm(p[:, 1] - p[:, 0], axis=1),
                np.linalg.norm(p[:, 2] - p[:, 1], axis=1),
                np.linalg.norm(p[:, 0] - p[:, 2], axis=1),
            ],
            axis=1,
        )
        return _frozen(e.max(axis=1))

    @cached_property
    def _interpolation_triangulation(self):
        import matplotlib.tri as mtri

        return mtri.Triangulation(
            self.vertices[:, 0], self.vertices[:, 1], self.triangles
        )

    def interpolate(self, values: np.ndarray, points: np.ndarray, fill: float = 0.0) -> np.ndarray:
        """Evaluate the P1 interpolant of nodal ``values`` at ``points``.

        Points outside the polygonal domain get ``fill``.
        """
        import matplotlib.tri as mtri

        values = np.asarray(values, dtype=float)
        if values.shape != (self.n_vertices,):
            raise InvalidArgument(
                f"expected {self.n_vertices} nodal values, got shape {values.shape}"
            )
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        interp = mtri.LinearTriInterpolator(self._interpolation_triangulation, values)
        out = interp(points[:, 0], points[:, 1])
        return np.ma.filled(out.astype(float), fill)

    def ring_offset(self, k: int) -> int:
        """Index of the first vertex of ring ``k`` (ring 0 is the centre)."""
        return 0 if k == 0 else 1 + 3 * k * (k - 1)

    def rotate_vertex(self, i: int, sextants: int) -> int:
        """Index of vertex ``i`` after a rotation by ``sextants * 60`` degrees."""
        if i == 0:
            return 0
        k = int(np.floor((3 + np.sqrt(9 + 12 * (i - 1))) / 6))
        while self.ring_offset(k + 1) <= i:
            k += 1
        while self.ring_offset(k) > i:
            k -= 1
        j = i - self.ring_offset(k)
        return self.ring_offset(k) + (j + sextants * k) % (6 * k)


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Symmetric triangle rule in barycentric coordinates; weights sum to one."""

    order: int
    points: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def n_points(self) -> int:
        return self.weights.shape[0]


def _orbit3(a: float) -> list[tuple[float, float, float]]:
    b = 1.0 - 2.0 * a
    return [(b, a, a), (a, b, a), (a, a, b)]


def _make_rule(order: int, pts: list, wts: list) -> QuadratureRule:
    return QuadratureRule(order, _frozen(np.array(pts, dtype=float)), _frozen(np.array(wts, dtype=float)))


def _build_rules() -> dict[int, QuadratureRule]:
    rules = {
        1: _make_rule(1, [(1 / 3, 1 / 3, 1 / 3)], [1.0]),
        2: _make_rule(2, _orbit3(1 / 6), [1 / 3] * 3),
    }
    # Strang-Fix / Dunavant degree 4
    a4, b4 = 0.445948490915965, 0.091576213509771
    w4a, w4b = 0.223381589678011, 0.109951743655322
    rules[4] = _make_rule(4, _orbit3(a4) + _orbit3(b4), [w4a] * 3 + [w4b] * 3)
    # Radon degree 5
    s15 = np.sqrt(15.0)
    a5, b5 = (6 - s15) / 21, (6 + s15) / 21
    w5a, w5b = (155 - s15) / 1200, (155 + s15) / 1200
    rules[5] = _make_rule(
        5, [(1 / 3, 1 / 3, 1 / 3)] + _orbit3(a5) + _orbit3(b5), [0.225] + [w5a] * 3 + [w5b] * 3
    )
    return rules


_RULES = _build_rules()


def triangle_rule(order: int = 2) -> QuadratureRule:
    """Smallest tabulated rule exact for polynomials of degree ``order``.

    All tabulated rules have strictly interior points, so integrands that
    blow up on the boundary circle are never evaluated there.
    """
    if order < 1:
        raise InvalidArgument(f"quadrature order must be positive, got {order}")
    for k in sorted(_RULES):
        if k >= order:
            return _RULES[k]
    raise InvalidArgument(f"no tabulated rule of order {order} (max {max(_RULES)})")


DEFAULT_RULE = triangle_rule(2)


def build_disk_mesh(radius: float, n_rings: int) -> TriMesh:
    if not radius > 0 or not np.isfinite(radius):
        raise InvalidArgument(f"radius must be positive, got {radius}")
    if int(n_rings) != n_rings or n_rings < 1:
        raise InvalidArgument(f"n_rings must be a positive integer, got {n_rings}")
    n_rings = int(n_rings)

    n_vert = 1 + 3 * n_rings * (n_rings + 1)
    verts = np.zeros((n_vert, 2))
    offsets = [0] + [1 + 3 * k * (k - 1) for k in range(1, n_rings + 1)]
    for k in range(1, n_rings + 1):
        r = k * radius / n_rings if k < n_rings else radius
        theta = 2.0 * np.pi * np.arange(6 * k) / (6 * k)
        verts[offsets[k] : offsets[k] + 6 * k, 0] = r * np.cos(theta)
        verts[offsets[k] : offsets[k] + 6 * k, 1] = r * np.sin(theta)

    tris: list[tuple[int, int, int]] = []
    o1 = offsets[1]
    for j in range(6):
        tris.append((0, o1 + j, o1 + (j + 1) % 6))
    for k in range(2, n_rings + 1):
        n_in, n_out = 6 * (k - 1), 6 * k
        oi, oo = offsets[k - 1], offsets[k]
        i = j = 0
        while i < n_in or j < n_out:
            # exact angular comparison (j+1)/n_out <= (i+1)/n_in
            if j < n_out and (i == n_in or (j + 1) * n_in <= (i + 1) * n_out):
                tris.append((oi + i % n_in, oo + j, oo + (j + 1) % n_out))
                j += 1
            else:
                tris.append((oi + i, oo + j % n_out, oi + (i + 1) % n_in))
                i += 1
    triangles = np.array(tris, dtype=np.int64)

    rad = np.hypot(verts[:, 0], verts[:, 1])
    mask = np.abs(rad - radius) <= BOUNDARY_TOL * max(1.0, radius)
    normals = verts[mask] / rad[mask, None]
    return TriMesh(
        vertices=_frozen(verts),
        triangles=_frozen(triangles),
        boundary_mask=_frozen(mask),
        boundary_normals=_frozen(normals),
        radius=float(radius),
        n_rings=n_rings,
    )


def distance_to_boundary(mesh: TriMesh, point) -> float:
    p = np.asarray(point, dtype=float)
    r = float(np.hypot(p[0], p[1]))
    if r > mesh.radius + BOUNDARY_TOL * max(1.0, mesh.radius):
        raise InvalidArgument(f"point at radius {r} lies outside the disk of radius {mesh.radius}")
    return max(mesh.radius - r, 0.0)


def distance_field(radius: float, points: np.ndarray) -> np.ndarray:
    """Vectorised ``radius - |x|`` (no range check)."""
    points = np.asarray(points)
    return radius - np.hypot(points[..., 0], points[..., 1])


def quadrature_points(mesh: TriMesh, rule: QuadratureRule = DEFAULT_RULE) -> tuple[np.ndarray, np.ndarray]:
    """Physical quadrature points (T, q, 2) and area-scaled weights (T, q)."""
    p = mesh.vertices[mesh.triangles]
    pts = np.einsum("qa,tad->tqd", rule.points, p)
    w = mesh.areas[:, None] * rule.weights[None, :]
    return pts, w


def evaluate_at_quadrature(fn: Callable, pts: np.ndarray, what: str = "integrand") -> np.ndarray:
    """Call a vectorised field on (T, q, 2) points and check for NaN."""
    t, q, _ = pts.shape
    vals = np.asarray(fn(pts.reshape(-1, 2)), dtype=float)
    vals = vals.reshape((t, q) + vals.shape[1:])
    bad = ~np.isfinite(vals)
    if bad.any():
        tri = int(np.argwhere(bad.reshape(t, -1).any(axis=1))[0, 0])
        raise EvaluationError(f"{what} is not finite on triangle {tri}", triangle=tri)
    return vals


def integrate(mesh: TriMesh, rule: QuadratureRule, integrand: Callable[[np.ndarray], np.ndarray]) -> float:
    """Integrate a vectorised scalar field over the mesh.

    ``integrand`` receives an ``(N, 2)`` array of points and returns ``N``
    values.  Per-triangle contributions are reduced by numpy's pairwise sum
    in triangle order, so the result is reproducible bit for bit.
    """
    pts, w = quadrature_points(mesh, rule)
    vals = evaluate_at_quadrature(integrand, pts)
    return float(np.sum(np.sum(vals * w, axis=1)))


def write_mesh_csv(mesh: TriMesh, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        fh.write(f"#mesh radius={mesh.radius!r} n_rings={mesh.n_rings}\n")
        fh.write("#vertices x,y,boundary\n")
        for (x, y), b in zip(mesh.vertices, mesh.boundary_mask):
            w.writerow([repr(float(x)), repr(float(y)), int(b)])
        fh.write("#triangles i,j,k\n")
        for t in mesh.triangles:
            w.writerow([int(v) for v in t])


def read_mesh_csv(path: str | Path) -> TriMesh:
    verts, mask, tris = [], [], []
    section = None
    header = {}
    with Path(path).open() as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#mesh"):
                header = dict(kv.split("=", 1) for kv in line.split()[1:])
                continue
            if line.startswith("#vertices"):
                section = "v"
                continue
            if line.startswith("#triangles"):
                section = "t"
                continue
            parts = line.split(",")
            if section == "v":
                verts.append((float(parts[0]), float(parts[1])))
                mask.append(bool(int(parts[2])))
            elif section == "t":
                tris.append(tuple(int(p) for p in parts))
    verts = np.array(verts)
    mask = np.array(mask)
    rad = np.hypot(verts[:, 0], verts[:, 1])
    radius = float(header["radius"]) if "radius" in header else float(rad.max())
    if "n_rings" in header:
        n_rings = int(header["n_rings"])
    else:
        n_rings = int(round((-3 + np.sqrt(9 + 12 * (len(verts) - 1))) / 6)) if len(verts) > 1 else 0
    return TriMesh(
        vertices=_frozen(verts),
        triangles=_frozen(np.array(tris, dtype=np.int64)),
        boundary_mask=_frozen(mask),
        boundary_normals=_frozen(verts[mask] / rad[mask, None]),
        radius=radius,
        n_rings=n_rings,
    )
