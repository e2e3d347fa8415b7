"""Structured triangular meshes of axis-aligned multi-rectangle domains."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

_GEOM_TOL = 1e-12


class GeometryError(ValueError):
    """Raised for an invalid multi-rectangle geometry."""


@dataclass(frozen=True)
class Rectangle:
    x: tuple[float, float]
    y: tuple[float, float]
    subdomain: int

    @property
    def width(self):
        return self.x[1] - self.x[0]

    @property
    def height(self):
        return self.y[1] - self.y[0]


@dataclass(frozen=True)
class GeometrySpec:
    """Union of non-overlapping rectangles plus clamped boundary segments.

    ``dirichlet_edges`` holds axis-aligned segments ``((x0, y0), (x1, y1))``.
    """

    rectangles: tuple[Rectangle, ...]
    dirichlet_edges: tuple[tuple[tuple[float, float], tuple[float, float]], ...]
    mesh_h: float

    @classmethod
    def from_dict(cls, d):
        rects = tuple(
            Rectangle(tuple(map(float, r["x"])), tuple(map(float, r["y"])), int(r["subdomain"]))
            for r in d["rectangles"]
        )
        edges = tuple(
            (tuple(map(float, e[0])), tuple(map(float, e[1]))) for e in d["dirichlet_edges"]
        )
        return cls(rects, edges, float(d["mesh_h"]))

    def to_dict(self):
        return {
            "rectangles": [
                {"x": list(r.x), "y": list(r.y), "subdomain": r.subdomain} for r in self.rectangles
            ],
            "dirichlet_edges": [[list(a), list(b)] for a, b in self.dirichlet_edges],
            "mesh_h": self.mesh_h,
        }

    @property
    def n_subdomains(self):
        return len({r.subdomain for r in self.rectangles})


def beam3(mesh_h=1 / 22):
    """3.0 x 1.0 beam of three unit squares, clamped at both short ends."""
    rects = tuple(Rectangle((float(s), float(s + 1)), (0.0, 1.0), s) for s in range(3))
    edges = (((0.0, 0.0), (0.0, 1.0)), ((3.0, 0.0), (3.0, 1.0)))
    return GeometrySpec(rects, edges, mesh_h)


def wallslab(mesh_h=1 / 10):
    """L-shaped wall / thin elastomer layer / slab configuration.

    The wall foot (y = 0) and the free slab end (x = 3) are clamped.
    """
    rects = (
        Rectangle((0.0, 1.0), (0.0, 2.8), 0),
        Rectangle((0.0, 1.0), (2.8, 3.0), 1),
        Rectangle((0.0, 3.0), (3.0, 4.0), 2),
    )
    edges = (((0.0, 0.0), (1.0, 0.0)), ((3.0, 3.0), (3.0, 4.0)))
    return GeometrySpec(rects, edges, mesh_h)


PRESETS = {"beam3": beam3, "wallslab": wallslab}


@dataclass
class Mesh:
    vertices: np.ndarray  # (n_vertices, 2)
    triangles: np.ndarray  # (n_triangles, 3), counter-clockwise
    subdomain: np.ndarray  # (n_triangles,)
    dirichlet: np.ndarray  # (n_vertices,) bool
    dof_map: np.ndarray  # (n_vertices, 2), -1 on clamped vertices
    geometry: GeometrySpec = field(repr=False, default=None)

    @property
    def n_dofs(self):
        return int(2 * np.count_nonzero(~self.dirichlet))

    @property
    def n_subdomains(self):
        return int(self.subdomain.max()) + 1

    def signed_areas(self):
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def _breakpoints(intervals, h):
    """Grid lines: each gap between consecutive breakpoints split evenly into ~h cells."""
    pts = sorted({v for iv in intervals for v in iv})
    lines = [pts[0]]
    for a, b in zip(pts[:-1], pts[1:]):
        n = max(1, math.ceil((b - a) / h - 1e-9))
        lines.extend(a + (b - a) * k / n for k in range(1, n + 1))
    return np.asarray(lines)


def _validate(spec: GeometrySpec):
    if spec.mesh_h <= 0:
        raise GeometryError("mesh_h must be positive")
    if not spec.rectangles:
        raise GeometryError("no rectangles given")
    for r in spec.rectangles:
        if r.width <= 0 or r.height <= 0:
            raise GeometryError(f"degenerate rectangle {r}")
        if spec.mesh_h > min(r.width, r.height) + _GEOM_TOL:
            raise GeometryError(
                f"mesh_h={spec.mesh_h} exceeds the smallest side of rectangle {r}"
            )
    rects = spec.rectangles
    for i in range(len(rects)):
        for j in range(i + 1, len(rects)):
            a, b = rects[i], rects[j]
            ox = min(a.x[1], b.x[1]) - max(a.x[0], b.x[0])
            oy = min(a.y[1], b.y[1]) - max(a.y[0], b.y[0])
            if ox > _GEOM_TOL and oy > _GEOM_TOL:
                raise GeometryError(f"rectangles {a} and {b} overlap")
    ids = sorted({r.subdomain for r in rects})
    if ids != list(range(len(ids))):
        raise GeometryError("subdomain ids must be 0..S-1")
    if not spec.dirichlet_edges:
        raise GeometryError("empty Dirichlet boundary")
    total = 0.0
    for (x0, y0), (x1, y1) in spec.dirichlet_edges:
        if abs(x0 - x1) > _GEOM_TOL and abs(y0 - y1) > _GEOM_TOL:
            raise GeometryError("Dirichlet edges must be axis-aligned")
        total += math.hypot(x1 - x0, y1 - y0)
    if total <= _GEOM_TOL:
        raise GeometryError("Dirichlet boundary has zero length")


def build_mesh(spec: GeometrySpec) -> Mesh:
    """Triangulate the rectangle union on a conforming tensor grid.

    Every grid cell is cut along one diagonal, alternating with the parity
    of the cell index so the pattern is mirror symmetric when the number of
    cells across the domain is even.
    """
    _validate(spec)
    xs = _breakpoints([r.x for r in spec.rectangles], spec.mesh_h)
    ys = _breakpoints([r.y for r in spec.rectangles], spec.mesh_h)
    nx, ny = len(xs) - 1, len(ys) - 1

    cx = 0.5 * (xs[:-1] + xs[1:])
    cy = 0.5 * (ys[:-1] + ys[1:])
    cell_sub = -np.ones((nx, ny), dtype=int)
    for r in spec.rectangles:
        ix = (cx > r.x[0]) & (cx < r.x[1])
        iy = (cy > r.y[0]) & (cy < r.y[1])
        cell_sub[np.ix_(ix, iy)] = r.subdomain

    used = np.zeros((nx + 1, ny + 1), dtype=bool)
    ci, cj = np.nonzero(cell_sub >= 0)
    for di in (0, 1):
        for dj in (0, 1):
            used[ci + di, cj + dj] = True
    vid = -np.ones((nx + 1, ny + 1), dtype=int)
    vi, vj = np.nonzero(used)
    vid[vi, vj] = np.arange(len(vi))
    vertices = np.column_stack([xs[vi], ys[vj]])

    v00 = vid[ci, cj]
    v10 = vid[ci + 1, cj]
    v01 = vid[ci, cj + 1]
    v11 = vid[ci + 1, cj + 1]
    slash = (ci + cj) % 2 == 0
    # "/" diagonal: (00, 10, 11) + (00, 11, 01); "\" diagonal: (00, 10, 01) + (10, 11, 01)
    t1 = np.where(slash[:, None], np.column_stack([v00, v10, v11]), np.column_stack([v00, v10, v01]))
    t2 = np.where(slash[:, None], np.column_stack([v00, v11, v01]), np.column_stack([v10, v11, v01]))
    triangles = np.vstack([t1, t2])
    sub = np.concatenate([cell_sub[ci, cj]] * 2)

    n_v = len(vertices)
    rows = np.concatenate([triangles[:, [0, 1, 2]].ravel(), triangles[:, [1, 2, 0]].ravel()])
    cols = np.concatenate([triangles[:, [1, 2, 0]].ravel(), triangles[:, [0, 1, 2]].ravel()])
    graph = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n_v, n_v))
    n_comp, _ = connected_components(graph, directed=False)
    if n_comp != 1:
        raise GeometryError("rectangle union is not connected")

    dirichlet = _dirichlet_vertices(spec, xs, ys, cell_sub, vertices)
    if not dirichlet.any():
        raise GeometryError("Dirichlet edges contain no mesh vertex")

    free = np.flatnonzero(~dirichlet)
    dof_map = -np.ones((n_v, 2), dtype=int)
    dof_map[free, 0] = 2 * np.arange(len(free))
    dof_map[free, 1] = 2 * np.arange(len(free)) + 1

    mesh = Mesh(vertices, triangles, sub, dirichlet, dof_map, spec)
    if np.any(mesh.signed_areas() <= 0):
        raise GeometryError("non-positive triangle area")
    return mesh


def _dirichlet_vertices(spec, xs, ys, cell_sub, vertices):
    nx, ny = cell_sub.shape

    def inside(i, j):
        return 0 <= i < nx and 0 <= j < ny and cell_sub[i, j] >= 0

    flags = np.zeros(len(vertices), dtype=bool)
    for (x0, y0), (x1, y1) in spec.dirichlet_edges:
        if abs(x0 - x1) <= _GEOM_TOL:
            lo, hi = sorted((y0, y1))
            i = int(np.argmin(np.abs(xs - x0)))
            if abs(xs[i] - x0) > _GEOM_TOL:
                raise GeometryError(f"Dirichlet edge at x={x0} is not on a grid line")
            for j in range(ny):
                if ys[j] >= lo - _GEOM_TOL and ys[j + 1] <= hi + _GEOM_TOL:
                    if inside(i - 1, j) == inside(i, j):
                        raise GeometryError("Dirichlet edge does not lie on the domain boundary")
            on = (np.abs(vertices[:, 0] - x0) <= _GEOM_TOL) & (vertices[:, 1] >= lo - _GEOM_TOL) & (
                vertices[:, 1] <= hi + _GEOM_TOL
            )
        else:
            lo, hi = sorted((x0, x1))
            j = int(np.argmin(np.abs(ys - y0)))
            if abs(ys[j] - y0) > _GEOM_TOL:
                raise GeometryError(f"Dirichlet edge at y={y0} is not on a grid line")
            for i in range(nx):
                if xs[i] >= lo - _GEOM_TOL and xs[i + 1] <= hi + _GEOM_TOL:
                    if inside(i, j - 1) == inside(i, j):
                        raise GeometryError("Dirichlet edge does not lie on the domain boundary")
            on = (np.abs(vertices[:, 1] - y0) <= _GEOM_TOL) & (vertices[:, 0] >= lo - _GEOM_TOL) & (
                vertices[:, 0] <= hi + _GEOM_TOL
            )
        flags |= on
    return flags
