"""Structured triangulations of the L-shape and of rectangles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError

LSHAPE_CORNERS = [(0.0, 0.0), (2.0, 0.0), (2.0, 1.0), (1.0, 1.0), (1.0, 2.0), (0.0, 2.0)]


@dataclass(frozen=True)
class Mesh:
    """Conforming triangulation with a counterclockwise boundary loop.

    ``boundary_edges[k] = (a, b)`` runs from vertex ``a`` to ``b`` with the
    domain on the left, so the outward normal is ``(dy, -dx) / length``.
    Boundary vertex ``k`` is the start vertex of edge ``k``.
    """

    vertices: np.ndarray  # (N_p, 2)
    triangles: np.ndarray  # (T, 3), counterclockwise
    boundary_edges: np.ndarray  # (N_b, 2)
    domain_tag: str = "l-shape"

    def __post_init__(self):
        V = np.asarray(self.vertices, dtype=float)
        T = np.asarray(self.triangles, dtype=np.int64)
        E = np.asarray(self.boundary_edges, dtype=np.int64)
        if V.ndim != 2 or V.shape[1] != 2 or T.ndim != 2 or T.shape[1] != 3:
            raise ValidationError("vertices must be (N, 2) and triangles (T, 3)")
        if T.size and (T.min() < 0 or T.max() >= len(V)):
            raise ValidationError("triangle index out of range")
        object.__setattr__(self, "vertices", V)
        object.__setattr__(self, "triangles", T)
        object.__setattr__(self, "boundary_edges", E.reshape(-1, 2))
        if np.any(self.areas() <= 0):
            raise ValidationError("degenerate or clockwise triangle")
        if len(E) and not np.array_equal(np.roll(E[:, 0], -1), E[:, 1]):
            raise ValidationError("boundary edges do not form a closed loop")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def boundary_vertices(self) -> np.ndarray:
        return self.boundary_edges[:, 0]

    def areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def edge_lengths(self) -> np.ndarray:
        d = self.vertices[self.boundary_edges[:, 1]] - self.vertices[self.boundary_edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    def outward_normals(self) -> np.ndarray:
        d = self.vertices[self.boundary_edges[:, 1]] - self.vertices[self.boundary_edges[:, 0]]
        return np.column_stack([d[:, 1], -d[:, 0]]) / self.edge_lengths()[:, None]

    def check_normals(self) -> bool:
        """Every outward normal points away from the triangle owning its edge."""
        owner = {}
        for t, tri in enumerate(self.triangles):
            for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
                owner[(a, b)] = t
        cent = self.vertices[self.triangles].mean(axis=1)
        normals = self.outward_normals()
        for k, (a, b) in enumerate(self.boundary_edges):
            t = owner.get((int(a), int(b)))
            if t is None:
                return False
            mid = 0.5 * (self.vertices[a] + self.vertices[b])
            if np.dot(normals[k], mid - cent[t]) <= 0:
                return False
        return True

    def nearest_boundary_vertex(self, point) -> int:
        """Index in the boundary ordering of the boundary vertex closest to ``point``."""
        d = self.vertices[self.boundary_vertices] - np.asarray(point, dtype=float)
        return int(np.argmin(np.hypot(d[:, 0], d[:, 1])))


def _grid_count(length: float, h: float) -> int:
    k = length / h
    if abs(k - round(k)) > 1e-9 * max(k, 1.0) or round(k) < 1:
        raise ValidationError(f"h={h} must divide the side length {length}")
    return int(round(k))


def _structured(nx: int, ny: int, h: float, keep_square) -> tuple[np.ndarray, np.ndarray, dict]:
    index = {}
    verts = []
    for j in range(ny + 1):
        for i in range(nx + 1):
            touches = any(keep_square(a, b) for a in (i - 1, i) for b in (j - 1, j)
                          if 0 <= a < nx and 0 <= b < ny)
            if touches:
                index[(i, j)] = len(verts)
                verts.append((i * h, j * h))
    tris = []
    for j in range(ny):
        for i in range(nx):
            if not keep_square(i, j):
                continue
            v00, v10 = index[(i, j)], index[(i + 1, j)]
            v11, v01 = index[(i + 1, j + 1)], index[(i, j + 1)]
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    return np.array(verts), np.array(tris, dtype=np.int64), index


def _boundary_loop(corners, h: float, index: dict) -> np.ndarray:
    pts = []
    for (x0, y0), (x1, y1) in zip(corners, corners[1:] + corners[:1]):
        k = _grid_count(max(abs(x1 - x0), abs(y1 - y0)), h)
        for s in range(k):
            x = x0 + (x1 - x0) * s / k
            y = y0 + (y1 - y0) * s / k
            pts.append(index[(int(round(x / h)), int(round(y / h)))])
    pts = np.array(pts, dtype=np.int64)
    return np.column_stack([pts, np.roll(pts, -1)])


def mesh_lshape(h: float) -> Mesh:
    """Structured triangulation of ``[0, 2]^2`` minus ``(1, 2]^2``.

    ``1 / h`` must be an integer; every square of side ``h`` is cut along its
    diagonal into two triangles. The boundary loop starts at the origin and
    runs counterclockwise.
    """
    if not h > 0:
        raise ValidationError("h must be positive")
    if h > 1:
        raise ValidationError("h must not exceed the width of the L legs (1)")
    half = _grid_count(1.0, h)
    n = 2 * half
    verts, tris, index = _structured(n, n, h, lambda i, j: not (i >= half and j >= half))
    return Mesh(verts, tris, _boundary_loop(LSHAPE_CORNERS, h, index), "l-shape")


def mesh_rectangle(lx: float, ly: float, h: float) -> Mesh:
    """Structured triangulation of ``[0, lx] x [0, ly]``."""
    if not h > 0:
        raise ValidationError("h must be positive")
    nx, ny = _grid_count(lx, h), _grid_count(ly, h)
    verts, tris, index = _structured(nx, ny, h, lambda i, j: True)
    corners = [(0.0, 0.0), (lx, 0.0), (lx, ly), (0.0, ly)]
    return Mesh(verts, tris, _boundary_loop(corners, h, index), "rectangle")
