"""Octahedral triangulations of the unit sphere.

The base mesh is the regular octahedron with vertices ``(+x, -x, +y, -y, +z, -z)``
in that order.  Each refinement splits every triangle into four by inserting
edge midpoints, which are pushed radially onto the sphere.  New vertices are
appended in the order their edge is first met when walking the triangles in
storage order and, inside a triangle ``(a, b, c)``, the edges ``ab, bc, ca``.
That ordering is part of the public contract: point loads and golden tests
index vertices by it.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from surfsplit.errors import AmbiguousVertexError, VertexNotFoundError

MAX_LEVEL = 10

_OCTAHEDRON_VERTICES = np.array(
    [
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
    ]
)

# counterclockwise seen from outside
_OCTAHEDRON_TRIANGLES = np.array(
    [
        [0, 2, 4],
        [2, 1, 4],
        [1, 3, 4],
        [3, 0, 4],
        [2, 0, 5],
        [1, 2, 5],
        [3, 1, 5],
        [0, 3, 5],
    ],
    dtype=np.int64,
)

NORTH_POLE = 4


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SurfaceMesh:
    """Triangulated sphere with all vertices on the exact surface.

    Attributes
    ----------
    vertices : (V, 3) float array
    triangles : (F, 3) int array, counterclockwise seen from outside
    level : number of refinements applied to the octahedron
    """

    vertices: np.ndarray
    triangles: np.ndarray
    level: int
    _edges: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "vertices", _frozen(np.asarray(self.vertices, dtype=float)))
        object.__setattr__(self, "triangles", _frozen(np.asarray(self.triangles, dtype=np.int64)))
        object.__setattr__(self, "_edges", _frozen(unique_edges(self.triangles)))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def edges(self) -> np.ndarray:
        """(E, 2) array of undirected edges, smaller index first."""
        return self._edges

    @property
    def n_edges(self) -> int:
        return len(self._edges)

    @property
    def nominal_h(self) -> float:
        return float(np.sqrt(2.0) / 2**self.level)

    @property
    def measured_h(self) -> float:
        return measured_h(self)

    def corners(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Coordinates of the three corners of every triangle, each (F, 3)."""
        t = self.triangles
        return self.vertices[t[:, 0]], self.vertices[t[:, 1]], self.vertices[t[:, 2]]

    def triangle_normals(self) -> np.ndarray:
        """Unnormalized outward normals; length equals twice the triangle area."""
        a, b, c = self.corners()
        return np.cross(b - a, c - a)

    def triangle_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self.triangle_normals(), axis=1)

    def area(self) -> float:
        return float(self.triangle_areas().sum())


def unique_edges(triangles: np.ndarray) -> np.ndarray:
    """Undirected edges in order of first appearance (triangle order, then ab, bc, ca)."""
    directed = np.stack(
        [triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]], axis=1
    ).reshape(-1, 2)
    undirected = np.sort(directed, axis=1)
    _, first, _ = np.unique(undirected, axis=0, return_index=True, return_inverse=True)
    return undirected[np.sort(first)]


def build_octahedron_sphere(level: int) -> SurfaceMesh:
    """Octahedron refined ``level`` times with midpoints projected onto the sphere."""
    if isinstance(level, bool) or not isinstance(level, (int, np.integer)):
        raise ValueError(f"level must be an integer, got {level!r}")
    if not 0 <= level <= MAX_LEVEL:
        raise ValueError(f"level must lie in [0, {MAX_LEVEL}], got {level}")
    mesh = SurfaceMesh(_OCTAHEDRON_VERTICES.copy(), _OCTAHEDRON_TRIANGLES.copy(), 0)
    for _ in range(int(level)):
        mesh = refine(mesh)
    return mesh


def refine(mesh: SurfaceMesh) -> SurfaceMesh:
    """One step of 1-to-4 midpoint subdivision.  Existing vertices are kept bitwise."""
    tris = mesh.triangles
    nv = mesh.n_vertices
    directed = np.stack([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]], axis=1)
    undirected = np.sort(directed.reshape(-1, 2), axis=1)
    uniq, first, inverse = np.unique(
        undirected, axis=0, return_index=True, return_inverse=True
    )
    # renumber unique edges by creation order
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    edges = uniq[order]
    mid_index = (nv + rank[inverse.reshape(-1)]).reshape(-1, 3)

    mid = mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]]
    mid /= np.linalg.norm(mid, axis=1)[:, None]
    vertices = np.vstack([mesh.vertices, mid])

    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    mab, mbc, mca = mid_index[:, 0], mid_index[:, 1], mid_index[:, 2]
    children = np.stack(
        [
            np.stack([a, mab, mca], axis=1),
            np.stack([mab, b, mbc], axis=1),
            np.stack([mca, mbc, c], axis=1),
            np.stack([mab, mbc, mca], axis=1),
        ],
        axis=1,
    ).reshape(-1, 3)
    return SurfaceMesh(vertices, children, mesh.level + 1)


def measured_h(mesh: SurfaceMesh) -> float:
    """Largest Euclidean edge length."""
    e = mesh.edges
    d = mesh.vertices[e[:, 0]] - mesh.vertices[e[:, 1]]
    return float(np.sqrt((d * d).sum(axis=1)).max())


def vertex_at(mesh: SurfaceMesh, point, tol: float = 1e-12) -> int:
    """Index of the unique vertex within ``tol`` of ``point``."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    dist = np.linalg.norm(mesh.vertices - np.asarray(point, dtype=float), axis=1)
    hits = np.flatnonzero(dist <= tol)
    if len(hits) == 0:
        raise VertexNotFoundError(f"no vertex within {tol:g} of {tuple(point)}")
    if len(hits) > 1:
        raise AmbiguousVertexError(f"{len(hits)} vertices within {tol:g} of {tuple(point)}")
    return int(hits[0])


def export_off(mesh: SurfaceMesh, path) -> None:
    """Write the mesh as ASCII OFF.  Coordinates use ``repr`` precision."""
    if not path:
        raise OSError("empty output path")
    lines = ["OFF", f"{mesh.n_vertices} {mesh.n_triangles} {mesh.n_edges}"]
    lines += [" ".join(repr(float(c)) for c in v) for v in mesh.vertices]
    lines += [f"3 {i} {j} {k}" for i, j, k in mesh.triangles]
    with open(os.fspath(path), "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_off(path, level: int = -1) -> SurfaceMesh:
    """Read a triangle-only ASCII OFF file written by :func:`export_off`."""
    with open(os.fspath(path)) as fh:
        tokens = [ln.split() for ln in fh if ln.strip() and not ln.startswith("#")]
    if tokens[0] != ["OFF"]:
        raise ValueError("missing OFF header")
    nv, nf = int(tokens[1][0]), int(tokens[1][1])
    verts = np.array([[float(x) for x in row[:3]] for row in tokens[2 : 2 + nv]])
    faces = []
    for row in tokens[2 + nv : 2 + nv + nf]:
        if row[0] != "3":
            raise ValueError("only triangular faces are supported")
        faces.append([int(x) for x in row[1:4]])
    return SurfaceMesh(verts, np.array(faces, dtype=np.int64).reshape(-1, 3), level)
