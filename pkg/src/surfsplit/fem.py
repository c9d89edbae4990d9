"""Piecewise linear Lagrange elements on the polyhedral surface.

All forms are integrated over the flat triangles of the mesh.  Coefficients
are evaluated at ``p(x)`` for quadrature points ``x`` on the flat triangles,
i.e. they are pulled back from the sphere.

Element work is split into fixed-size chunks which may be handed to a thread
pool.  The chunk layout does not depend on the number of workers and the
global accumulation runs sequentially in element order, so assembled
matrices are bitwise identical for any worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from surfsplit.errors import AssemblyError
from surfsplit.geometry import MatrixField, ScalarField
from surfsplit.mesh import SurfaceMesh
from surfsplit.quadrature import QuadratureRule, assembly_rule

CHUNK_SIZE = 4096
MIN_AREA = 1e-16


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("SURFSPLIT_THREADS", "1")))
    except ValueError:
        return 1


def _map_chunks(func, n, workers=None):
    bounds = [(s, min(s + CHUNK_SIZE, n)) for s in range(0, n, CHUNK_SIZE)]
    workers = default_workers() if workers is None else workers
    if workers <= 1 or len(bounds) <= 1:
        parts = [func(s, e) for s, e in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: func(*b), bounds))
    return np.concatenate(parts, axis=0)


@dataclass(frozen=True, eq=False)
class ElementGeometry:
    """Per-triangle data of the flat surface: corners, unit normals, areas and P1 gradients."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    normals: np.ndarray
    areas: np.ndarray
    grads: np.ndarray  # (F, 3, 3): grads[t, i] is the gradient of the i-th hat function

    def points(self, bary) -> np.ndarray:
        return bary[0] * self.a + bary[1] * self.b + bary[2] * self.c

    def chunk(self, s, e) -> "ElementGeometry":
        return ElementGeometry(
            self.a[s:e], self.b[s:e], self.c[s:e], self.normals[s:e], self.areas[s:e], self.grads[s:e]
        )


def element_geometry(mesh: SurfaceMesh) -> ElementGeometry:
    a, b, c = mesh.corners()
    n = np.cross(b - a, c - a)
    nn = np.sum(n * n, axis=1)
    areas = 0.5 * np.sqrt(nn)
    if np.any(areas < MIN_AREA):
        bad = int(np.argmin(areas))
        raise AssemblyError(f"degenerate triangle {bad} with area {areas[bad]:.3e}")
    grads = np.stack([np.cross(n, c - b), np.cross(n, a - c), np.cross(n, b - a)], axis=1)
    grads /= nn[:, None, None]
    return ElementGeometry(a, b, c, n / np.sqrt(nn)[:, None], areas, grads)


def _check_quad(quad: QuadratureRule, min_degree: int):
    if quad.degree < min_degree:
        raise ValueError(f"quadrature degree {quad.degree} < required {min_degree}")


def scatter_matrix(triangles: np.ndarray, local: np.ndarray, n: int) -> sp.csr_matrix:
    """Sum (F, 3, 3) element matrices into an n x n CSR matrix, in element order."""
    rows = np.repeat(triangles, 3, axis=1).ravel()
    cols = np.tile(triangles, (1, 3)).ravel()
    keys = rows * n + cols
    uniq, inverse = np.unique(keys, return_inverse=True)
    vals = np.bincount(inverse.ravel(), weights=local.reshape(-1), minlength=len(uniq))
    r = uniq // n
    indptr = np.concatenate([[0], np.cumsum(np.bincount(r, minlength=n))])
    return sp.csr_matrix((vals, uniq % n, indptr), shape=(n, n))


def scatter_vector(triangles: np.ndarray, local: np.ndarray, n: int) -> np.ndarray:
    return np.bincount(triangles.ravel(), weights=local.reshape(-1), minlength=n)


def _assemble(mesh, local_fn, workers=None):
    geo = element_geometry(mesh)
    local = _map_chunks(lambda s, e: local_fn(geo.chunk(s, e)), mesh.n_triangles, workers)
    return local


def assemble_mass(mesh: SurfaceMesh, quad: QuadratureRule | None = None, workers=None) -> sp.csr_matrix:
    """Consistent mass matrix ``int phi_i phi_j``."""
    quad = assembly_rule() if quad is None else quad
    _check_quad(quad, 2)

    def local(g):
        out = np.zeros((len(g.areas), 3, 3))
        for lam, w in zip(quad.points, quad.weights):
            out += (w * g.areas)[:, None, None] * np.outer(lam, lam)[None]
        return out

    return scatter_matrix(mesh.triangles, _assemble(mesh, local, workers), mesh.n_vertices)


def assemble_stiffness(mesh: SurfaceMesh, workers=None) -> sp.csr_matrix:
    """``int grad phi_i . grad phi_j`` with exact (constant) gradients."""

    def local(g):
        return g.areas[:, None, None] * np.einsum("tia,tja->tij", g.grads, g.grads)

    return scatter_matrix(mesh.triangles, _assemble(mesh, local, workers), mesh.n_vertices)


def assemble_weighted_gradient_form(
    mesh: SurfaceMesh, A: MatrixField, quad: QuadratureRule | None = None, workers=None
) -> sp.csr_matrix:
    """``int grad phi_i . A(p(x)) grad phi_j``."""
    quad = assembly_rule() if quad is None else quad
    _check_quad(quad, 2)

    def local(g):
        out = np.zeros((len(g.areas), 3, 3))
        for lam, w in zip(quad.points, quad.weights):
            Aq = A.evaluate(g.points(lam))
            out += (w * g.areas)[:, None, None] * np.einsum("tia,tab,tjb->tij", g.grads, Aq, g.grads)
        # exact symmetry regardless of rounding in the triple product
        return 0.5 * (out + out.transpose(0, 2, 1))

    return scatter_matrix(mesh.triangles, _assemble(mesh, local, workers), mesh.n_vertices)


def assemble_weighted_mass(
    mesh: SurfaceMesh, cfield: ScalarField, quad: QuadratureRule | None = None, workers=None
) -> sp.csr_matrix:
    """``int c(p(x)) phi_i phi_j``."""
    quad = assembly_rule() if quad is None else quad
    _check_quad(quad, 2)

    def local(g):
        out = np.zeros((len(g.areas), 3, 3))
        for lam, w in zip(quad.points, quad.weights):
            cq = cfield.evaluate(g.points(lam))
            out += (w * g.areas * cq)[:, None, None] * np.outer(lam, lam)[None]
        return out

    return scatter_matrix(mesh.triangles, _assemble(mesh, local, workers), mesh.n_vertices)


def assemble_load(mesh: SurfaceMesh, f: ScalarField, quad: QuadratureRule | None = None, workers=None) -> np.ndarray:
    """``int f(p(x)) phi_i``."""
    quad = assembly_rule() if quad is None else quad

    def local(g):
        out = np.zeros((len(g.areas), 3))
        for lam, w in zip(quad.points, quad.weights):
            fq = f.evaluate(g.points(lam))
            out += (w * g.areas * fq)[:, None] * lam[None]
        return out

    return scatter_vector(mesh.triangles, _assemble(mesh, local, workers), mesh.n_vertices)


def assemble_gradient_load(
    mesh: SurfaceMesh, f: ScalarField, quad: QuadratureRule | None = None, workers=None
) -> np.ndarray:
    """``int grad_h (f o p) . grad phi_i``; the gradient of the pullback comes from the chain rule."""
    quad = assembly_rule() if quad is None else quad

    def local(g):
        out = np.zeros((len(g.areas), 3))
        for lam, w in zip(quad.points, quad.weights):
            dq = f.ambient_gradient(g.points(lam))
            out += (w * g.areas)[:, None] * np.einsum("tia,ta->ti", g.grads, dq)
        return out

    return scatter_vector(mesh.triangles, _assemble(mesh, local, workers), mesh.n_vertices)


def assemble_point_load(mesh: SurfaceMesh, vertex: int, weight: float = 1.0) -> np.ndarray:
    """Nodal evaluation functional ``v -> weight * v(q_vertex)``."""
    if not 0 <= vertex < mesh.n_vertices:
        raise IndexError(f"vertex {vertex} out of range for {mesh.n_vertices} vertices")
    out = np.zeros(mesh.n_vertices)
    out[vertex] = weight
    return out


@dataclass(frozen=True, eq=False)
class FEFunction:
    """P1 function on the discrete surface given by its nodal values."""

    mesh: SurfaceMesh
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float)
        if c.shape != (self.mesh.n_vertices,):
            raise ValueError(f"expected {self.mesh.n_vertices} coefficients, got shape {c.shape}")
        object.__setattr__(self, "coefficients", c)

    @classmethod
    def interpolate(cls, mesh: SurfaceMesh, f: ScalarField) -> "FEFunction":
        return cls(mesh, f.evaluate(mesh.vertices))

    @classmethod
    def zeros(cls, mesh: SurfaceMesh) -> "FEFunction":
        return cls(mesh, np.zeros(mesh.n_vertices))

    def values_at(self, lam) -> np.ndarray:
        """Values at the point with barycentric coordinates ``lam`` in every triangle."""
        c = self.coefficients[self.mesh.triangles]
        return c @ np.asarray(lam, dtype=float)

    def gradients(self, geo: ElementGeometry | None = None) -> np.ndarray:
        """Piecewise constant surface gradient, (F, 3)."""
        geo = element_geometry(self.mesh) if geo is None else geo
        c = self.coefficients[self.mesh.triangles]
        return np.einsum("ti,tia->ta", c, geo.grads)


def integrate(mesh: SurfaceMesh, integrand, quad: QuadratureRule, geo: ElementGeometry | None = None) -> float:
    """``int_{Gamma_h} integrand`` where ``integrand(points, lam)`` returns one value per triangle."""
    geo = element_geometry(mesh) if geo is None else geo
    total = np.zeros(mesh.n_triangles)
    for lam, w in zip(quad.points, quad.weights):
        total += w * integrand(geo.points(lam), lam)
    return float(np.sum(total * geo.areas))


def lift(fe: FEFunction) -> ScalarField:
    """The lift of a P1 function to the sphere, ``fe o p^{-1}``.

    A point ``y`` lies in the cone over triangle ``(a, b, c)`` when the
    solution of ``[a b c] s = y`` is nonnegative; normalizing ``s`` gives the
    barycentric coordinates of ``p^{-1}(y)``.  Point location is brute force,
    meant for tests on coarse meshes.
    """
    mesh = fe.mesh
    corners = np.stack(mesh.corners(), axis=2)  # (F, 3, 3), columns a, b, c
    inv = np.linalg.inv(corners)
    coef = fe.coefficients[mesh.triangles]

    def _locate(y):
        s = np.einsum("fij,nj->nfi", inv, y)
        score = s.min(axis=2)
        t = np.argmax(score, axis=1)
        return t, s[np.arange(len(y)), t]

    def value(y):
        t, s = _locate(y)
        lam = s / s.sum(axis=1)[:, None]
        return np.sum(coef[t] * lam, axis=1)

    def gradient(y):
        t, s = _locate(y)
        total = s.sum(axis=1)
        lam = s / total[:, None]
        rows = inv[t]  # (n, 3, 3); d s_i / dy = rows[:, i]
        dlam = (rows - lam[:, :, None] * rows.sum(axis=1)[:, None, :]) / total[:, None, None]
        return np.einsum("ni,nia->na", coef[t], dlam)

    return ScalarField(value, gradient, "lift")
