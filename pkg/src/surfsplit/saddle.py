"""The discrete coupled system and the operators built from the ``b`` form.

For trial pair ``(u_h, w_h)`` and test pair ``(eta_h, xi_h)``::

    c_h(u_h, eta_h) + b_h(eta_h, w_h) = <f_h, eta_h>
    b_h(u_h, xi_h)  - m_h(w_h, xi_h)  = <g_h, xi_h>

which in matrix form reads ``[[C, K], [K, -M]] [u; w] = [F; G]``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from surfsplit.errors import ConfigurationError, SolverError, VertexNotFoundError, AmbiguousVertexError
from surfsplit.fem import (
    FEFunction,
    assemble_gradient_load,
    assemble_load,
    assemble_mass,
    assemble_stiffness,
    assemble_weighted_gradient_form,
    assemble_weighted_mass,
    assemble_point_load,
)
from surfsplit.geometry import MatrixField, ProblemSpec, ScalarField
from surfsplit.mesh import SurfaceMesh, vertex_at
from surfsplit.quadrature import QuadratureRule, assembly_rule

log = logging.getLogger(__name__)

POINT_TOL = 1e-12
MAX_REFINEMENT_STEPS = 3


@dataclass(frozen=True, eq=False)
class SaddleSystem:
    mesh: SurfaceMesh
    Cmat: sp.csr_matrix
    Kmat: sp.csr_matrix
    Mmat: sp.csr_matrix
    Fvec: np.ndarray
    Gvec: np.ndarray
    Smat: sp.csr_matrix | None = None

    @property
    def dim(self) -> int:
        return self.Kmat.shape[0]

    def block_matrix(self) -> sp.csc_matrix:
        return sp.bmat([[self.Cmat, self.Kmat], [self.Kmat, -self.Mmat]], format="csc")

    def rhs(self) -> np.ndarray:
        return np.concatenate([self.Fvec, self.Gvec])


@dataclass(frozen=True, eq=False)
class SolveReport:
    u_h: FEFunction
    w_h: FEFunction
    residual: float
    method: str
    iterations: int = 0
    stats: dict = field(default_factory=dict)


def _tangential_coefficient(B: MatrixField) -> MatrixField:
    """``P B P - 2 I`` with ``P`` the tangential projector of the sphere."""

    def value(y):
        P = np.eye(3)[None] - y[:, :, None] * y[:, None, :]
        return P @ B.value(y) @ P - 2.0 * np.eye(3)[None]

    return MatrixField(value, f"P({B.name})P-2I")


def _shifted(C: ScalarField, shift: float) -> ScalarField:
    return ScalarField(lambda y: C.value(y) + shift, C.gradient, f"{C.name}{shift:+g}")


def build_system(
    spec: ProblemSpec, mesh: SurfaceMesh, quad: QuadratureRule | None = None, workers=None
) -> SaddleSystem:
    """Assemble ``C, K = S + lam M, M`` and the two load vectors."""
    quad = assembly_rule() if quad is None else quad
    S = assemble_stiffness(mesh, workers=workers)
    M = assemble_mass(mesh, quad, workers=workers)
    K = (S + spec.lam * M).tocsr()

    if spec.kind == "standard":
        Cmat = assemble_weighted_gradient_form(
            mesh, _tangential_coefficient(spec.B), quad, workers=workers
        ) + assemble_weighted_mass(mesh, _shifted(spec.C, -1.0), quad, workers=workers)
    else:
        Cmat = -S + 2.0 * M
    Cmat = Cmat.tocsr()

    n = mesh.n_vertices
    F = np.zeros(n) if spec.F is None else assemble_load(mesh, spec.F, quad, workers=workers)
    for point, weight in spec.point_loads:
        try:
            idx = vertex_at(mesh, point, POINT_TOL)
        except (VertexNotFoundError, AmbiguousVertexError) as exc:
            raise ConfigurationError(f"point load at {point} does not match a mesh vertex") from exc
        F = F + assemble_point_load(mesh, idx, weight)
    G = np.zeros(n) if spec.G is None else assemble_load(mesh, spec.G, quad, workers=workers)
    return SaddleSystem(mesh, Cmat, K, M.tocsr(), F, G, S)


def _relative_residual(A, x, b) -> float:
    nb = np.linalg.norm(b)
    return float(np.linalg.norm(A @ x - b) / nb)


def _direct(A, b, tol):
    try:
        lu = spla.splu(A)
    except RuntimeError as exc:
        raise SolverError(f"factorization failed: {exc}") from exc
    x = lu.solve(b)
    if not np.all(np.isfinite(x)):
        raise SolverError("factorization produced non-finite values (singular system)")
    res = _relative_residual(A, x, b)
    steps = 0
    while res > tol and steps < MAX_REFINEMENT_STEPS:
        x = x + lu.solve(b - A @ x)
        res = _relative_residual(A, x, b)
        steps += 1
    stats = {"nnz_L": int(lu.L.nnz), "nnz_U": int(lu.U.nnz), "refinement_steps": steps}
    return x, res, 0, stats


def _block_preconditioner(K, M):
    """Inverse of ``diag(K M^-1 K, M)``; the u-block mimics the fourth-order operator."""
    n = K.shape[0]
    K_solve = spla.factorized(K.tocsc())
    M_solve = spla.factorized(M.tocsc())

    def apply(r):
        return np.concatenate([K_solve(M @ K_solve(r[:n])), M_solve(r[n:])])

    return spla.LinearOperator((2 * n, 2 * n), matvec=apply, dtype=float)


def _iterative(A, b, tol, system, maxiter, sweeps=5):
    # MINRES minimizes the preconditioned residual; restart on the true
    # defect until the Euclidean residual meets the contract
    prec = _block_preconditioner(system.Kmat, system.Mmat)
    count = [0]

    def tick(_):
        count[0] += 1

    x = np.zeros_like(b)
    res = 1.0
    info = 0
    for _ in range(sweeps):
        dx, info = spla.minres(A, b - A @ x, M=prec, rtol=tol * 1e-2, maxiter=maxiter, callback=tick)
        x = x + dx
        res = _relative_residual(A, x, b)
        if res <= tol:
            break
    return x, res, count[0], {"minres_info": int(info)}


def solve(system: SaddleSystem, tol: float = 1e-10, method: str = "direct", maxiter: int = 5000) -> SolveReport:
    """Solve the block system to relative residual ``tol``.

    ``method`` is ``"direct"`` (sparse LU of the full indefinite block
    matrix) or ``"iterative"`` (MINRES with a block diagonal preconditioner
    built from ``K`` and ``M``).
    """
    if not 0.0 < tol <= 1e-6:
        raise ValueError(f"tol must lie in (0, 1e-6], got {tol}")
    mesh = system.mesh
    n = system.dim
    b = system.rhs()
    if np.linalg.norm(b) == 0.0:
        return SolveReport(FEFunction.zeros(mesh), FEFunction.zeros(mesh), 0.0, method)

    A = system.block_matrix()
    if method == "direct":
        x, res, its, stats = _direct(A, b, tol)
    elif method == "iterative":
        x, res, its, stats = _iterative(A, b, tol, system, maxiter)
    else:
        raise ValueError(f"unknown solver {method!r}")
    if not np.isfinite(res) or res > tol:
        raise SolverError(
            f"{method} solve reached relative residual {res:.3e} > {tol:.1e} at level {mesh.level}",
            residual=res,
        )
    log.debug("level %d: %s solve, residual %.2e", mesh.level, method, res)
    return SolveReport(FEFunction(mesh, x[:n]), FEFunction(mesh, x[n:]), res, method, its, stats)


def b_matrix(mesh: SurfaceMesh, lam: float = 1.0, quad: QuadratureRule | None = None, workers=None):
    """``K = S + lam M``."""
    quad = assembly_rule() if quad is None else quad
    return (assemble_stiffness(mesh, workers=workers) + lam * assemble_mass(mesh, quad, workers=workers)).tocsr()


def _solve_K(K, rhs, what):
    g = spla.spsolve(K.tocsc(), rhs)
    if not np.all(np.isfinite(g)):
        raise SolverError(f"{what}: b-form matrix is singular")
    nr = np.linalg.norm(rhs)
    res = np.linalg.norm(K @ g - rhs) / nr if nr > 0 else 0.0
    if res > 1e-12:
        raise SolverError(f"{what}: relative residual {res:.3e}", residual=res)
    return g


def apply_Gh(mesh: SurfaceMesh, rhs, lam: float = 1.0, K=None) -> FEFunction:
    """Discrete solution operator of the ``b`` form: ``b_h(G_h r, xi) = r(xi)``."""
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (mesh.n_vertices,):
        raise ValueError(f"rhs must have length {mesh.n_vertices}")
    K = b_matrix(mesh, lam) if K is None else K
    return FEFunction(mesh, _solve_K(K, rhs, "apply_Gh"))


def b_load(mesh: SurfaceMesh, phi: ScalarField, quad: QuadratureRule | None = None, lam: float = 1.0, workers=None):
    """``b_h(phi o p, phi_i)`` for every hat function."""
    quad = assembly_rule() if quad is None else quad
    return assemble_gradient_load(mesh, phi, quad, workers=workers) + lam * assemble_load(
        mesh, phi, quad, workers=workers
    )


def ritz_project(
    mesh: SurfaceMesh, phi: ScalarField, quad: QuadratureRule | None = None, lam: float = 1.0, K=None
) -> FEFunction:
    """``b``-orthogonal projection of ``phi o p`` onto the P1 space."""
    K = b_matrix(mesh, lam, quad) if K is None else K
    return FEFunction(mesh, _solve_K(K, b_load(mesh, phi, quad, lam), "ritz_project"))
