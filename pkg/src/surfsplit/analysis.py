"""Error norms, convergence orders and numerical checks of the splitting hypotheses."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla

from surfsplit.errors import SolverError
from surfsplit.fem import FEFunction, element_geometry, integrate
from surfsplit.geometry import ProblemSpec, ScalarField, coordinate, exp_x3, monomial
from surfsplit.mesh import SurfaceMesh, build_octahedron_sphere, refine
from surfsplit.quadrature import QuadratureRule, assembly_rule, error_rule
from surfsplit.saddle import b_matrix, build_system, ritz_project, solve

DENSE_INFSUP_MAX_LEVEL = 4
DENSE_COERCIVITY_MAX_LEVEL = 3


def _check_error_quad(quad: QuadratureRule):
    if quad.degree < 4 or not quad.interior:
        raise ValueError("error integration needs an all-interior rule of degree >= 4")


def error_l2(mesh: SurfaceMesh, fe: FEFunction, exact: ScalarField, quad: QuadratureRule | None = None, geo=None) -> float:
    """``||u_h - u o p||`` in L2 of the discrete surface."""
    quad = error_rule() if quad is None else quad
    _check_error_quad(quad)

    def sq(x, lam):
        d = fe.values_at(lam) - exact.evaluate(x)
        return d * d

    return math.sqrt(integrate(mesh, sq, quad, geo))


def gradient_error_sq(mesh, fe, exact, quad, geo=None) -> float:
    geo = element_geometry(mesh) if geo is None else geo
    gh = fe.gradients(geo)
    nrm = geo.normals

    def sq(x, lam):
        g = exact.ambient_gradient(x)
        g = g - np.sum(g * nrm, axis=1)[:, None] * nrm
        d = gh - g
        return np.sum(d * d, axis=1)

    return integrate(mesh, sq, quad, geo)


def error_h1(mesh: SurfaceMesh, fe: FEFunction, exact: ScalarField, quad: QuadratureRule | None = None, geo=None) -> float:
    """Full H1 error on the discrete surface; the exact gradient is pulled back through ``p``."""
    quad = error_rule() if quad is None else quad
    _check_error_quad(quad)
    if not exact.has_gradient:
        raise ValueError("exact field has no gradient")
    geo = element_geometry(mesh) if geo is None else geo
    l2 = error_l2(mesh, fe, exact, quad, geo)
    return math.sqrt(l2 * l2 + gradient_error_sq(mesh, fe, exact, quad, geo))


def h1_norm(mesh: SurfaceMesh, f: ScalarField, quad: QuadratureRule | None = None, geo=None) -> float:
    """``||f o p||_{H1(Gamma_h)}``."""
    quad = error_rule() if quad is None else quad
    zero = FEFunction.zeros(mesh)
    return error_h1(mesh, zero, f, quad, geo)


def eoc(errors: Sequence[float], hs: Sequence[float]) -> list[Optional[float]]:
    """Orders between consecutive entries; the first entry, and any with a nonpositive error, is ``None``."""
    if len(errors) != len(hs):
        raise ValueError("errors and hs differ in length")
    if len(errors) < 2:
        raise ValueError("need at least two levels")
    out: list[Optional[float]] = [None]
    for k in range(1, len(errors)):
        e0, e1, h0, h1 = errors[k - 1], errors[k], hs[k - 1], hs[k]
        if e0 is None or e1 is None or not (e0 > 0 and e1 > 0) or not (h0 > 0 and h1 > 0) or h0 == h1:
            out.append(None)
        else:
            out.append(math.log(e0 / e1) / math.log(h0 / h1))
    return out


@dataclass
class ErrorRecord:
    level: int
    nominal_h: float
    measured_h: float
    dofs: int
    err_l2_u: Optional[float] = None
    err_h1_u: Optional[float] = None
    err_l2_w: Optional[float] = None
    err_h1_w: Optional[float] = None
    residual: Optional[float] = None
    failed: bool = False
    message: str = ""
    seconds: float = 0.0


NORMS = ("err_l2_u", "err_h1_u", "err_l2_w", "err_h1_w")


@dataclass
class ConvergenceReport:
    problem: str
    records: list = field(default_factory=list)

    def errors(self, norm: str) -> list:
        return [getattr(r, norm) for r in self.records]

    def hs(self) -> list:
        return [r.nominal_h for r in self.records]

    def eocs(self, norm: str) -> list:
        if len(self.records) < 2:
            return [None] * len(self.records)
        return eoc(self.errors(norm), self.hs())

    @property
    def ok(self) -> bool:
        return not any(r.failed for r in self.records)


def measure_errors(spec: ProblemSpec, mesh: SurfaceMesh, u_h: FEFunction, w_h: FEFunction, quad: QuadratureRule):
    geo = element_geometry(mesh)
    out = {}
    out["err_l2_u"] = error_l2(mesh, u_h, spec.u_exact, quad, geo)
    if spec.u_exact.has_gradient:
        out["err_h1_u"] = error_h1(mesh, u_h, spec.u_exact, quad, geo)
    out["err_l2_w"] = error_l2(mesh, w_h, spec.w_exact, quad, geo)
    if spec.w_exact.has_gradient:
        out["err_h1_w"] = error_h1(mesh, w_h, spec.w_exact, quad, geo)
    return out


def run_convergence(
    spec: ProblemSpec,
    min_level: int,
    max_level: int,
    quad_assembly: QuadratureRule | None = None,
    quad_error: QuadratureRule | None = None,
    solver: str = "direct",
    tol: float = 1e-10,
    workers=None,
) -> ConvergenceReport:
    """Solve on levels ``min_level..max_level``; a failing level is recorded and the study goes on."""
    quad_assembly = assembly_rule() if quad_assembly is None else quad_assembly
    quad_error = error_rule() if quad_error is None else quad_error
    _check_error_quad(quad_error)
    report = ConvergenceReport(spec.name)
    mesh = build_octahedron_sphere(min_level)
    for level in range(min_level, max_level + 1):
        if level > min_level:
            mesh = refine(mesh)
        t0 = time.perf_counter()
        rec = ErrorRecord(level, mesh.nominal_h, mesh.measured_h, 2 * mesh.n_vertices)
        try:
            system = build_system(spec, mesh, quad_assembly, workers=workers)
            sol = solve(system, tol, solver)
        except SolverError as exc:
            rec.failed = True
            rec.message = str(exc)
            rec.residual = exc.residual
        else:
            rec.residual = sol.residual
            for k, v in measure_errors(spec, mesh, sol.u_h, sol.w_h, quad_error).items():
                setattr(rec, k, v)
        rec.seconds = time.perf_counter() - t0
        report.records.append(rec)
    return report


@dataclass(frozen=True)
class InfSupReport:
    level: int
    lam: float
    beta: float

    @property
    def gamma(self) -> float:
        # b is symmetric and both spaces coincide, so the two constants agree
        return self.beta


def discrete_inf_sup(mesh: SurfaceMesh, lam: float = 1.0) -> InfSupReport:
    """Smallest generalized singular value of ``S + lam M`` in the discrete H1 norm.

    For the symmetric matrix ``K`` and Gram matrix ``N = S + M`` this is the
    smallest ``|mu|`` with ``K v = mu N v``.
    """
    if mesh.level > DENSE_INFSUP_MAX_LEVEL:
        raise ValueError(f"dense inf-sup estimate limited to level <= {DENSE_INFSUP_MAX_LEVEL}")
    N = b_matrix(mesh, 1.0).toarray()
    K = b_matrix(mesh, lam).toarray()
    mu = sla.eigh(K, N, eigvals_only=True)
    return InfSupReport(mesh.level, lam, float(np.min(np.abs(mu))))


@dataclass(frozen=True)
class CoercivityReport:
    level: int
    mu_min: float
    mu_max: float


def coercivity_from_matrices(Cmat, Kmat, Mmat, level: int = -1) -> CoercivityReport:
    """Spectrum bounds of ``Q v = mu M v`` with ``Q = (K^-1 M)^T C (K^-1 M) + M``."""
    C = Cmat.toarray() if hasattr(Cmat, "toarray") else np.asarray(Cmat)
    K = Kmat.toarray() if hasattr(Kmat, "toarray") else np.asarray(Kmat)
    M = Mmat.toarray() if hasattr(Mmat, "toarray") else np.asarray(Mmat)
    try:
        G = sla.solve(K, M, assume_a="sym")
    except sla.LinAlgError as exc:
        raise SolverError(f"b-form matrix singular: {exc}") from exc
    Q = G.T @ C @ G + M
    Q = 0.5 * (Q + Q.T)
    mu = sla.eigh(Q, M, eigvals_only=True)
    return CoercivityReport(level, float(mu[0]), float(mu[-1]))


def discrete_coercivity_constant(spec: ProblemSpec, mesh: SurfaceMesh, quad: QuadratureRule | None = None) -> CoercivityReport:
    """Estimate of the constant in ``C ||v||^2 <= c(G_h m(v), G_h m(v)) + m(v, v)``."""
    if mesh.level > DENSE_COERCIVITY_MAX_LEVEL:
        raise ValueError(f"dense coercivity estimate limited to level <= {DENSE_COERCIVITY_MAX_LEVEL}")
    spec_nodata = ProblemSpec(spec.kind, B=spec.B, C=spec.C, lam=spec.lam, name=spec.name)
    system = build_system(spec_nodata, mesh, quad)
    return coercivity_from_matrices(system.Cmat, system.Kmat, system.Mmat, mesh.level)


def ritz_sample_fields() -> list:
    return [coordinate(0), coordinate(2), monomial((1, 1, 0)), monomial((1, 1, 1)), exp_x3()]


def ritz_ratio(mesh: SurfaceMesh, psi: ScalarField, quad: QuadratureRule | None = None, K=None) -> float:
    """``||psi o p - Pi_h psi||_L2 / ||psi o p||_H1`` on the discrete surface."""
    quad = error_rule() if quad is None else quad
    geo = element_geometry(mesh)
    proj = ritz_project(mesh, psi, quad, K=K)
    denom = h1_norm(mesh, psi, quad, geo)
    return error_l2(mesh, proj, psi, quad, geo) / denom


def ritz_decay(levels: Sequence[int], fields: Sequence[ScalarField] | None = None, quad: QuadratureRule | None = None):
    """``[(level, max ratio over fields)]``."""
    levels = list(levels)
    if len(levels) < 2:
        raise ValueError("need at least two levels")
    fields = ritz_sample_fields() if fields is None else list(fields)
    out = []
    for level in levels:
        mesh = build_octahedron_sphere(level)
        K = b_matrix(mesh, 1.0)
        out.append((level, max(ritz_ratio(mesh, psi, quad, K) for psi in fields)))
    return out
