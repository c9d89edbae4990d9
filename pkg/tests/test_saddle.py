import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from surfsplit.analysis import error_l2
from surfsplit.errors import ConfigurationError, SolverError
from surfsplit.fem import (
    FEFunction,
    assemble_load,
    assemble_mass,
    assemble_point_load,
    assemble_stiffness,
    assemble_weighted_gradient_form,
    assemble_weighted_mass,
    lift,
)
from surfsplit.geometry import (
    ProblemSpec,
    ScalarField,
    constant,
    coordinate,
    delta_problem_fields,
    exp_x3,
    monomial,
    smooth_problem_fields,
)
from surfsplit.mesh import NORTH_POLE
from surfsplit.quadrature import get_rule
from surfsplit.saddle import (
    SaddleSystem,
    _shifted,
    _tangential_coefficient,
    apply_Gh,
    b_load,
    b_matrix,
    build_system,
    ritz_project,
    solve,
)

FOUR_PI = 4 * math.pi


def test_standard_blocks(meshes):
    m = meshes(3)
    spec = smooth_problem_fields()
    sysm = build_system(spec, m)
    C_ref = assemble_weighted_gradient_form(m, _tangential_coefficient(spec.B)) + assemble_weighted_mass(
        m, _shifted(spec.C, -1.0)
    )
    assert abs(sysm.Cmat - C_ref).max() <= 1e-12
    S, M = assemble_stiffness(m), assemble_mass(m)
    assert abs(sysm.Kmat - (S + M)).max() <= 1e-14
    assert abs(sysm.Mmat - M).max() == 0.0
    assert sysm.Gvec.sum() == pytest.approx(assemble_load(m, spec.G).sum(), abs=1e-14)
    assert np.allclose(sysm.Fvec, assemble_load(m, spec.F), atol=0)


def test_delta_blocks(meshes):
    m = meshes(3)
    sysm = build_system(delta_problem_fields(), m)
    expected = (
        assemble_point_load(m, NORTH_POLE, 1.0)
        - assemble_load(m, constant(1.0)) / FOUR_PI
        - 3 * assemble_load(m, coordinate(2)) / FOUR_PI
    )
    assert np.allclose(sysm.Fvec, expected, atol=1e-15)
    S, M = assemble_stiffness(m), assemble_mass(m)
    assert abs(sysm.Cmat - (-S + 2 * M)).max() <= 1e-15


@pytest.mark.parametrize("problem", ["smooth", "delta"])
def test_block_symmetry(meshes, problem):
    spec = smooth_problem_fields() if problem == "smooth" else delta_problem_fields()
    for level in range(5):
        A = build_system(spec, meshes(level)).block_matrix()
        scale = abs(A).max()
        assert abs(A - A.T).max() <= 1e-13 * scale


def test_point_load_must_hit_vertex(meshes):
    spec = ProblemSpec("delta", point_loads=(((0.6, 0.0, 0.8), 1.0),))
    with pytest.raises(ConfigurationError):
        build_system(spec, meshes(2))


@pytest.mark.parametrize("level", range(1, 6))
@pytest.mark.parametrize("method", ["direct", "iterative"])
def test_zero_data_gives_zero(meshes, level, method):
    spec = ProblemSpec("standard", B=smooth_problem_fields().B, C=smooth_problem_fields().C)
    rep = solve(build_system(spec, meshes(level)), 1e-10, method)
    assert np.max(np.abs(rep.u_h.coefficients)) <= 1e-10
    assert np.max(np.abs(rep.w_h.coefficients)) <= 1e-10


def test_solution_unique_for_random_data(meshes):
    m = meshes(3)
    base = build_system(smooth_problem_fields(), m)
    rng = np.random.default_rng(1)
    sysm = SaddleSystem(m, base.Cmat, base.Kmat, base.Mmat, rng.normal(size=m.n_vertices), rng.normal(size=m.n_vertices))
    rep = solve(sysm, 1e-12)
    x = np.concatenate([rep.u_h.coefficients, rep.w_h.coefficients])
    A = sysm.block_matrix()
    assert np.linalg.norm(A @ x - sysm.rhs()) <= 1e-12 * np.linalg.norm(sysm.rhs())
    assert rep.residual <= 1e-12


@pytest.mark.parametrize("problem", ["smooth", "delta"])
def test_direct_and_iterative_agree(meshes, problem):
    spec = smooth_problem_fields() if problem == "smooth" else delta_problem_fields()
    sysm = build_system(spec, meshes(4))
    d = solve(sysm, 1e-10, "direct")
    it = solve(sysm, 1e-10, "iterative")
    assert d.residual <= 1e-10 and it.residual <= 1e-10
    assert it.iterations > 0
    assert np.allclose(d.u_h.coefficients, it.u_h.coefficients, atol=1e-8)
    assert np.allclose(d.w_h.coefficients, it.w_h.coefficients, atol=1e-8)


def test_solve_deterministic(meshes):
    sysm = build_system(smooth_problem_fields(), meshes(4))
    a, b = solve(sysm), solve(sysm)
    assert np.array_equal(a.u_h.coefficients, b.u_h.coefficients)
    assert np.array_equal(a.w_h.coefficients, b.w_h.coefficients)


def test_solve_rejects_bad_tol(meshes):
    sysm = build_system(smooth_problem_fields(), meshes(1))
    for tol in (0.0, 1e-5, -1.0):
        with pytest.raises(ValueError):
            solve(sysm, tol)
    with pytest.raises(ValueError):
        solve(sysm, 1e-10, "cg")


def test_singular_system_reports_failure(meshes):
    m = meshes(2)
    S, M = assemble_stiffness(m), assemble_mass(m)
    zero = sp.csr_matrix(S.shape)
    rhs = np.ones(m.n_vertices)
    sysm = SaddleSystem(m, zero, S, M, rhs, rhs)
    with pytest.raises(SolverError):
        solve(sysm, 1e-10)


@pytest.mark.parametrize("level", range(1, 7))
@pytest.mark.parametrize("problem", ["smooth", "delta"])
def test_levels_solve(meshes, level, problem):
    spec = smooth_problem_fields() if problem == "smooth" else delta_problem_fields()
    rep = solve(build_system(spec, meshes(level)), 1e-10)
    assert rep.residual <= 1e-10


@pytest.mark.parametrize("problem", ["smooth", "delta"])
def test_a_priori_stability(meshes, problem):
    spec = smooth_problem_fields() if problem == "smooth" else delta_problem_fields()
    norms = []
    for level in range(1, 7):
        sysm = build_system(spec, meshes(level))
        rep = solve(sysm)
        u, w = rep.u_h.coefficients, rep.w_h.coefficients
        norms.append(math.sqrt(u @ (sysm.Kmat @ u)) + math.sqrt(w @ (sysm.Kmat @ w)))
    # the delta problem's w is not in H1, so its discrete H1 norm grows like sqrt(log(1/h))
    bound = 1.5 if problem == "smooth" else 2.5
    assert max(norms) / min(norms) < bound
    assert all(np.isfinite(norms))


def test_apply_Gh_inverse(meshes):
    m = meshes(3)
    K = b_matrix(m)
    v = np.random.default_rng(2).normal(size=m.n_vertices)
    assert np.allclose(apply_Gh(m, K @ v).coefficients, v, atol=1e-10)
    with pytest.raises(ValueError):
        apply_Gh(m, np.zeros(3))


def test_apply_Gh_recovers_x3(meshes):
    """-Lap u + u = 3 x3 has solution x3."""
    errs = []
    for level in range(2, 6):
        m = meshes(level)
        rhs = assemble_mass(m) @ (3 * m.vertices[:, 2])
        errs.append(error_l2(m, apply_Gh(m, rhs), coordinate(2)))
    rates = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert rates[-1] == pytest.approx(2.0, abs=0.1)


@settings(max_examples=20, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 2**31 - 1))
def test_apply_Gh_linear(a, b, seed):
    from surfsplit.mesh import build_octahedron_sphere

    m = build_octahedron_sphere(2)
    rng = np.random.default_rng(seed)
    r1, r2 = rng.normal(size=(2, m.n_vertices))
    lhs = apply_Gh(m, a * r1 + b * r2).coefficients
    rhs = a * apply_Gh(m, r1).coefficients + b * apply_Gh(m, r2).coefficients
    assert np.allclose(lhs, rhs, atol=1e-10)


def test_ritz_fixes_discrete_functions(meshes):
    m = meshes(2)
    fe = FEFunction(m, np.random.default_rng(3).normal(size=m.n_vertices))
    # interior points: the lifted gradient jumps across triangle edges
    proj = ritz_project(m, lift(fe), get_rule(2, interior=True))
    assert np.allclose(proj.coefficients, fe.coefficients, atol=1e-10)


def test_ritz_x3_decay(meshes):
    errs = []
    for level in range(1, 6):
        m = meshes(level)
        errs.append(error_l2(m, ritz_project(m, coordinate(2)), coordinate(2)))
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert math.log2(errs[-2] / errs[-1]) == pytest.approx(2.0, abs=0.1)


@pytest.mark.parametrize("psi", [coordinate(2), monomial((1, 1, 1)), exp_x3()], ids=lambda f: f.name)
def test_ritz_galerkin_orthogonality(meshes, psi):
    m = meshes(4)
    K = b_matrix(m)
    proj = ritz_project(m, psi, K=K)
    defect = b_load(m, psi) - K @ proj.coefficients
    v = np.random.default_rng(4).normal(size=m.n_vertices)
    assert abs(defect @ v) <= 1e-10
    assert np.max(np.abs(defect)) <= 1e-10


def test_ritz_constant(meshes):
    m = meshes(3)
    proj = ritz_project(m, constant(2.0))
    assert np.allclose(proj.coefficients, 2.0, atol=1e-12)
    assert isinstance(constant(1.0), ScalarField)
