"""Calculus on the unit sphere and the data of the two sphere experiments.

Every field is defined by its values on the sphere and extended to a
neighbourhood as constant along normals, ``f_bar(x) = f(x / |x|)``.  The
ambient gradient of that extension is obtained by the chain rule through the
closest-point projection, so evaluating a field at a point of the discrete
surface is exactly the pullback ``f o p``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from surfsplit.errors import SingularPointError

_PROJECT_EPS = 1e-13
_UNIT_TOL = 1e-12
_POLE_EPS = 1e-14

FOUR_PI = 4.0 * np.pi
LOG2 = np.log(2.0)


def _rows(x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    return np.atleast_2d(x), single


def project(x) -> np.ndarray:
    """Closest point on the unit sphere, ``x / |x|``.  Accepts a 3-vector or (n, 3) rows."""
    pts, single = _rows(x)
    r = np.linalg.norm(pts, axis=1)
    if np.any(r <= _PROJECT_EPS):
        raise ValueError("cannot project a point at the centre of the sphere")
    y = pts / r[:, None]
    return y[0] if single else y


def normal(x) -> np.ndarray:
    """Outward unit normal of the sphere at ``p(x)``."""
    return project(x)


def tangent_projector(x) -> np.ndarray:
    """``P = I - nu nu^T`` at ``p(x)``; shape (3, 3) or (n, 3, 3)."""
    nu = project(x)
    return np.eye(3) - nu[..., :, None] * nu[..., None, :]


def signed_distance(x) -> np.ndarray:
    return np.linalg.norm(np.asarray(x, dtype=float), axis=-1) - 1.0


# mean curvature, summed principal curvatures of the unit sphere
MEAN_CURVATURE = 2.0


@dataclass(frozen=True)
class ScalarField:
    """Scalar function on the sphere with an optional gradient.

    ``value`` and ``gradient`` receive unit vectors as (n, 3) rows.
    ``gradient`` may return the gradient of any smooth extension; only its
    tangential part is used.
    """

    value: Callable[[np.ndarray], np.ndarray]
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = ""

    @property
    def has_gradient(self) -> bool:
        return self.gradient is not None

    def evaluate(self, x) -> np.ndarray:
        pts, single = _rows(x)
        v = np.broadcast_to(np.asarray(self.value(project(pts)), dtype=float), (len(pts),))
        return v[0] if single else np.array(v)

    def ambient_gradient(self, x) -> np.ndarray:
        """Gradient of the normal-constant extension at ``x`` (need not lie on the sphere)."""
        if self.gradient is None:
            raise ValueError(f"field {self.name or '<anonymous>'} has no gradient")
        pts, single = _rows(x)
        r = np.linalg.norm(pts, axis=1)
        y = project(pts)
        g = np.broadcast_to(np.asarray(self.gradient(y), dtype=float), pts.shape)
        g = (g - np.sum(g * y, axis=1)[:, None] * y) / r[:, None]
        return g[0] if single else g

    def __add__(self, other: "ScalarField") -> "ScalarField":
        grad = None
        if self.has_gradient and other.has_gradient:
            grad = lambda y: self.gradient(y) + other.gradient(y)  # noqa: E731
        return ScalarField(lambda y: self.value(y) + other.value(y), grad, f"{self.name}+{other.name}")

    def scaled(self, a: float) -> "ScalarField":
        grad = None if self.gradient is None else (lambda y: a * self.gradient(y))
        return ScalarField(lambda y: a * self.value(y), grad, f"{a:g}*{self.name}")


@dataclass(frozen=True)
class MatrixField:
    """Symmetric 3x3 matrix function on the sphere; ``value`` maps (n, 3) unit rows to (n, 3, 3)."""

    value: Callable[[np.ndarray], np.ndarray]
    name: str = ""

    def evaluate(self, x) -> np.ndarray:
        pts, single = _rows(x)
        a = np.broadcast_to(np.asarray(self.value(project(pts)), dtype=float), (len(pts), 3, 3))
        return np.array(a[0]) if single else np.array(a)


def tangential_gradient(f: ScalarField, x) -> np.ndarray:
    """``(I - x x^T) grad f_bar(x)`` at points of the unit sphere."""
    pts, single = _rows(x)
    if np.any(np.abs(np.linalg.norm(pts, axis=1) - 1.0) > _UNIT_TOL):
        raise ValueError("tangential_gradient expects points on the unit sphere")
    g = f.ambient_gradient(pts)
    return g[0] if single else g


def constant(c: float) -> ScalarField:
    return ScalarField(
        lambda y: np.full(len(y), float(c)), lambda y: np.zeros_like(y), f"{c:g}"
    )


def coordinate(i: int) -> ScalarField:
    e = np.eye(3)[i]
    return ScalarField(lambda y: y[:, i].copy(), lambda y: np.tile(e, (len(y), 1)), f"x{i + 1}")


def monomial(powers) -> ScalarField:
    """``x1**a * x2**b * x3**c`` restricted to the sphere."""
    p = np.asarray(powers, dtype=int)

    def value(y):
        return np.prod(y**p, axis=1)

    def gradient(y):
        g = np.empty_like(y)
        for k in range(3):
            if p[k] == 0:
                g[:, k] = 0.0
                continue
            q = p.copy()
            q[k] -= 1
            g[:, k] = p[k] * np.prod(y**q, axis=1)
        return g

    return ScalarField(value, gradient, "x^" + "".join(map(str, p)))


def exp_x3() -> ScalarField:
    def gradient(y):
        g = np.zeros_like(y)
        g[:, 2] = np.exp(y[:, 2])
        return g

    return ScalarField(lambda y: np.exp(y[:, 2]), gradient, "exp(x3)")


@dataclass(frozen=True)
class ProblemSpec:
    """Data of a split fourth-order problem on the unit sphere.

    ``kind == "standard"``:
        c(u, v) = int (P B P - 2 I) grad u . grad v + (C - 1) u v
    ``kind == "delta"``:
        c(u, v) = int -grad u . grad v + 2 u v
    In both cases b(u, v) = int grad u . grad v + lam u v and m is the L2 product.
    The first load is ``m(F, .)`` plus the point values in ``point_loads``;
    the second load is ``m(G, .)``.
    """

    kind: str
    F: Optional[ScalarField] = None
    G: Optional[ScalarField] = None
    B: Optional[MatrixField] = None
    C: Optional[ScalarField] = None
    point_loads: tuple = ()
    u_exact: Optional[ScalarField] = None
    w_exact: Optional[ScalarField] = None
    lam: float = 1.0
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("standard", "delta"):
            raise ValueError(f"unknown form kind {self.kind!r}")
        if self.kind == "standard" and (self.B is None or self.C is None):
            raise ValueError("standard form requires both B and C")


def _smooth_F(y):
    x1, x2, x3 = y[:, 0], y[:, 1], y[:, 2]
    return (
        -5.0 * x3 * (x1**3 + x2**3 + x3**3)
        + 2.0 * x3 * (x1 + x2 + x3)
        - 4.0 * x3
        + 4.0 * x3**2
        - 1.0
        + (1.0 + x1 * x2) * x3
        + 7.0 * x1 * x2
    )


def _smooth_G(y):
    return 3.0 * y[:, 2] - y[:, 0] * y[:, 1]


def _diag_B(y):
    out = np.zeros((len(y), 3, 3))
    idx = np.arange(3)
    out[:, idx, idx] = y
    return out


def smooth_problem_fields() -> ProblemSpec:
    """Smooth test case with exact solution ``u = x3``, ``w = x1 x2``."""
    B = MatrixField(_diag_B, "diag(x1,x2,x3)")
    C = ScalarField(
        lambda y: 2.0 + y[:, 0] * y[:, 1],
        lambda y: np.stack([y[:, 1], y[:, 0], np.zeros(len(y))], axis=1),
        "2+x1x2",
    )
    return ProblemSpec(
        kind="standard",
        F=ScalarField(_smooth_F, None, "F"),
        G=ScalarField(_smooth_G, None, "G"),
        B=B,
        C=C,
        u_exact=coordinate(2),
        w_exact=monomial((1, 1, 0)),
        lam=1.0,
        name="smooth",
    )


def _check_pole(x3):
    if np.any(x3 >= 1.0 - _POLE_EPS):
        raise SingularPointError("logarithmic term evaluated at the north pole")


def _delta_u(y):
    x3 = y[:, 2]
    _check_pole(x3)
    s = 1.0 - x3
    return (s * np.log(s) + 0.5 - LOG2) / (2.0 * FOUR_PI)


def _delta_u_grad(y):
    x3 = y[:, 2]
    _check_pole(x3)
    g = np.zeros_like(y)
    g[:, 2] = (-np.log(1.0 - x3) - 1.0) / (2.0 * FOUR_PI)
    return g


def _delta_w(y):
    x3 = y[:, 2]
    _check_pole(x3)
    return -(np.log(1.0 - x3) - LOG2 + 1.0 + 1.5 * x3) / FOUR_PI


def _delta_g(y):
    return 3.0 * _delta_u(y)


NORTH = (0.0, 0.0, 1.0)


def delta_problem_fields() -> ProblemSpec:
    """Point source at the north pole; ``w`` carries the logarithmic Green's function singularity."""
    smooth_rhs = ScalarField(lambda y: -(1.0 + 3.0 * y[:, 2]) / FOUR_PI, None, "-(1+3x3)/4pi")
    return ProblemSpec(
        kind="delta",
        F=smooth_rhs,
        G=ScalarField(_delta_g, None, "g"),
        point_loads=((NORTH, 1.0),),
        u_exact=ScalarField(_delta_u, _delta_u_grad, "u"),
        w_exact=ScalarField(_delta_w, None, "w"),
        lam=1.0,
        name="delta",
    )


def get_problem(name: str) -> ProblemSpec:
    if name == "smooth":
        return smooth_problem_fields()
    if name == "delta":
        return delta_problem_fields()
    raise ValueError(f"unknown problem {name!r}")
