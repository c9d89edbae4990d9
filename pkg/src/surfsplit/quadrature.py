"""Symmetric quadrature rules on triangles in barycentric coordinates.

Weights are normalized to sum to one, so ``int_T f ~= |T| * sum_q w_q f(x_q)``.
Rules of degree 4 and higher are Dunavant's; all of them have strictly
interior points.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations

import numpy as np


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    points: np.ndarray  # (n, 3) barycentric
    weights: np.ndarray  # (n,)
    degree: int
    name: str = ""

    @property
    def n_points(self) -> int:
        return len(self.weights)

    @property
    def interior(self) -> bool:
        return bool(np.all(self.points > 0.0))


def _orbit(bary) -> list:
    return sorted(set(permutations(bary)))


def _rule(orbits, degree, name) -> QuadratureRule:
    pts, wts = [], []
    for bary, w in orbits:
        for p in _orbit(bary):
            pts.append(p)
            wts.append(w)
    return QuadratureRule(np.array(pts, dtype=float), np.array(wts, dtype=float), degree, name)


def _third(a):
    return (a, a, 1.0 - 2.0 * a)


@lru_cache(maxsize=None)
def _rules() -> dict:
    s15 = np.sqrt(15.0)
    a5, b5 = (6.0 - s15) / 21.0, (6.0 + s15) / 21.0
    return {
        "centroid": _rule([((1 / 3, 1 / 3, 1 / 3), 1.0)], 1, "centroid"),
        "midpoint": _rule([((0.5, 0.5, 0.0), 1 / 3)], 2, "edge midpoint"),
        "interior2": _rule([((2 / 3, 1 / 6, 1 / 6), 1 / 3)], 2, "interior 3-point"),
        "strang-fix3": _rule(
            [((0.659027622374092, 0.231933368553031, 0.109039009072877), 1 / 6)],
            3,
            "Strang-Fix 6-point",
        ),
        "dunavant4": _rule(
            [
                (_third(0.44594849091596488632), 0.22338158967801146570),
                (_third(0.091576213509770743460), 0.10995174365532186764),
            ],
            4,
            "Dunavant 6-point",
        ),
        "dunavant5": _rule(
            [
                ((1 / 3, 1 / 3, 1 / 3), 9.0 / 40.0),
                (_third(a5), (155.0 - s15) / 1200.0),
                (_third(b5), (155.0 + s15) / 1200.0),
            ],
            5,
            "Dunavant 7-point",
        ),
        "dunavant6": _rule(
            [
                (_third(0.24928674517091042129), 0.11678627572637936603),
                (_third(0.063089014491502228340), 0.050844906370206816921),
                (
                    (0.053145049844816947353, 0.31035245103378440542, 0.63650249912139864723),
                    0.082851075618373575194,
                ),
            ],
            6,
            "Dunavant 12-point",
        ),
    }


_BY_DEGREE = {1: "centroid", 2: "midpoint", 3: "strang-fix3", 4: "dunavant4", 5: "dunavant5", 6: "dunavant6"}
_INTERIOR_BY_DEGREE = {**_BY_DEGREE, 2: "interior2"}

SUPPORTED_DEGREES = tuple(sorted(_BY_DEGREE))


def get_rule(degree: int, interior: bool = False) -> QuadratureRule:
    """Cheapest tabulated rule exact for polynomials of total degree ``degree``.

    With ``interior=True`` a rule without boundary points is returned.
    """
    table = _INTERIOR_BY_DEGREE if interior else _BY_DEGREE
    if degree not in table:
        raise ValueError(f"no triangle rule of degree {degree}; supported: {SUPPORTED_DEGREES}")
    return _rules()[table[degree]]


def assembly_rule(degree: int = 2) -> QuadratureRule:
    return get_rule(degree)


def error_rule(degree: int = 4) -> QuadratureRule:
    return get_rule(degree, interior=True)
