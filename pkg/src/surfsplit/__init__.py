"""Second-order splitting of fourth-order PDEs on the unit sphere with P1 surface finite elements."""

from surfsplit.errors import (
    AmbiguousVertexError,
    AssemblyError,
    ConfigurationError,
    SingularPointError,
    SolverError,
    VertexNotFoundError,
)
from surfsplit.mesh import SurfaceMesh, build_octahedron_sphere, measured_h, refine, vertex_at

__version__ = "0.1.0"

__all__ = [
    "AmbiguousVertexError",
    "AssemblyError",
    "ConfigurationError",
    "SingularPointError",
    "SolverError",
    "SurfaceMesh",
    "VertexNotFoundError",
    "build_octahedron_sphere",
    "measured_h",
    "refine",
    "vertex_at",
]
