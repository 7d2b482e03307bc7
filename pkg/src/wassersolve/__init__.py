"""Finite-volume dynamic optimal transport on 2D polygonal meshes.

The density lives on a coarse mesh, the potential on a nested fine mesh (or on
the same mesh), and the discrete Benamou-Brenier problem is solved with a
primal-dual log-barrier interior-point method.
"""

from .analysis import (
    AnalyticCase,
    ConvergenceTable,
    ErrorReport,
    convergence_study,
    errors,
    get_case,
    make_setup,
    oscillation_index,
)
from .discrete_ops import Kind, Operators
from .mesh import (
    Mesh,
    NestedMeshPair,
    build_pair,
    generate_acute_triangulation,
    generate_cartesian,
    load_mesh,
    save_mesh,
    subdivide_to_nested,
    validate,
)
from .problem import SpaceTimeState, TransportSetup
from .solver import Solution, SolverParams, solve

__version__ = "0.1.0"

__all__ = [
    "AnalyticCase", "ConvergenceTable", "ErrorReport", "Kind", "Mesh", "NestedMeshPair",
    "Operators", "Solution", "SolverParams", "SpaceTimeState", "TransportSetup",
    "build_pair", "convergence_study", "errors", "generate_acute_triangulation",
    "generate_cartesian", "get_case", "load_mesh", "make_setup", "oscillation_index",
    "save_mesh", "solve", "subdivide_to_nested", "validate", "__version__",
]
