"""Steady Fokker-Planck equations with confining potentials on a disk.

The main entry points are :func:`solve_fokker_planck` for the finite-element
solve, :func:`check_hypotheses` for the admissibility audit of a model, and
:func:`simulate` for the Monte Carlo cross-check.
"""

from .errors import (
    ConfineFPError,
    DimensionMismatch,
    DomainError,
    EvaluationError,
    InvalidArgument,
    PathAbort,
    RejectedModel,
    SolverFailure,
    SpectralFailure,
    Unsupported,
)
from .geometry import TriMesh, build_disk_mesh, triangle_rule
from .potential import CoRotational, ConfinementModel, NoDrift, Shear, check_hypotheses
from .fem import assemble, solve_constrained
from .solver import Solution, convergence_study, manufactured_solution_test, solve_fokker_planck
from .analysis import hardy_audit, kernel_and_gap, poincare_audit, weighted_norms
from .sde import Histogram2D, SdeConfig, compare, simulate

__version__ = "0.1.0"

__all__ = [
    "CoRotational",
    "ConfineFPError",
    "ConfinementModel",
    "DimensionMismatch",
    "DomainError",
    "EvaluationError",
    "Histogram2D",
    "InvalidArgument",
    "NoDrift",
    "PathAbort",
    "RejectedModel",
    "SdeConfig",
    "Shear",
    "Solution",
    "SolverFailure",
    "SpectralFailure",
    "TriMesh",
    "Unsupported",
    "assemble",
    "build_disk_mesh",
    "check_hypotheses",
    "compare",
    "convergence_study",
    "hardy_audit",
    "kernel_and_gap",
    "manufactured_solution_test",
    "poincare_audit",
    "simulate",
    "solve_constrained",
    "solve_fokker_planck",
    "triangle_rule",
    "weighted_norms",
]
