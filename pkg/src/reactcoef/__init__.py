"""Finite element identification of a reaction coefficient from boundary Cauchy data."""
from .forward import CauchyData, Coefficients, ForwardProblem
from .inverse import Objective, SolverConfig, gradient_projection, multilevel_run
from .mesh import BoundaryRegion, Mesh, build_square_mesh

__version__ = "0.1.0"

__all__ = [
    "BoundaryRegion", "CauchyData", "Coefficients", "ForwardProblem", "Mesh", "Objective",
    "SolverConfig", "build_square_mesh", "gradient_projection", "multilevel_run",
]
