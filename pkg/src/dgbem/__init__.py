"""IPDG/BEM coupling for the 2D Laplace transmission problem."""
from .mesh import Mesh, MeshError, refine_uniform, triangulate_polygon
from .dg import DGSpace, DGFunction, PenaltyConfig, assemble_a_dg
from .bem import BoundarySpace, BoundaryFunction, assemble_K, assemble_V
from .coupling import ProblemData, assemble_coupled, solve, coupled_problem

__version__ = "0.1.0"
