"""Local integral method solvers for 2D elliptic problems with stable RBF-QR interpolation."""
from .bench import convergence_study, epsilon_sweep, isoline_grid, problem_catalog, run, solve_problem
from .geometry import Disk, NodeSet, Rectangle, make_nodes
from .rbfqr import RbfQrBasis, build_rbfqr_basis

__version__ = "0.1.0"

__all__ = ["Disk", "NodeSet", "RbfQrBasis", "Rectangle", "build_rbfqr_basis", "convergence_study",
           "epsilon_sweep", "isoline_grid", "make_nodes", "problem_catalog", "run", "solve_problem"]
