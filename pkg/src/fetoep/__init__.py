"""Linear finite elements for diffusion and convection-diffusion on
triangular meshes, with diagonal-times-Toeplitz preconditioning."""

__version__ = "0.1.0"

from .assembly import assemble_convection, assemble_diffusion, assemble_rhs, assemble_system
from .coefficients import CoefficientField, parse_coefficient
from .krylov import SolveReport, pcg, pgmres, solve
from .mesh import Mesh, generate_hex_structured, generate_square_fk, perturb, read_triangle, refine_midpoint
from .precond import Preconditioner, build_exact, build_surrogate

__all__ = [
    "CoefficientField", "Mesh", "Preconditioner", "SolveReport",
    "assemble_convection", "assemble_diffusion", "assemble_rhs", "assemble_system",
    "build_exact", "build_surrogate", "generate_hex_structured", "generate_square_fk",
    "parse_coefficient", "pcg", "perturb", "pgmres", "read_triangle", "refine_midpoint", "solve",
]
