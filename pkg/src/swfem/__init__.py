"""Energy- and enstrophy-conserving mixed finite element shallow-water
solver on doubly-periodic triangular meshes.

The compatible space triples (vorticity, velocity, depth) are
(P1, RT0, DG0), (P2, BDM1, DG0), (P2+bubble, BDFM1, DG1) and
(P3, BDM2, DG1); the rotated gradient maps the vorticity space into the
velocity space and the divergence maps the velocity space onto the depth
space, which is what makes the conservation proofs go through discretely.
"""

from .elements import make_element
from .linalg import (SolverError, SolverReport, SparseOperator,
                     block_diag_solve, cg_solve)
from .mesh import Mesh, MeshError, read_msh, structured_mesh, write_msh
from .quadrature import QuadratureRule, triangle_quadrature
from .spaces import (Field, FunctionSpace, SpaceTriple, assemble_mass,
                     function_space, l2_project, make_triple, piola_map)
from .swe import (Params, Scheme, SchemeError, State, TendencyResult,
                  assemble_div, assemble_perp_grad_embedding)
from .timeint import RunRecord, TimeLoopError, rk4_step, run

__version__ = "0.1.0"

__all__ = [
    "Field", "FunctionSpace", "Mesh", "MeshError", "Params",
    "QuadratureRule", "RunRecord", "Scheme", "SchemeError",
    "SolverError", "SolverReport", "SpaceTriple", "SparseOperator",
    "State", "TendencyResult", "TimeLoopError", "assemble_div",
    "assemble_mass", "assemble_perp_grad_embedding", "block_diag_solve",
    "cg_solve", "function_space", "l2_project", "make_element",
    "make_triple", "piola_map", "read_msh", "rk4_step", "run",
    "structured_mesh", "triangle_quadrature", "write_msh",
]
