from .diagnostics import (
    DiagnosticsRecord,
    angular_momentum,
    div_l2_norm,
    kinetic_energy,
    l2_error,
    linear_momentum,
    read_csv,
    write_csv,
)
from .forms import Formulation, nl_jacobian, nl_residual, skew_linearized_matrix, trilinear_b
from .mesh import TriMesh, boundary_dofs, build_uniform_tri_mesh
from .problems import GRESHO, LATTICE, BenchmarkProblem, gresho_exact, lattice_exact
from .saddle import SaddleSystem, SolverError, apply_dirichlet, solve
from .space import FEFunction, TaylorHoodSpace, interpolate
from .timeloop import (
    FullNewton,
    NewtonK,
    NonConvergenceError,
    SchemeConfig,
    SkewLinearized,
    TimeState,
    run_simulation,
)
from .version import __version__
