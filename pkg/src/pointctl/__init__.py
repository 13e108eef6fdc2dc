"""Finite element solver for elliptic optimal control with point tracking.

The objective penalizes the state at finitely many points plus an L2 control
cost; the control is box constrained and recovered pointwise from the
adjoint, never discretized itself.  See README.md for the CLI and the
benchmark suite.
"""

from ._kernels import backend_name
from .assembly import (
    CoefficientField,
    DofMap,
    FeFunction,
    assemble_load,
    assemble_mass,
    assemble_point_load,
    assemble_point_matrix,
    assemble_stiffness,
    assemble_weighted_mass,
    evaluate,
    l2_error,
)
from .bench import (
    ExactBenchmark,
    ConvergenceRecord,
    NewtonRateRecord,
    approx_eoc_study,
    benchmark_2d,
    benchmark_3d,
    constrained_2d,
    eoc_study,
    five_point_square,
    newton_rate_table,
    nu_sweep,
)
from .mesh import (
    Mesh,
    PointLocation,
    build_unit_ball,
    build_unit_disk,
    build_unit_square,
    locate_point,
    mesh_size,
    refine_uniform,
)
from .optctl import (
    OptimalControlSolution,
    ProblemSpec,
    ProjectedControl,
    ResidualPair,
    newton_jacobian,
    project_box,
    residual,
    solve,
    solve_adjoint,
    solve_state,
    z_norm,
)
from .quadrature import QuadratureRule, ReferenceMap, gauss_rule, integrate
from .sparse import (
    BlockSystem,
    SolverReport,
    SparseMatrix,
    assemble_block,
    bicgstab,
    dense_solve_oracle,
)

__version__ = "0.1.0"
