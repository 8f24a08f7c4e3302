"""Space-time solver for linear parabolic problems.

Simultaneous space-time discretization of the heat / reaction-diffusion
equation, reduced to a symmetric positive definite system that is solved by
conjugate gradients with a wavelet-in-time, multigrid-in-space
preconditioner, in linear work and with a time-parallel execution engine.
"""

from .sparse import (SparseMatrix, SpaceTimeVector, KroneckerOperator,
                     BlockDiagOperator, csr_matvec, dense_materialize, counter)
from .temporal import (TemporalDiscretization, assemble_temporal_trial,
                       assemble_temporal_test, evaluate_trace)
from .spatial import (ProblemData, MeshHierarchy, build_mesh_hierarchy,
                      build_prolongation, assemble_spatial, project_initial,
                      assemble_load)
from .wavelet import (WaveletLevels, WaveletTransform, build_wavelet,
                      wavelet_apply, wavelet_transpose_apply)
from .multigrid import (MultigridSolver, ExactSolver, make_solver,
                        assemble_level_operators, spectral_report)
from .system import (SchurOperator, PreconditionerKX, RightHandSide,
                     schur_apply, apply_KY, apply_KX, assemble_rhs)
from .solver import (SolveConfig, ParallelPlan, WorkerPool, PCGResult,
                     IterationLimitError, pcg, estimate_condition,
                     lanczos_condition, solve_heat, measure_error,
                     parallel_execute, assemble_system, HeatSolution)
from .problems import decaying_heat, forced_heat, PROBLEMS

__version__ = "0.1.0"
