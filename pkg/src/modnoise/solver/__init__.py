"""LP/MILP engine and the optimal-noise formulations built on it."""

from modnoise.solver.bnb import MixedIntegerProgram, branch_and_bound, brute_force_milp
from modnoise.solver.formulation import (
    InfeasibleError,
    IterationLimitError,
    Layout,
    build_min_delta_milp,
    build_min_error_milp,
    build_zero_delta_lp,
    cost_weights,
    extract_pmf,
    solve_min_delta,
    solve_min_error,
    solve_optimal_pmf,
)
from modnoise.solver.simplex import LinearProgram, SolveResult, Status, simplex_solve

__all__ = [
    'InfeasibleError',
    'IterationLimitError',
    'Layout',
    'LinearProgram',
    'MixedIntegerProgram',
    'SolveResult',
    'Status',
    'branch_and_bound',
    'brute_force_milp',
    'build_min_delta_milp',
    'build_min_error_milp',
    'build_zero_delta_lp',
    'cost_weights',
    'extract_pmf',
    'simplex_solve',
    'solve_min_delta',
    'solve_min_error',
    'solve_optimal_pmf',
]
