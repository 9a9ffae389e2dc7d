from components.solver.options import SolveOptions
from components.solver.prox import block_soft_threshold, group_soft_threshold
from components.solver.objective import (
    objective_value,
    shifted_objective_value,
    lambda_max,
    data_perturbation_bound
)
from components.solver.fista import ConvergedBy, SolveResult, TraceRow, solve
from components.solver.oracle import oracle_solve, MAX_ORACLE_UNKNOWNS
