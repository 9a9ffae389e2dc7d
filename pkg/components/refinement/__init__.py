from components.refinement.plan import RefinementPlan
from components.refinement.quantities import (
    AuditResult,
    kappa_upper_bound,
    delta,
    d_lambda,
    kappa_probe_estimate,
    range_projection,
    inequality_audit
)
from components.refinement.convergence import SupportDistances, support_convergence
from components.refinement.driver import (
    InversionData,
    LevelRow,
    RefinementTrace,
    TRACE_COLUMNS,
    nested_spaces,
    build_levels,
    run_refinement
)
