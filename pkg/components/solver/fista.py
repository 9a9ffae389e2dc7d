import enum
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from aws_lambda_powertools import Logger

import constants
from components.certificate.report import CertificateReport, certify_moments
from components.errors import DimensionError, InputError, SolverError
from components.forward import ForwardModel
from components.measures import DiscreteVectorMeasure
from components.solver.objective import _check_data, _check_lambda, objective_value
from components.solver.options import SolveOptions
from components.solver.prox import group_soft_threshold

LOGGER = Logger(service=constants.SERVICE_NAME, level=constants.LOG_LEVEL)

# Backtracking gives up below this fraction of the initial step
MIN_STEP_RATIO = 1e-12
# Rounding slack of the sufficient-decrease test, relative to the smooth term
DECREASE_RTOL = 64.0 * np.finfo(float).eps


class ConvergedBy(str, enum.Enum):
    CERTIFICATE = "certificate"
    OBJECTIVE_STALL = "objective_stall"
    MAX_ITERS = "max_iters"


@dataclass(frozen=True)
class TraceRow:
    iter: int
    objective: float
    cert_gap: float
    step: float
    active_nodes: int


@dataclass(frozen=True, eq=False)
class SolveResult:
    """
    Minimizer of the TV-regularized objective over a dipole GSM space.

    Attributes:
        measure: The minimizer, one atom per active node.
        moments: (K, 3) node moments of the minimizer.
        objective: F(measure), recomputed from the final moments.
        iterations: Iterations performed.
        certificate: Certificate at the final iterate.
        converged_by: Stopping reason.
        objectives: Objective after every iteration (non-increasing).
        trace: Per-iteration rows when requested.
        warnings: Non-fatal conditions met during the run.
    """

    measure: DiscreteVectorMeasure
    moments: np.ndarray
    objective: float
    iterations: int
    certificate: CertificateReport
    converged_by: ConvergedBy
    objectives: List[float] = field(default_factory=list)
    trace: List[TraceRow] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)


def solve(
    model: ForwardModel,
    f,
    lam: float,
    opts: Optional[SolveOptions] = None,
    initial=None,
) -> SolveResult:
    """
    Minimize ||f - A mu||_H^2 + lambda |mu|_TV over the model's space.

    Monotone FISTA with backtracking and gradient restart on the smooth term, with the
    group soft-threshold as proximal map. The primary stop is the certificate gap;
    an objective stall or the iteration cap end the run otherwise.

    Args:
        model (ForwardModel): The forward model.
        f: Data vector at the sensors.
        lam (float): Regularization weight, > 0.
        opts (SolveOptions): Solver options.
        initial: Optional (K, 3) warm-start moments.

    Returns:
        SolveResult: The minimizer with its certificate.

    Raises:
        InputError: On non-finite data or lambda.
        DimensionError: On shape mismatches.
        SolverError: When backtracking finds no admissible step.
    """
    opts = opts or SolveOptions()
    f = _check_data(model, f)
    lam = _check_lambda(lam)
    half = 0.5 * lam

    if initial is None:
        x = np.zeros((model.num_nodes, 3))
    else:
        x = np.array(initial, dtype=float)
        if x.size != 3 * model.num_nodes:
            raise DimensionError(f"Warm start has {x.size} entries, expected {3 * model.num_nodes}")
        if not np.all(np.isfinite(x)):
            raise InputError("Warm start contains non-finite values")
        x = x.reshape(model.num_nodes, 3)

    def smooth(Av):
        r = f - Av
        return model.inner(r, r)

    def tv(v):
        return float(np.sum(np.linalg.norm(v, axis=1)))

    Ax = model.apply(x)
    Fx = smooth(Ax) + lam * tv(x)
    objectives = [Fx]
    trace: List[TraceRow] = []

    lipschitz = 2.0 * model.operator_norm_sq(opts.power_iters)
    step = 1.0 / lipschitz if lipschitz > 0 else 1.0
    min_step = MIN_STEP_RATIO * step

    report = certify_moments(model, f, lam, x, opts.certificate_tol, residual=f - Ax)
    cert_gap = report.gap
    converged_by = ConvergedBy.CERTIFICATE if report.gap <= opts.certificate_tol else None

    y, Ay = x, Ax
    theta = 1.0
    iterations = 0
    while converged_by is None and iterations < opts.max_iters:
        iterations += 1
        residual_y = f - Ay
        grad = -2.0 * model.adjoint_apply(residual_y)
        hy = model.inner(residual_y, residual_y)

        # Backtracking on the quadratic upper model of the smooth term
        while True:
            z = group_soft_threshold(y - step * grad, step * lam)
            Az = model.apply(z)
            d = z - y
            bound = hy + float(np.sum(grad * d)) + float(np.sum(d * d)) / (2.0 * step)
            if smooth(Az) <= bound + DECREASE_RTOL * hy:
                break
            step *= opts.backtrack_shrink
            if step < min_step:
                raise SolverError(f"Backtracking step fell below {min_step:.3e} at iteration {iterations}")

        Fz = smooth(Az) + lam * tv(z)
        theta_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * theta * theta))
        if Fz <= Fx:
            x_prev = x
            x, Ax, Fx = z, Az, Fz
            if opts.restart and float(np.sum((y - z) * (z - x_prev))) > 0.0:
                theta = 1.0
                y, Ay = x, Ax
            else:
                momentum = (theta - 1.0) / theta_next
                y = x + momentum * (x - x_prev)
                Ay = model.apply(y)
                theta = theta_next
        else:
            # Keep the monotone iterate and drop momentum
            theta = 1.0
            y, Ay = x, Ax
        objectives.append(Fx)

        if iterations % opts.certificate_every == 0:
            report = certify_moments(model, f, lam, x, opts.certificate_tol, residual=f - Ax)
            cert_gap = report.gap
            if cert_gap <= opts.certificate_tol:
                converged_by = ConvergedBy.CERTIFICATE
        if converged_by is None and iterations >= opts.stall_window:
            earlier = objectives[-1 - opts.stall_window]
            if earlier - Fx <= opts.objective_tol * abs(Fx):
                converged_by = ConvergedBy.OBJECTIVE_STALL

        if opts.record_trace:
            active = int(np.count_nonzero(np.any(x != 0.0, axis=1)))
            trace.append(TraceRow(iterations, Fx, cert_gap, step, active))

    warnings = []
    if converged_by is None:
        converged_by = ConvergedBy.MAX_ITERS
        warnings.append(f"max_iters={opts.max_iters} reached with certificate gap {cert_gap:.3e}")
        LOGGER.warning("Solver hit the iteration cap", extra={"lambda": lam, "cert_gap": cert_gap})

    report = certify_moments(model, f, lam, x, opts.certificate_tol)
    LOGGER.debug(
        "Solve finished",
        extra={
            "lambda": lam,
            "iterations": iterations,
            "converged_by": converged_by.value,
            "cert_gap": report.gap,
            "active_nodes": report.active_count,
        },
    )
    return SolveResult(
        measure=model.space.measure(x),
        moments=x,
        objective=objective_value(model, f, lam, x),
        iterations=iterations,
        certificate=report,
        converged_by=converged_by,
        objectives=objectives,
        trace=trace,
        warnings=warnings,
    )
