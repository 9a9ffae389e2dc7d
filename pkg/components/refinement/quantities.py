from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
from scipy.linalg import lstsq

from components.errors import ConfigurationError, PreconditionError
from components.forward import ForwardModel, dipole_kernel
from components.measures import DipoleGsmSpace, DiscreteVectorMeasure, as_points, project_onto_gsm, tv_norm


def kappa_upper_bound(mu: DiscreteVectorMeasure, space: DipoleGsmSpace, model: ForwardModel) -> float:
    """
    Upper bound on kappa(V, mu) = inf_{nu in V} max(|A(mu - nu)|_H, | |mu|_TV - |nu|_TV |),
    evaluated at nu = P_V(mu).
    """
    projected = project_onto_gsm(mu, space)
    image = model.norm(model.simulate(mu) - model.simulate(projected))
    return max(image, abs(tv_norm(mu) - tv_norm(projected)))


def delta(g, space: DipoleGsmSpace, model: ForwardModel) -> float:
    """
    delta(g, V) = sup over unit-TV mu in V of |<g, A mu>|, attained at a single unit
    atom for dipole spaces: max_k |(A*g)(node_k)|.
    """
    if model.space is not space:
        raise ConfigurationError("delta needs the forward model assembled on the given space")
    duals = model.adjoint_apply(g)
    return float(np.max(np.linalg.norm(duals, axis=1))) if len(duals) else 0.0


def d_lambda(kappa: float, norm_f: float, norm_ftilde: float, lam: float) -> float:
    """d_lambda = kappa (2|f~|_H + 4|f|_H + kappa + lambda)."""
    return kappa * (2.0 * norm_ftilde + 4.0 * norm_f + kappa + lam)


def kappa_probe_estimate(model: ForwardModel, probes) -> float:
    """
    Largest kappa(V, delta_x e) over unit atoms at the probe points, each evaluated at
    its projection: the spectral norm of the weighted column-block difference.
    """
    probes = as_points(probes)
    space = model.space
    targets = space.nodes[space.cell_of(probes)]
    sensors = model.sensors
    probe_blocks = dipole_kernel(sensors.points[:, None, :] - probes[None, :, :], sensors.direction)
    node_blocks = dipole_kernel(sensors.points[:, None, :] - targets[None, :, :], sensors.direction)
    difference = -model.scale * (probe_blocks - node_blocks) * np.sqrt(model.weights)[:, None, None]
    norms = np.linalg.norm(np.transpose(difference, (1, 0, 2)), ord=2, axis=(1, 2))
    return float(norms.max()) if len(norms) else 0.0


def range_projection(model: ForwardModel, f) -> np.ndarray:
    """f^p = P_{AV} f, the H-orthogonal projection of the data onto the range of A on V."""
    f = np.asarray(f, dtype=float)
    matrix = model.matrix
    if matrix is None:
        matrix = model.column_blocks().reshape(model.num_sensors, -1)
    root = np.sqrt(model.weights)
    coefficients = lstsq(root[:, None] * matrix, root * f)[0]
    return matrix @ coefficients


@dataclass(frozen=True)
class AuditResult:
    fncond3_ok: bool
    fncond2_ok: bool
    slacks: Dict[str, float] = field(default_factory=dict)


def _shifted(model: ForwardModel, g, image, tv: float, lam: float) -> float:
    return -2.0 * model.inner(g, image) + model.inner(image, image) + lam * tv


def inequality_audit(
    level_model: ForwardModel,
    reference_model: ForwardModel,
    f,
    f_tilde,
    lam: float,
    level_measure: DiscreteVectorMeasure,
    reference: Optional[DiscreteVectorMeasure],
    audit_tol: float = 1e-6,
) -> AuditResult:
    """
    Evaluate both objective-perturbation inequalities for one level.

    With mu~ the level minimizer for f~ over V and mu the reference minimizer for f,
    checks F_{f~}(mu~) <= F_{f~}(mu) + d_lambda and
    -2 delta |mu~|_TV <= F_{f~}(mu~) - F_f(mu) <= 2 delta |mu|_TV + d_lambda.
    kappa and delta enter through upper bounds (projection and reference space), which
    keeps both inequalities valid. Failures are reported, never raised.

    Raises:
        PreconditionError: If no reference solution is given.
    """
    if reference is None:
        raise PreconditionError("inequality_audit needs a reference solution")
    f = np.asarray(f, dtype=float)
    f_tilde = np.asarray(f_tilde, dtype=float)

    level_image = level_model.simulate(level_measure)
    reference_image = reference_model.simulate(reference)
    level_tv, reference_tv = tv_norm(level_measure), tv_norm(reference)

    F_level = _shifted(level_model, f_tilde, level_image, level_tv, lam)
    F_reference_tilde = _shifted(level_model, f_tilde, reference_image, reference_tv, lam)
    F_reference = _shifted(level_model, f, reference_image, reference_tv, lam)

    kappa = kappa_upper_bound(reference, level_model.space, level_model)
    coupling = delta(f_tilde - f, reference_model.space, reference_model)
    d = d_lambda(kappa, level_model.norm(f), level_model.norm(f_tilde), lam)

    allowance = audit_tol * (level_model.inner(f, f) + level_model.inner(f_tilde, f_tilde))
    fncond3 = F_reference_tilde + d - F_level
    difference = F_level - F_reference
    lower = difference + 2.0 * coupling * level_tv
    upper = 2.0 * coupling * reference_tv + d - difference
    return AuditResult(
        fncond3_ok=bool(fncond3 >= -allowance),
        fncond2_ok=bool(lower >= -allowance and upper >= -allowance),
        slacks={
            "fncond3": fncond3,
            "fncond2_lower": lower,
            "fncond2_upper": upper,
            "kappa": kappa,
            "delta": coupling,
            "d_lambda": d,
        },
    )
