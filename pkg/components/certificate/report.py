import json
from dataclasses import dataclass

import numpy as np

from components.forward import ForwardModel


@dataclass(frozen=True, eq=False)
class CertificateReport:
    """
    Optimality certificate of a node-supported candidate mu over a dipole GSM space.

    Attributes:
        lam: Regularization weight lambda.
        tol: Relative tolerance the report was evaluated at (scale lambda/2).
        nodes: (K, 3) node locations.
        duals: (K, 3) node samples c_k of A*(f - A mu).
        active: Indices of nodes carrying a nonzero moment.
        bound_margin: max_k |c_k| - lambda/2, negative when every bound holds strictly.
        bound_gap: max(bound_margin, 0).
        alignment_gap: max over active k of |c_k - (lambda/2) m_k/|m_k||.
        pairing_residual: |<mu, A*(f - A mu)> - (lambda/2) |mu|_TV|.
        tv: |mu|_TV.
        on_level_inactive: Inactive nodes with | |c_k| - lambda/2 | <= tol lambda/2.
        passed: Whether all three gaps are within tolerance.
    """

    lam: float
    tol: float
    nodes: np.ndarray
    duals: np.ndarray
    active: np.ndarray
    bound_margin: float
    bound_gap: float
    alignment_gap: float
    pairing_residual: float
    tv: float
    on_level_inactive: int
    passed: bool

    @property
    def half_lam(self) -> float:
        return 0.5 * self.lam

    @property
    def gap(self) -> float:
        """Relative certificate gap max(bound_gap, alignment_gap) / (lambda/2)."""
        return max(self.bound_gap, self.alignment_gap) / self.half_lam

    @property
    def dual_norms(self) -> np.ndarray:
        return np.linalg.norm(self.duals, axis=1)

    @property
    def active_count(self) -> int:
        return len(self.active)

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "tol": self.tol,
            "passed": self.passed,
            "bound_margin": self.bound_margin,
            "bound_gap": self.bound_gap,
            "alignment_gap": self.alignment_gap,
            "pairing_residual": self.pairing_residual,
            "tv": self.tv,
            "active_count": self.active_count,
            "on_level_inactive": self.on_level_inactive,
            "active": [int(k) for k in self.active],
            "nodes": self.nodes.tolist(),
            "duals": self.duals.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def certify_moments(model: ForwardModel, f, lam: float, moments, tol: float, residual=None) -> CertificateReport:
    """
    Evaluate the critical-point equations for node moments.

    Args:
        model (ForwardModel): Forward model over the space.
        f: Data vector at the sensors.
        lam (float): Regularization weight.
        moments: (K, 3) node moments.
        tol (float): Relative tolerance, in units of lambda/2.
        residual: Optional precomputed f - A mu.

    Returns:
        CertificateReport: The evaluated certificate.
    """
    moments = np.asarray(moments, dtype=float).reshape(model.num_nodes, 3)
    if residual is None:
        residual = np.asarray(f, dtype=float) - model.apply(moments)
    duals = model.adjoint_apply(residual)
    half = 0.5 * lam

    norms = np.linalg.norm(moments, axis=1)
    dual_norms = np.linalg.norm(duals, axis=1)
    active = np.flatnonzero(norms > 0)

    bound_margin = float(dual_norms.max() - half) if len(dual_norms) else -half
    bound_gap = max(bound_margin, 0.0)
    if len(active):
        directions = moments[active] / norms[active, None]
        alignment_gap = float(np.max(np.linalg.norm(duals[active] - half * directions, axis=1)))
    else:
        alignment_gap = 0.0
    tv = float(norms.sum())
    pairing_residual = abs(float(np.sum(moments * duals)) - half * tv)

    inactive = norms == 0
    on_level_inactive = int(np.sum(inactive & (np.abs(dual_norms - half) <= tol * half)))
    passed = (
        bound_gap <= tol * half
        and alignment_gap <= tol * half
        and pairing_residual <= tol * half * (1.0 + tv)
    )
    return CertificateReport(
        lam=float(lam),
        tol=float(tol),
        nodes=model.space.nodes,
        duals=duals,
        active=active,
        bound_margin=bound_margin,
        bound_gap=bound_gap,
        alignment_gap=alignment_gap,
        pairing_residual=pairing_residual,
        tv=tv,
        on_level_inactive=on_level_inactive,
        passed=bool(passed),
    )
