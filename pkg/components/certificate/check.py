from dataclasses import dataclass

import numpy as np
from aws_lambda_powertools import Logger

import constants
from components.certificate.report import CertificateReport, certify_moments
from components.errors import ConfigurationError, PreconditionError
from components.forward import ForwardModel
from components.measures import DiscreteVectorMeasure

LOGGER = Logger(service=constants.SERVICE_NAME, level=constants.LOG_LEVEL)

DEFAULT_ANGLE_TOL = 1e-6


def certificate_check(model: ForwardModel, f, lam: float, mu: DiscreteVectorMeasure, tol: float) -> CertificateReport:
    """
    Check whether a node-supported measure minimizes the objective over the model's space.

    Args:
        model (ForwardModel): Forward model over the GSM space.
        f: Data vector.
        lam (float): Regularization weight, > 0.
        mu (DiscreteVectorMeasure): Candidate minimizer supported on the nodes.
        tol (float): Relative tolerance in units of lambda/2.

    Returns:
        CertificateReport: Dual samples, gaps and the pass flag.

    Raises:
        DomainError: If mu has an atom off the nodes.
    """
    if not lam > 0 or not tol > 0:
        raise ConfigurationError(f"lambda and tol must be positive, got {lam} and {tol}")
    moments = model.space.moments_of(mu)
    return certify_moments(model, f, lam, moments, tol)


@dataclass(frozen=True)
class EquivalenceReport:
    same_image: bool
    condition_b: bool
    image_distance: float
    max_angle: float


def _angle(a: np.ndarray, b: np.ndarray) -> float:
    cosine = float(a @ b) / (np.linalg.norm(a) * np.linalg.norm(b))
    return float(np.arccos(np.clip(cosine, -1.0, 1.0)))


def equivalence_check(
    model: ForwardModel,
    f,
    lam: float,
    mu: DiscreteVectorMeasure,
    mu_other: DiscreteVectorMeasure,
    tol: float,
    angle_tol: float = DEFAULT_ANGLE_TOL,
) -> EquivalenceReport:
    """
    Compare a certified minimizer mu with another candidate.

    same_image holds when |A(mu - mu')|_H <= tol (1 + |A mu|_H). condition_b holds when
    every active moment of mu' is a nonnegative multiple of m_k where m_k != 0, and of
    c_k with |c_k| = lambda/2 where m_k = 0, up to `angle_tol` radians.

    Raises:
        PreconditionError: If mu fails its own certificate at `tol`.
    """
    report = certificate_check(model, f, lam, mu, tol)
    if not report.passed:
        raise PreconditionError("Reference measure does not pass its certificate; cannot compare minimizers")

    moments = model.space.moments_of(mu)
    other = model.space.moments_of(mu_other)
    image = model.apply(moments)
    image_distance = model.norm(image - model.apply(other))
    same_image = image_distance <= tol * (1.0 + model.norm(image))

    half = 0.5 * lam
    condition_b = True
    max_angle = 0.0
    for k in np.flatnonzero(np.any(other != 0.0, axis=1)):
        if np.any(moments[k] != 0.0):
            angle = _angle(other[k], moments[k])
        else:
            dual = report.duals[k]
            if abs(np.linalg.norm(dual) - half) > tol * half:
                condition_b = False
                continue
            angle = _angle(other[k], dual)
        max_angle = max(max_angle, angle)
        if angle > angle_tol:
            condition_b = False

    LOGGER.debug(
        "Equivalence check",
        extra={"same_image": same_image, "condition_b": condition_b, "max_angle": max_angle},
    )
    return EquivalenceReport(bool(same_image), bool(condition_b), image_distance, max_angle)
