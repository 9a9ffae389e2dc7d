import numpy as np
from aws_lambda_powertools import Logger
from scipy.linalg import eigh
from scipy.optimize import brentq

import constants
from components.errors import OracleSizeError
from components.forward import ForwardModel
from components.solver.objective import _check_data, _check_lambda

LOGGER = Logger(service=constants.SERVICE_NAME, level=constants.LOG_LEVEL)

MAX_ORACLE_UNKNOWNS = 50


def _block_minimizer(eigenvalues: np.ndarray, eigenvectors: np.ndarray, b: np.ndarray, lam: float) -> np.ndarray:
    """
    Exact minimizer of m'Hm - 2b'm + lam |m| for a 3x3 PSD H = Q diag(eigenvalues) Q'.

    The nonzero solution solves (H + lam/(2s) I) m = b with s = |m|, a scalar
    root-finding problem in s.
    """
    if np.linalg.norm(b) <= 0.5 * lam:
        return np.zeros(3)
    beta = eigenvectors.T @ b
    eigenvalues = np.maximum(eigenvalues, 0.0)

    def norm_at(s):
        return float(np.linalg.norm(beta / (eigenvalues + 0.5 * lam / s)))

    hi = 1.0
    positive = eigenvalues > 0
    if np.any(positive):
        hi += float(np.linalg.norm(beta[positive] / eigenvalues[positive]))
    for _ in range(200):
        if norm_at(hi) < hi:
            break
        hi *= 2.0
    lo = hi * 1e-30
    s = brentq(lambda t: norm_at(t) - t, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=1000)
    return eigenvectors @ (beta / (eigenvalues + 0.5 * lam / s))


def oracle_solve(model: ForwardModel, f, lam: float, max_sweeps: int = 200000) -> np.ndarray:
    """
    Slow reference minimizer by cyclic block-coordinate descent.

    Each sweep minimizes the objective exactly over one node's moment at a time; the run
    stops once a sweep lowers the objective by less than 1e-14 (1 + |objective|).

    Args:
        model (ForwardModel): A small forward model.
        f: Data vector.
        lam (float): Regularization weight.
        max_sweeps (int): Sweep cap.

    Returns:
        np.ndarray: (K, 3) node moments.

    Raises:
        OracleSizeError: For more than MAX_ORACLE_UNKNOWNS unknowns.
    """
    f = _check_data(model, f)
    lam = _check_lambda(lam)
    unknowns = 3 * model.num_nodes
    if unknowns > MAX_ORACLE_UNKNOWNS:
        raise OracleSizeError(f"oracle_solve handles at most {MAX_ORACLE_UNKNOWNS} unknowns, got {unknowns}")

    matrix = model.matrix
    if matrix is None:
        matrix = model.column_blocks().reshape(model.num_sensors, -1)
    w = model.weights
    blocks = [matrix[:, 3 * k:3 * k + 3] for k in range(model.num_nodes)]
    spectra = [eigh(B.T @ (w[:, None] * B)) for B in blocks]

    m = np.zeros((model.num_nodes, 3))
    residual = f.copy()
    objective = model.inner(residual, residual)
    for sweep in range(max_sweeps):
        for k, B in enumerate(blocks):
            b = B.T @ (w * (residual + B @ m[k]))
            eigenvalues, eigenvectors = spectra[k]
            new = _block_minimizer(eigenvalues, eigenvectors, b, lam)
            residual -= B @ (new - m[k])
            m[k] = new

        residual = f - matrix @ m.ravel()
        updated = model.inner(residual, residual) + lam * float(np.sum(np.linalg.norm(m, axis=1)))
        if objective - updated < 1e-14 * (1.0 + abs(updated)):
            LOGGER.debug("Oracle converged", extra={"sweeps": sweep + 1, "objective": updated})
            return m
        objective = updated

    LOGGER.warning("Oracle hit the sweep cap", extra={"sweeps": max_sweeps})
    return m
