import numpy as np

from components.errors import DimensionError, InputError
from components.forward import ForwardModel


def _check_data(model: ForwardModel, f) -> np.ndarray:
    f = np.asarray(f, dtype=float).ravel()
    if f.size != model.num_sensors:
        raise DimensionError(f"Expected {model.num_sensors} data values, got {f.size}")
    if not np.all(np.isfinite(f)):
        raise InputError("Data vector contains non-finite values")
    return f


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if not (np.isfinite(lam) and lam > 0):
        raise InputError(f"lambda must be a positive finite number, got {lam}")
    return lam


def objective_value(model: ForwardModel, f, lam: float, m) -> float:
    """
    F(mu) = ||f - A mu||_H^2 + lambda |mu|_TV for node moments m.

    Raises:
        DimensionError: If f or m do not match the model.
    """
    f = _check_data(model, f)
    lam = _check_lambda(lam)
    moments = np.asarray(m, dtype=float).reshape(-1, 3)
    residual = f - model.apply(moments)
    return model.inner(residual, residual) + lam * float(np.sum(np.linalg.norm(moments, axis=1)))


def shifted_objective_value(model: ForwardModel, f, lam: float, m) -> float:
    """F(mu) - ||f||_H^2, which shares its minimizers with objective_value."""
    f = _check_data(model, f)
    return objective_value(model, f, lam, m) - model.inner(f, f)


def lambda_max(model: ForwardModel, f) -> float:
    """Smallest lambda at which the zero measure is optimal, 2 max_k |(A*f)(node_k)|."""
    f = _check_data(model, f)
    duals = model.adjoint_apply(f)
    if len(duals) == 0:
        return 0.0
    return float(2.0 * np.max(np.linalg.norm(duals, axis=1)))


def data_perturbation_bound(model: ForwardModel, f, f_tilde, lam: float, m):
    """
    Sides of |F_{f~}(mu) - F_f(mu)| = 2|<f - f~, A mu>| <= 2 delta(f - f~, V) |mu|_TV.

    Returns:
        tuple: (lhs, rhs) of the inequality.
    """
    f = _check_data(model, f)
    f_tilde = _check_data(model, f_tilde)
    moments = np.asarray(m, dtype=float).reshape(-1, 3)
    lhs = abs(shifted_objective_value(model, f_tilde, lam, moments) - shifted_objective_value(model, f, lam, moments))
    delta = 0.5 * lambda_max(model, f - f_tilde)
    rhs = 2.0 * delta * float(np.sum(np.linalg.norm(moments, axis=1)))
    return lhs, rhs
