import numpy as np

import constants
from components.errors import KernelSingularityError
from components.measures import DiscreteVectorMeasure, as_points


def dipole_kernel(displacements, direction) -> np.ndarray:
    """
    Vectorized K_v(x) = v/|x|^3 - 3 x (v.x)/|x|^5, the gradient of v.x/|x|^3.

    Args:
        displacements: Array of shape (..., 3).
        direction: Unit 3-vector v.

    Returns:
        np.ndarray: K_v at every displacement, same shape as the input.

    Raises:
        KernelSingularityError: If any displacement is shorter than the singularity radius.
    """
    x = np.asarray(displacements, dtype=float)
    v = np.asarray(direction, dtype=float)
    r2 = np.einsum("...i,...i->...", x, x)
    if np.any(r2 < constants.SINGULARITY_RADIUS ** 2):
        raise KernelSingularityError("Kernel evaluated at a coincident sensor/source pair")
    r = np.sqrt(r2)
    inv3 = 1.0 / (r2 * r)
    vx = x @ v
    return v * inv3[..., None] - 3.0 * x * (vx * inv3 / r2)[..., None]


def kernel_Kv(x, v) -> np.ndarray:
    """K_v at a single displacement x."""
    return dipole_kernel(np.asarray(x, dtype=float).reshape(3), v)


def field_component(mu: DiscreteVectorMeasure, x, v, scale: float) -> float:
    """
    Component along v of the field of mu at x, b_v(mu)(x) = -scale * sum_k K_v(x - x_k).m_k.
    """
    if len(mu) == 0:
        return 0.0
    kernel = dipole_kernel(as_points(x)[0] - mu.locations, v)
    return float(-scale * np.sum(kernel * mu.moments))


def field_at(mu: DiscreteVectorMeasure, points, v, scale: float) -> np.ndarray:
    """field_component at every point, shape (n_points,)."""
    points = as_points(points)
    if len(mu) == 0:
        return np.zeros(len(points))
    kernel = dipole_kernel(points[:, None, :] - mu.locations[None, :, :], v)
    return -scale * np.einsum("pkc,kc->p", kernel, mu.moments)
