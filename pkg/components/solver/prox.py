import numpy as np


def block_soft_threshold(u, tau: float) -> np.ndarray:
    """
    Proximal map of tau * |.| for one 3-vector.

    Args:
        u: The 3-vector.
        tau (float): Nonnegative threshold.

    Returns:
        np.ndarray: (1 - tau/|u|) u when |u| > tau, else 0 (ties map to 0).
    """
    u = np.asarray(u, dtype=float)
    norm = float(np.linalg.norm(u))
    if norm <= tau:
        return np.zeros_like(u)
    return (1.0 - tau / norm) * u


def group_soft_threshold(u: np.ndarray, tau: float) -> np.ndarray:
    """Row-wise block_soft_threshold of a (K, 3) array."""
    norms = np.linalg.norm(u, axis=1)
    shrink = np.zeros_like(norms)
    keep = norms > tau
    shrink[keep] = 1.0 - tau / norms[keep]
    return u * shrink[:, None]
