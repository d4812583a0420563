from typing import Tuple

import numpy as np

# gradients of the barycentric coordinates on the reference triangle
BARYCENTRIC_GRADIENTS = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])

# local edge k joins the two vertices other than k
EDGE_VERTICES = ((1, 2), (2, 0), (0, 1))


def _as_barycentric(point) -> np.ndarray:
    lam = np.asarray(point, dtype=float)
    if lam.shape[-1:] != (3,):
        raise ValueError(f"expected barycentric triples, got shape {lam.shape}")
    if np.any(lam < -1e-12) or np.any(np.abs(lam.sum(axis=-1) - 1.0) > 1e-12):
        raise ValueError(f"invalid barycentric coordinates {point}")
    return lam


def p2_tabulate(points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Quadratic Lagrange basis at an array of barycentric points.

    Returns
    -------
    values : (npts, 6)
        vertex functions first, then the edge-midpoint functions in local edge order
    gradients : (npts, 6, 2)
        gradients with respect to the reference coordinates
    """
    lam = np.atleast_2d(points)
    npts = lam.shape[0]
    values = np.empty((npts, 6))
    gradients = np.empty((npts, 6, 2))
    for i in range(3):
        values[:, i] = lam[:, i] * (2.0 * lam[:, i] - 1.0)
        gradients[:, i] = np.outer(4.0 * lam[:, i] - 1.0, BARYCENTRIC_GRADIENTS[i])
    for k, (a, b) in enumerate(EDGE_VERTICES):
        values[:, 3 + k] = 4.0 * lam[:, a] * lam[:, b]
        gradients[:, 3 + k] = 4.0 * (
            np.outer(lam[:, b], BARYCENTRIC_GRADIENTS[a])
            + np.outer(lam[:, a], BARYCENTRIC_GRADIENTS[b])
        )
    return values, gradients


def p1_tabulate(points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    lam = np.atleast_2d(points)
    gradients = np.broadcast_to(BARYCENTRIC_GRADIENTS, (lam.shape[0], 3, 2)).copy()
    return lam.copy(), gradients


def p2_basis_eval(point) -> Tuple[np.ndarray, np.ndarray]:
    """Values (6,) and reference gradients (6, 2) of the P2 basis at one point"""
    lam = _as_barycentric(point)
    if lam.ndim != 1:
        raise ValueError("p2_basis_eval takes a single barycentric point")
    values, gradients = p2_tabulate(lam[None, :])
    return values[0], gradients[0]
