import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

MAX_DEGREE = 10

# exact for every trilinear integrand of the P2/P1 pair
ASSEMBLY_DEGREE = 5

# error norms against non-polynomial fields
ERROR_DEGREE = 8


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # (nq, 3) barycentric coordinates
    weights: np.ndarray  # (nq,), sums to the reference area 1/2
    exactness_degree: int

    @property
    def reference_points(self) -> np.ndarray:
        """(x, y) on the reference triangle (0,0), (1,0), (0,1)"""
        return self.points[:, 1:]

    def integrate_reference(self, func) -> float:
        x, y = self.reference_points.T
        return float(np.dot(self.weights, func(x, y)))


def monomial_integral(a: int, b: int) -> float:
    """Exact value of the integral of x^a y^b over the reference triangle"""
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


@lru_cache(maxsize=None)
def quadrature_rule(min_degree: int) -> QuadratureRule:
    """
    Collapsed (conical product) Gauss rule on the reference triangle.

    The square [0,1]^2 is mapped onto the triangle by x = s, y = t(1-s); the
    Jacobian factor (1-s) is absorbed by a Gauss-Jacobi rule in s, and t uses
    Gauss-Legendre. With n points per direction the rule integrates every
    polynomial of total degree 2n-1 exactly, and all weights are positive.
    """
    if int(min_degree) != min_degree or not 1 <= min_degree <= MAX_DEGREE:
        raise NotImplementedError(
            f"quadrature of degree {min_degree} is not available (1..{MAX_DEGREE})"
        )
    n = (int(min_degree) + 2) // 2

    xs, ws = roots_jacobi(n, 1.0, 0.0)
    s = 0.5 * (1.0 + xs)
    ws = 0.25 * ws
    xt, wt = roots_legendre(n)
    t = 0.5 * (1.0 + xt)
    wt = 0.5 * wt

    ss, tt = np.meshgrid(s, t, indexing="ij")
    x = ss.ravel()
    y = (tt * (1.0 - ss)).ravel()
    weights = np.outer(ws, wt).ravel()
    points = np.column_stack([1.0 - x - y, x, y])

    return QuadratureRule(points=points, weights=weights, exactness_degree=2 * n - 1)
