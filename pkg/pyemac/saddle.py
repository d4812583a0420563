import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .space import PRESSURE, VELOCITY, FEFunction, TaylorHoodSpace

logger = logging.getLogger(__name__)

# relative algebraic residual accepted without a warning
RESIDUAL_TOLERANCE = 1e-11

# smallest |U_ii| / max |U_ii| of the LU factor treated as nonsingular
PIVOT_RATIO_THRESHOLD = 1e-14

# fill-reducing ordering of A + A^T; the saddle matrices are structurally symmetric
PERMC_SPEC = "MMD_AT_PLUS_A"


class SolverError(RuntimeError):
    """Raised when the sparse factorization fails; `diagnostic` describes the pivot trouble"""

    def __init__(self, message: str, diagnostic: str):
        super().__init__(f"{message} ({diagnostic})")
        self.diagnostic = diagnostic


@dataclass
class SaddleSystem:
    """
    Blocked system for velocity u, pressure p and the mean multiplier lam:

        A u - B^T p         = rhs_u
        B u         + c lam = rhs_p
              c^T p         = 0
    """

    space: TaylorHoodSpace
    A: sp.csr_matrix
    B: sp.csr_matrix
    c: np.ndarray
    rhs_u: np.ndarray
    rhs_p: np.ndarray
    dirichlet_dofs: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    dirichlet_values: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        nu, npr = self.space.n_vel_dofs, self.space.n_pr_dofs
        self.dirichlet_dofs = np.asarray(self.dirichlet_dofs, dtype=np.int64).ravel()
        self.dirichlet_values = np.broadcast_to(
            np.asarray(self.dirichlet_values, dtype=float), self.dirichlet_dofs.shape
        ).copy()
        if self.A.shape != (nu, nu):
            raise ValueError(f"A must be {nu}x{nu}, got {self.A.shape}")
        if self.B.shape != (npr, nu):
            raise ValueError(f"B must be {npr}x{nu}, got {self.B.shape}")
        if self.c.shape != (npr,) or self.rhs_p.shape != (npr,):
            raise ValueError(f"c and rhs_p must have length {npr}")
        if self.rhs_u.shape != (nu,):
            raise ValueError(f"rhs_u must have length {nu}")
        if np.any((self.dirichlet_dofs < 0) | (self.dirichlet_dofs >= nu)):
            raise ValueError("Dirichlet DOF index out of range")


def _unique_prescriptions(dofs: np.ndarray, values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    if not np.all(np.isfinite(values)):
        raise ValueError("prescribed Dirichlet values must be finite")
    unique, first = np.unique(dofs, return_index=True)
    if unique.size < dofs.size:
        expected = np.zeros(dofs.max() + 1)
        expected[dofs[first]] = values[first]
        conflicting = dofs[expected[dofs] != values]
        if conflicting.size:
            raise ValueError(
                f"conflicting Dirichlet values prescribed for DOFs {np.unique(conflicting)[:10].tolist()}"
            )
    return unique, values[first]


def apply_dirichlet(system: SaddleSystem) -> SaddleSystem:
    """
    Eliminate the prescribed velocity DOFs symmetrically: their rows and columns
    become identity, their couplings move to the right-hand sides. Applying it
    to an already constrained system changes nothing.
    """
    if system.dirichlet_dofs.size == 0:
        return system

    dofs, values = _unique_prescriptions(system.dirichlet_dofs, system.dirichlet_values)
    n = system.space.n_vel_dofs
    prescribed = np.zeros(n)
    prescribed[dofs] = values
    free = np.ones(n)
    free[dofs] = 0.0
    keep = sp.diags(free)

    rhs_u = system.rhs_u - system.A @ prescribed
    rhs_u[dofs] = values
    rhs_p = system.rhs_p - system.B @ prescribed
    A = (keep @ system.A @ keep + sp.diags(1.0 - free)).tocsr()
    B = (system.B @ keep).tocsr()
    return replace(system, A=A, B=B, rhs_u=rhs_u, rhs_p=rhs_p, dirichlet_dofs=dofs, dirichlet_values=values)


def _check_pivots(lu, size: int):
    pivots = np.abs(lu.U.diagonal())
    largest = pivots.max() if pivots.size else 0.0
    smallest = pivots.min() if pivots.size else 0.0
    if not np.isfinite(largest) or largest == 0.0 or smallest <= PIVOT_RATIO_THRESHOLD * largest:
        raise SolverError(
            "sparse factorization is numerically singular",
            f"min/max pivot {smallest:.3e}/{largest:.3e}, size {size}",
        )


def factorize(matrix: sp.spmatrix):
    """SuperLU factors of `matrix`; the ordering suits structurally symmetric saddle matrices"""
    matrix = sp.csc_matrix(matrix)
    size = matrix.shape[0]
    try:
        lu = splu(matrix, permc_spec=PERMC_SPEC)
    except RuntimeError as e:
        raise SolverError("sparse factorization failed", f"{e}, size {size}") from e
    _check_pivots(lu, size)
    return lu


def _refined_solve(matrix: sp.spmatrix, inverse: Callable[[np.ndarray], np.ndarray], rhs: np.ndarray, refine: bool):
    size = matrix.shape[0]
    solution = inverse(rhs)
    if refine:
        solution = solution + inverse(rhs - matrix @ solution)
    if not np.all(np.isfinite(solution)):
        raise SolverError("sparse solve produced non-finite values", f"size {size}")

    scale = np.linalg.norm(rhs)
    residual = np.linalg.norm(rhs - matrix @ solution)
    if scale > 0 and residual > RESIDUAL_TOLERANCE * scale:
        logger.warning("relative algebraic residual %.3e exceeds %.0e", residual / scale, RESIDUAL_TOLERANCE)
    return solution


def sparse_solve(matrix: sp.spmatrix, rhs: np.ndarray, refine: bool = True) -> np.ndarray:
    """Solve with SuperLU, optionally followed by one refinement sweep"""
    matrix = sp.csc_matrix(matrix)
    return _refined_solve(matrix, factorize(matrix).solve, rhs, refine)


def bordered_matrix(system: SaddleSystem, border: Optional[np.ndarray] = None) -> sp.csc_matrix:
    c = (system.c if border is None else border)[:, None]
    return sp.bmat(
        [
            [system.A, -system.B.T, None],
            [system.B, None, sp.csr_matrix(c)],
            [None, sp.csr_matrix(c.T), None],
        ],
        format="csc",
    )


def bordered_solve(system: SaddleSystem, rhs: np.ndarray) -> np.ndarray:
    """
    Solve the mean-bordered system without factorizing its dense border. The
    factorized matrix borders with a single pressure DOF instead; the two
    differ by a rank-two term that Sherman-Morrison-Woodbury removes.
    """
    nu, npr = system.space.n_vel_dofs, system.space.n_pr_dofs
    size = nu + npr + 1
    pinned = int(np.argmax(np.abs(system.c)))
    pin = np.zeros(npr)
    pin[pinned] = system.c[pinned]
    lu = factorize(bordered_matrix(system, pin))

    # bordered(c) = bordered(pin) + U V^T with U = [d, e], V = [e, d]
    d = np.zeros(size)
    d[nu : nu + npr] = system.c - pin
    e = np.zeros(size)
    e[-1] = 1.0
    Z = np.column_stack([lu.solve(d), lu.solve(e)])
    capacitance = np.eye(2) + np.vstack([Z[-1], d @ Z])
    condition = np.linalg.cond(capacitance)
    if not condition < 1.0 / PIVOT_RATIO_THRESHOLD:
        raise SolverError(
            "mean-bordered system is numerically singular", f"capacitance condition {condition:.3e}, size {size}"
        )

    def inverse(r: np.ndarray) -> np.ndarray:
        y = lu.solve(r)
        return y - Z @ np.linalg.solve(capacitance, [y[-1], d @ y])

    return _refined_solve(bordered_matrix(system), inverse, rhs, refine=True)


def solve(system: SaddleSystem) -> Tuple[FEFunction, FEFunction]:
    """Velocity and mean-zero pressure of the constrained system"""
    system = apply_dirichlet(system)
    space = system.space
    nu, npr = space.n_vel_dofs, space.n_pr_dofs

    if system.B.count_nonzero() == 0:
        # no coupling: the pressure is only fixed by its mean
        if np.any(system.rhs_p != 0.0):
            raise SolverError("uncoupled system has no solution", "B is empty but rhs_p is not zero")
        velocity = sparse_solve(system.A, system.rhs_u)
        velocity[system.dirichlet_dofs] = system.dirichlet_values
        return FEFunction(space, velocity, VELOCITY), FEFunction.zeros(space, PRESSURE)

    rhs = np.concatenate([system.rhs_u, system.rhs_p, [0.0]])
    solution = bordered_solve(system, rhs)

    velocity = solution[:nu]
    velocity[system.dirichlet_dofs] = system.dirichlet_values
    pressure = solution[nu : nu + npr]
    logger.debug("saddle solve: %d unknowns, multiplier %.3e", solution.size, solution[-1])
    return FEFunction(space, velocity, VELOCITY), FEFunction(space, pressure, PRESSURE)
