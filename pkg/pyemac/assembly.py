from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .quadrature import ASSEMBLY_DEGREE, ERROR_DEGREE
from .space import CellTable, TaylorHoodSpace


def _to_csr(rows: np.ndarray, cols: np.ndarray, values: np.ndarray, shape) -> sp.csr_matrix:
    matrix = sp.coo_matrix(
        (values.ravel(), (rows.ravel(), cols.ravel())), shape=shape
    ).tocsr()
    matrix.sum_duplicates()
    matrix.sort_indices()
    return matrix


def scatter_velocity_matrix(space: TaylorHoodSpace, local: np.ndarray) -> sp.csr_matrix:
    """Sum (nc, 12, 12) element matrices into a velocity-by-velocity matrix"""
    dofs = space.cell_vel_dofs
    rows = np.broadcast_to(dofs[:, :, None], local.shape)
    cols = np.broadcast_to(dofs[:, None, :], local.shape)
    n = space.n_vel_dofs
    return _to_csr(rows, cols, local, (n, n))


def scatter_velocity_vector(space: TaylorHoodSpace, local: np.ndarray) -> np.ndarray:
    """Sum (nc, 12) element vectors into a velocity vector"""
    return np.bincount(
        space.cell_vel_dofs.ravel(), weights=local.ravel(), minlength=space.n_vel_dofs
    )


def _block_diagonal(scalar: np.ndarray) -> np.ndarray:
    nc = scalar.shape[0]
    local = np.zeros((nc, 2, 6, 2, 6))
    local[:, 0, :, 0, :] = scalar
    local[:, 1, :, 1, :] = scalar
    return local.reshape(nc, 12, 12)


def assemble_mass(space: TaylorHoodSpace) -> sp.csr_matrix:
    table = space.tabulate(ASSEMBLY_DEGREE)
    scalar = np.einsum("cq,qa,qb->cab", table.weights, table.phi, table.phi)
    return scatter_velocity_matrix(space, _block_diagonal(scalar))


def assemble_stiffness(space: TaylorHoodSpace) -> sp.csr_matrix:
    """(grad u, grad v) without the viscosity"""
    table = space.tabulate(ASSEMBLY_DEGREE)
    scalar = np.einsum("cq,cqaj,cqbj->cab", table.weights, table.dphi, table.dphi)
    return scatter_velocity_matrix(space, _block_diagonal(scalar))


def assemble_graddiv(space: TaylorHoodSpace) -> sp.csr_matrix:
    table = space.tabulate(ASSEMBLY_DEGREE)
    local = np.einsum("cq,cqai,cqbk->ciakb", table.weights, table.dphi, table.dphi)
    return scatter_velocity_matrix(space, local.reshape(-1, 12, 12))


def assemble_div(space: TaylorHoodSpace) -> sp.csr_matrix:
    """Pressure rows, velocity columns: B[i, j] = (div phi_j, psi_i)"""
    table = space.tabulate(ASSEMBLY_DEGREE)
    local = np.einsum("cq,qp,cqak->cpka", table.weights, table.psi, table.dphi)
    local = local.reshape(-1, 3, 12)
    rows = np.broadcast_to(space.cell_pr_dofs[:, :, None], local.shape)
    cols = np.broadcast_to(space.cell_vel_dofs[:, None, :], local.shape)
    return _to_csr(rows, cols, local, (space.n_pr_dofs, space.n_vel_dofs))


def assemble_pressure_mean(space: TaylorHoodSpace) -> np.ndarray:
    """Integrals of the pressure basis functions"""
    table = space.tabulate(ASSEMBLY_DEGREE)
    local = np.einsum("cq,qp->cp", table.weights, table.psi)
    return np.bincount(
        space.cell_pr_dofs.ravel(), weights=local.ravel(), minlength=space.n_pr_dofs
    )


def assemble_load(
    space: TaylorHoodSpace, func: Callable, degree: int = ERROR_DEGREE
) -> np.ndarray:
    """(f, phi_i) for a vector field `func(x, y) -> (f1, f2)`"""
    table = space.tabulate(degree)
    x, y = table.points[..., 0], table.points[..., 1]
    f1, f2 = func(x, y)
    values = np.stack([np.broadcast_to(f1, x.shape), np.broadcast_to(f2, x.shape)], axis=-1)
    return integrate_against_basis(space, table, values)


def integrate_against_basis(space: TaylorHoodSpace, table: CellTable, values: np.ndarray) -> np.ndarray:
    """Entries (N, phi_i) for a vector integrand N given at quadrature points"""
    local = np.einsum("cq,cqi,qa->cia", table.weights, values, table.phi)
    return scatter_velocity_vector(space, local.reshape(-1, 12))


def assemble_velocity_operator(
    space: TaylorHoodSpace,
    table: CellTable,
    trial_values: Optional[np.ndarray] = None,
    trial_gradients: Optional[np.ndarray] = None,
    test_gradients: Optional[np.ndarray] = None,
) -> sp.csr_matrix:
    """
    Assemble the operator whose action on w, tested with v = phi_a e_i, is

        sum_q W [ v_i (L1[i,k] w_k + L2[i,k,j] d_j w_k) + d_j v_i L3[i,j,k] w_k ]

    where L1 = trial_values (nc, nq, 2, 2), L2 = trial_gradients
    (nc, nq, 2, 2, 2) and L3 = test_gradients (nc, nq, 2, 2, 2).
    """
    w, phi, dphi = table.weights, table.phi, table.dphi
    local = np.zeros((w.shape[0], 2, 6, 2, 6))
    if trial_values is not None:
        local += np.einsum("cq,qa,cqik,qb->ciakb", w, phi, trial_values, phi, optimize=True)
    if trial_gradients is not None:
        local += np.einsum(
            "cq,qa,cqikj,cqbj->ciakb", w, phi, trial_gradients, dphi, optimize=True
        )
    if test_gradients is not None:
        local += np.einsum(
            "cq,cqaj,cqijk,qb->ciakb", w, dphi, test_gradients, phi, optimize=True
        )
    return scatter_velocity_matrix(space, local.reshape(-1, 12, 12))
