from dataclasses import dataclass
from typing import Callable, Dict, Tuple

import numpy as np

from .basis import p1_tabulate, p2_tabulate
from .mesh import TriMesh
from .quadrature import ASSEMBLY_DEGREE, quadrature_rule

VELOCITY = "velocity"
PRESSURE = "pressure"


@dataclass(frozen=True)
class CellTable:
    """Basis data of a quadrature rule pushed forward to every cell"""

    weights: np.ndarray  # (nc, nq), quadrature weight times |det J|
    points: np.ndarray  # (nc, nq, 2), physical coordinates
    phi: np.ndarray  # (nq, 6), P2 values
    dphi: np.ndarray  # (nc, nq, 6, 2), physical P2 gradients
    psi: np.ndarray  # (nq, 3), P1 values


class TaylorHoodSpace:
    """
    P2 velocity / P1 pressure pair on a TriMesh.

    Scalar P2 nodes are the mesh vertices followed by the edge midpoints
    (node nv + e for edge e). Velocity DOFs are component-blocked: all
    x-components first, then all y-components. Pressure DOFs are the vertices.
    """

    def __init__(self, mesh: TriMesh):
        self.mesh = mesh
        self.n_vel_nodes = mesh.num_vertices + mesh.num_edges
        self.n_vel_dofs = 2 * self.n_vel_nodes
        self.n_pr_dofs = mesh.num_vertices

        self.cell_nodes = np.hstack([mesh.cells, mesh.num_vertices + mesh.cell_edges])
        self.cell_vel_dofs = np.hstack([self.cell_nodes, self.n_vel_nodes + self.cell_nodes])
        self.cell_pr_dofs = mesh.cells.copy()
        self.node_coords = np.vstack([mesh.vertices, mesh.edge_midpoints()])

        p0, p1, p2 = (mesh.vertices[mesh.cells[:, k]] for k in range(3))
        self.origin = p0
        self.jacobian = np.stack([p1 - p0, p2 - p0], axis=-1)  # (nc, 2, 2)
        self.det = np.linalg.det(self.jacobian)
        self.inv_jacobian = np.linalg.inv(self.jacobian)
        self._tables: Dict[int, CellTable] = {}

    def __repr__(self):
        return (
            f"TaylorHoodSpace(cells={self.mesh.num_cells}, "
            f"velocity_dofs={self.n_vel_dofs}, pressure_dofs={self.n_pr_dofs})"
        )

    def tabulate(self, degree: int = ASSEMBLY_DEGREE) -> CellTable:
        if degree not in self._tables:
            rule = quadrature_rule(degree)
            phi, ref_grad = p2_tabulate(rule.points)
            psi, _ = p1_tabulate(rule.points)
            dphi = np.einsum("cji,qaj->cqai", self.inv_jacobian, ref_grad)
            points = self.origin[:, None, :] + np.einsum(
                "cij,qj->cqi", self.jacobian, rule.reference_points
            )
            weights = np.abs(self.det)[:, None] * rule.weights[None, :]
            self._tables[degree] = CellTable(
                weights=weights, points=points, phi=phi, dphi=dphi, psi=psi
            )
        return self._tables[degree]

    def velocity_at(self, coefficients: np.ndarray, table: CellTable) -> Tuple[np.ndarray, np.ndarray]:
        """
        Values (nc, nq, 2) and gradients (nc, nq, 2, 2) of a velocity at the
        quadrature points of `table`; gradients[..., i, j] is d u_i / d x_j.
        """
        local = coefficients[self.cell_vel_dofs].reshape(-1, 2, 6)
        values = np.einsum("cia,qa->cqi", local, table.phi)
        gradients = np.einsum("cia,cqaj->cqij", local, table.dphi)
        return values, gradients

    def pressure_at(self, coefficients: np.ndarray, table: CellTable) -> np.ndarray:
        return coefficients[self.cell_pr_dofs] @ table.psi.T


@dataclass(frozen=True, eq=False)
class FEFunction:
    space: TaylorHoodSpace
    coefficients: np.ndarray
    kind: str = VELOCITY

    def __post_init__(self):
        if self.kind not in (VELOCITY, PRESSURE):
            raise ValueError(f"unknown function kind {self.kind!r}")
        expected = self.space.n_vel_dofs if self.kind == VELOCITY else self.space.n_pr_dofs
        if self.coefficients.shape != (expected,):
            raise ValueError(
                f"{self.kind} coefficients must have length {expected}, "
                f"got shape {self.coefficients.shape}"
            )

    @classmethod
    def zeros(cls, space: TaylorHoodSpace, kind: str = VELOCITY) -> "FEFunction":
        n = space.n_vel_dofs if kind == VELOCITY else space.n_pr_dofs
        return cls(space, np.zeros(n), kind)

    def with_coefficients(self, coefficients: np.ndarray) -> "FEFunction":
        return FEFunction(self.space, np.asarray(coefficients, dtype=float), self.kind)

    @property
    def components(self) -> Tuple[np.ndarray, np.ndarray]:
        if self.kind != VELOCITY:
            raise ValueError("only velocities have components")
        n = self.space.n_vel_nodes
        return self.coefficients[:n], self.coefficients[n:]


def interpolate(space: TaylorHoodSpace, kind: str, func: Callable) -> FEFunction:
    """
    Nodal interpolant of `func(x, y)`; velocities must return the pair (u1, u2),
    pressures a single array.
    """
    if kind == VELOCITY:
        x, y = space.node_coords.T
        u1, u2 = func(x, y)
        coefficients = np.concatenate(
            [np.broadcast_to(u1, x.shape), np.broadcast_to(u2, x.shape)]
        ).astype(float)
    elif kind == PRESSURE:
        x, y = space.mesh.vertices.T
        coefficients = np.array(np.broadcast_to(func(x, y), x.shape), dtype=float)
    else:
        raise ValueError(f"unknown function kind {kind!r}")
    return FEFunction(space, coefficients, kind)
