from dataclasses import dataclass
from typing import TYPE_CHECKING, Tuple

import numpy as np

if TYPE_CHECKING:
    from .space import TaylorHoodSpace

Rect = Tuple[float, float, float, float]

UNIT_SQUARE: Rect = (0.0, 1.0, 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class TriMesh:
    """
    Conforming triangulation of an axis-aligned rectangle.

    Local edge k of a cell is the edge opposite its local vertex k, so
    `cell_edges[c]` lists the edges (v1, v2), (v2, v0), (v0, v1) in that order.
    """

    vertices: np.ndarray  # (nv, 2)
    cells: np.ndarray  # (nc, 3), counterclockwise
    edges: np.ndarray  # (ne, 2), smaller vertex index first
    cell_edges: np.ndarray  # (nc, 3)
    boundary_vertex: np.ndarray  # (nv,) bool
    boundary_edge: np.ndarray  # (ne,) bool
    bbox: Rect

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_cells(self) -> int:
        return self.cells.shape[0]

    @property
    def num_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def area(self) -> float:
        xmin, xmax, ymin, ymax = self.bbox
        return (xmax - xmin) * (ymax - ymin)

    def cell_areas(self) -> np.ndarray:
        p0, p1, p2 = (self.vertices[self.cells[:, k]] for k in range(3))
        d1 = p1 - p0
        d2 = p2 - p0
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def edge_midpoints(self) -> np.ndarray:
        return 0.5 * (self.vertices[self.edges[:, 0]] + self.vertices[self.edges[:, 1]])


def build_uniform_tri_mesh(nx: int, ny: int, rect: Rect = UNIT_SQUARE) -> TriMesh:
    """
    Split an nx-by-ny grid of rectangles into two triangles each, always along
    the lower-left to upper-right diagonal.

    Vertices are numbered row by row; edges are numbered in the order in which
    the cells first reach them.
    """
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise ValueError(f"cell counts must be positive integers, got nx={nx}, ny={ny}")
    xmin, xmax, ymin, ymax = (float(v) for v in rect)
    if not (xmax > xmin and ymax > ymin):
        raise ValueError(f"degenerate rectangle {rect}")
    nx, ny = int(nx), int(ny)

    # i / n keeps the outer coordinates exactly on the rectangle
    xs = xmin + (xmax - xmin) * (np.arange(nx + 1) / nx)
    ys = ymin + (ymax - ymin) * (np.arange(ny + 1) / ny)
    xx, yy = np.meshgrid(xs, ys, indexing="xy")
    vertices = np.column_stack([xx.ravel(), yy.ravel()])

    jj, ii = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    v00 = (jj * (nx + 1) + ii).ravel()
    v10 = v00 + 1
    v01 = v00 + nx + 1
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    cells = np.stack([lower, upper], axis=1).reshape(-1, 3)

    local_pairs = cells[:, [1, 2, 2, 0, 0, 1]].reshape(-1, 2)
    local_pairs = np.sort(local_pairs, axis=1)
    unique, first, inverse = np.unique(
        local_pairs, axis=0, return_index=True, return_inverse=True
    )
    inverse = inverse.reshape(-1)
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    edges = unique[order]
    cell_edges = rank[inverse].reshape(-1, 3)

    boundary_edge = np.bincount(cell_edges.ravel(), minlength=edges.shape[0]) == 1
    boundary_vertex = np.zeros(vertices.shape[0], dtype=bool)
    boundary_vertex[edges[boundary_edge].ravel()] = True

    return TriMesh(
        vertices=vertices,
        cells=cells,
        edges=edges,
        cell_edges=cell_edges,
        boundary_vertex=boundary_vertex,
        boundary_edge=boundary_edge,
        bbox=(xmin, xmax, ymin, ymax),
    )


def _check_space(mesh: TriMesh, space: "TaylorHoodSpace"):
    if space.mesh is not mesh:
        raise ValueError("the velocity space was built on a different mesh")


def boundary_nodes(mesh: TriMesh) -> np.ndarray:
    """P2 scalar nodes (vertices first, then edge midpoints) lying on the boundary"""
    vertex_nodes = np.flatnonzero(mesh.boundary_vertex)
    edge_nodes = mesh.num_vertices + np.flatnonzero(mesh.boundary_edge)
    return np.concatenate([vertex_nodes, edge_nodes])


def boundary_dofs(mesh: TriMesh, space: "TaylorHoodSpace") -> np.ndarray:
    """Both velocity components of every boundary node, sorted ascending"""
    _check_space(mesh, space)
    nodes = boundary_nodes(mesh)
    return np.sort(np.concatenate([nodes, space.n_vel_nodes + nodes]))


def boundary_strip_dofs(mesh: TriMesh, space: "TaylorHoodSpace") -> np.ndarray:
    """
    Velocity DOFs of every cell that touches the boundary. A velocity with
    these DOFs zeroed vanishes on the whole strip of boundary cells.
    """
    _check_space(mesh, space)
    touching = mesh.boundary_vertex[mesh.cells].any(axis=1)
    return np.unique(space.cell_vel_dofs[touching].ravel())
