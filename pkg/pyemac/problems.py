from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from .assembly import assemble_load
from .mesh import Rect, boundary_dofs
from .space import VELOCITY, TaylorHoodSpace, interpolate

# pressure constants making the standing vortex pressure continuous at r = 0.2 and r = 0.4
GRESHO_C2 = 6.0 - 4.0 * np.log(0.4)
GRESHO_C1 = GRESHO_C2 - 4.0 + 4.0 * np.log(0.2)

GRESHO_ENERGY = 2.0 * np.pi / 75.0
GRESHO_ANGULAR_MOMENTUM = -7.0 * np.pi / 375.0


def _radius(x, y) -> Tuple[np.ndarray, np.ndarray]:
    r = np.hypot(x, y)
    return r, np.where(r > 0, r, 1.0)


def _gresho_speed_factor(x, y):
    """s(r) with u = s(r) (-y, x)"""
    r, safe = _radius(x, y)
    return np.select([r <= 0.2, r <= 0.4], [5.0, 2.0 / safe - 5.0], 0.0)


def gresho_exact(x, y):
    """Velocity pair and pressure of the standing vortex; steady in time"""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    r, safe = _radius(x, y)
    s = _gresho_speed_factor(x, y)
    p = np.select(
        [r <= 0.2, r <= 0.4],
        [12.5 * r**2 + GRESHO_C1, 12.5 * r**2 - 20.0 * r + 4.0 * np.log(safe) + GRESHO_C2],
        0.0,
    )
    return (-s * y, s * x), p


def gresho_gradients(x, y):
    """Velocity gradient [..., i, j] = d u_i / d x_j and pressure gradient, branch by branch"""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    r, safe = _radius(x, y)
    s = _gresho_speed_factor(x, y)
    ds = np.select([r <= 0.2, r <= 0.4], [0.0, -2.0 / safe**2], 0.0)
    dp = np.select([r <= 0.2, r <= 0.4], [25.0 * r, 25.0 * r - 20.0 + 4.0 / safe], 0.0)

    tangent = np.stack([-y, x], axis=-1)
    radial = np.stack([x, y], axis=-1) / safe[..., None]
    rotation = np.array([[0.0, -1.0], [1.0, 0.0]])
    grad_u = ds[..., None, None] * np.einsum("...i,...j->...ij", tangent, radial)
    grad_u += s[..., None, None] * rotation
    return grad_u, dp[..., None] * radial


def lattice_exact(x, y, t: float = 0.0, nu: float = 0.0):
    """Velocity pair and pressure of the decaying lattice vortex"""
    a, b = 2.0 * np.pi * np.asarray(x, dtype=float), 2.0 * np.pi * np.asarray(y, dtype=float)
    decay = np.exp(-8.0 * nu * np.pi**2 * t)
    u = (np.sin(a) * np.sin(b) * decay, np.cos(a) * np.cos(b) * decay)
    q = -0.5 * (np.sin(a) ** 2 + np.cos(b) ** 2)
    return u, q * decay**2


def lattice_gradients(x, y, t: float = 0.0, nu: float = 0.0):
    a, b = 2.0 * np.pi * np.asarray(x, dtype=float), 2.0 * np.pi * np.asarray(y, dtype=float)
    decay = np.exp(-8.0 * nu * np.pi**2 * t)
    k = 2.0 * np.pi
    grad_u = np.stack(
        [
            np.stack([k * np.cos(a) * np.sin(b), k * np.sin(a) * np.cos(b)], axis=-1),
            np.stack([-k * np.sin(a) * np.cos(b), -k * np.cos(a) * np.sin(b)], axis=-1),
        ],
        axis=-2,
    )
    grad_p = np.stack([-k * np.sin(a) * np.cos(a), k * np.sin(b) * np.cos(b)], axis=-1)
    return decay * grad_u, decay**2 * grad_p


@dataclass(frozen=True)
class BenchmarkProblem:
    """
    A benchmark with a closed-form solution. `solution(x, y, t, nu)` returns the
    velocity pair and pressure; `forcing(x, y, t)`, when given, the body force.
    """

    name: str
    domain: Rect
    solution: Callable
    default_nu: float
    default_nx: int
    homogeneous_boundary: bool
    forcing: Optional[Callable] = None

    def velocity(self, nu: float) -> Callable:
        return lambda x, y, t: self.solution(x, y, t, nu)[0]

    def initial_velocity(self, nu: float) -> Callable:
        return lambda x, y: self.solution(x, y, 0.0, nu)[0]

    def initial_pressure(self, nu: float) -> Callable:
        return lambda x, y: self.solution(x, y, 0.0, nu)[1]

    def boundary(self, space: TaylorHoodSpace, t: float, nu: float):
        """Dirichlet DOFs and their values at time t"""
        dofs = boundary_dofs(space.mesh, space)
        if self.homogeneous_boundary:
            return dofs, np.zeros(dofs.size)
        trace = interpolate(space, VELOCITY, lambda x, y: self.solution(x, y, t, nu)[0])
        return dofs, trace.coefficients[dofs]

    def load(self, space: TaylorHoodSpace, t: float) -> Optional[np.ndarray]:
        if self.forcing is None:
            return None
        return assemble_load(space, lambda x, y: self.forcing(x, y, t))


GRESHO = BenchmarkProblem(
    name="gresho",
    domain=(-0.5, 0.5, -0.5, 0.5),
    solution=lambda x, y, t, nu: gresho_exact(x, y),
    default_nu=0.0,
    default_nx=48,
    homogeneous_boundary=True,
)

LATTICE = BenchmarkProblem(
    name="lattice",
    domain=(0.0, 1.0, 0.0, 1.0),
    solution=lattice_exact,
    default_nu=1e-7,
    default_nx=32,
    homogeneous_boundary=False,
)

PROBLEMS: Dict[str, BenchmarkProblem] = {p.name: p for p in (GRESHO, LATTICE)}
