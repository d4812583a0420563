"""
Randomized checks of the algebraic identities the conservation properties of
the EMAC scheme rest on. Every identity is a sum of terms that must vanish;
its violation is |sum| divided by the sum of the magnitudes of the terms.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List

import numpy as np

from .forms import (
    Formulation,
    convection_matrix,
    deformation_product,
    div_product,
    emac_newton_rhs_correction,
    grad_transpose_product,
    nl_jacobian,
    nl_residual,
    skew_linearized_matrix,
    tilde_angular_field,
    tilde_momentum_fields,
    trilinear_b,
)
from .mesh import boundary_dofs, boundary_strip_dofs, build_uniform_tri_mesh
from .quadrature import ASSEMBLY_DEGREE
from .space import FEFunction, TaylorHoodSpace

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-11


@dataclass(frozen=True)
class IdentityCheck:
    name: str
    violation: float
    passed: bool


def _relative(terms, magnitude: float) -> float:
    total = abs(float(np.sum(terms)))
    return total / magnitude if magnitude > 0 else total


class _Fields:
    """Values and gradients of several velocities at the assembly quadrature points"""

    def __init__(self, space: TaylorHoodSpace, *functions: FEFunction):
        table = space.tabulate(ASSEMBLY_DEGREE)
        self.weights = table.weights
        self.values, self.gradients = zip(*(space.velocity_at(f.coefficients, table) for f in functions))

    def magnitude(self, integrand: np.ndarray) -> float:
        return float(np.sum(self.weights * np.abs(integrand)))


def _b_magnitude(fields: _Fields, i: int, j: int, k: int) -> float:
    u, gv, w = fields.values[i], fields.gradients[j], fields.values[k]
    return fields.magnitude(np.einsum("cqj,cqij,cqi->cq", u, gv, w))


def _div_magnitude(fields: _Fields, i: int, j: int, k: int) -> float:
    g = fields.gradients[i]
    div = g[..., 0, 0] + g[..., 1, 1]
    return fields.magnitude(div * np.einsum("cqi,cqi->cq", fields.values[j], fields.values[k]))


def _dot_magnitude(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sum(np.abs(a * b)))


class IdentityBattery:
    def __init__(self, space: TaylorHoodSpace, rng: np.random.Generator, zero_boundary: bool = True):
        self.space = space
        self.rng = rng
        self.zero_boundary = zero_boundary
        self.boundary = boundary_dofs(space.mesh, space)
        self.strip = boundary_strip_dofs(space.mesh, space)
        self.e1, self.e2 = tilde_momentum_fields(space)
        self.phi = tilde_angular_field(space)

    def random(self) -> FEFunction:
        return FEFunction(self.space, self.rng.standard_normal(self.space.n_vel_dofs))

    def random_zero_trace(self) -> FEFunction:
        u = self.random()
        if self.zero_boundary:
            u.coefficients[self.boundary] = 0.0
        return u

    def random_interior(self) -> FEFunction:
        u = self.random()
        u.coefficients[self.strip] = 0.0
        return u

    def antisymmetry(self) -> float:
        """b(u, v, w) + b(u, w, v) + ((div u) v, w) = 0 for u with zero trace"""
        u, v, w = self.random_zero_trace(), self.random(), self.random()
        terms = [trilinear_b(u, v, w), trilinear_b(u, w, v), div_product(u, v, w)]
        fields = _Fields(self.space, u, v, w)
        scale = _b_magnitude(fields, 0, 1, 2) + _b_magnitude(fields, 0, 2, 1) + _div_magnitude(fields, 0, 1, 2)
        return _relative(terms, scale)

    def self_convection(self) -> float:
        """b(u, w, w) + 1/2 ((div u) w, w) = 0 for u with zero trace"""
        u, w = self.random_zero_trace(), self.random()
        terms = [trilinear_b(u, w, w), 0.5 * div_product(u, w, w)]
        fields = _Fields(self.space, u, w)
        return _relative(terms, _b_magnitude(fields, 0, 1, 1) + 0.5 * _div_magnitude(fields, 0, 1, 1))

    def transpose_gradient(self) -> float:
        """b(u, v, w) = ((grad v)^T w, u)"""
        u, v, w = self.random(), self.random(), self.random()
        terms = [trilinear_b(u, v, w), -grad_transpose_product(u, v, w)]
        return _relative(terms, 2.0 * _b_magnitude(_Fields(self.space, u, v, w), 0, 1, 2))

    def convection_matrix(self) -> float:
        """w^T C(u) v = b(u, v, w)"""
        u, v, w = self.random(), self.random(), self.random()
        assembled = w.coefficients * (convection_matrix(u) @ v.coefficients)
        terms = [float(np.sum(assembled)), -trilinear_b(u, v, w)]
        scale = _dot_magnitude(w.coefficients, convection_matrix(u) @ v.coefficients)
        return _relative(terms, scale + _b_magnitude(_Fields(self.space, u, v, w), 0, 1, 2))

    def deformation(self) -> float:
        """(D(u) u, u) = b(u, u, u)"""
        u = self.random()
        terms = [deformation_product(u, u, u), -trilinear_b(u, u, u)]
        return _relative(terms, 2.0 * _b_magnitude(_Fields(self.space, u), 0, 0, 0))

    def energy(self) -> float:
        """(2 D(u) u + (div u) u, u) = 0 for u with zero trace"""
        u = self.random_zero_trace()
        residual = nl_residual(Formulation.EMAC, u)
        return _relative(u.coefficients * residual, _dot_magnitude(u.coefficients, residual))

    def skew_energy(self) -> float:
        """w^T L(u*) w = 0"""
        u_star, w = self.random(), self.random()
        applied = skew_linearized_matrix(u_star) @ w.coefficients
        return _relative(w.coefficients * applied, _dot_magnitude(w.coefficients, applied))

    def _tested(self, vector: np.ndarray) -> float:
        worst = 0.0
        for test in (self.e1, self.e2, self.phi):
            worst = max(worst, _relative(test.coefficients * vector, _dot_magnitude(test.coefficients, vector)))
        return worst

    def emac_conservation(self) -> float:
        """EMAC residual tested with the interior momentum and angular momentum fields vanishes"""
        return self._tested(nl_residual(Formulation.EMAC, self.random_interior()))

    def newton_conservation(self) -> float:
        """J(u*) u - NL(u*) tested with the same fields vanishes"""
        u_star, u = self.random_interior(), self.random_interior()
        linearized = nl_jacobian(Formulation.EMAC, u_star) @ u.coefficients
        return self._tested(linearized - emac_newton_rhs_correction(u_star))

    def homogeneity(self) -> float:
        """J(u) u = 2 NL(u) for the quadratic EMAC nonlinearity"""
        u = self.random()
        applied = nl_jacobian(Formulation.EMAC, u) @ u.coefficients
        doubled = 2.0 * nl_residual(Formulation.EMAC, u)
        scale = float(np.sum(np.abs(applied)) + np.sum(np.abs(doubled)))
        return float(np.sum(np.abs(applied - doubled))) / scale if scale > 0 else 0.0

    def checks(self) -> Dict[str, Callable[[], float]]:
        return {
            "trilinear_antisymmetry": self.antisymmetry,
            "self_convection": self.self_convection,
            "transpose_gradient": self.transpose_gradient,
            "convection_matrix": self.convection_matrix,
            "deformation": self.deformation,
            "emac_energy": self.energy,
            "skew_energy": self.skew_energy,
            "emac_momentum": self.emac_conservation,
            "newton_momentum": self.newton_conservation,
            "jacobian_homogeneity": self.homogeneity,
        }


def verify_identities(
    seed: int = 0,
    nx: int = 8,
    trials: int = 100,
    tolerance: float = DEFAULT_TOLERANCE,
    zero_boundary: bool = True,
) -> List[IdentityCheck]:
    """
    Run every identity `trials` times on random fields over an nx-by-nx mesh of
    the unit square and report the worst relative violation of each. Setting
    `zero_boundary=False` drops the zero-trace hypothesis of the identities
    that need it.
    """
    space = TaylorHoodSpace(build_uniform_tri_mesh(nx, nx))
    battery = IdentityBattery(space, np.random.default_rng(seed), zero_boundary)
    report = []
    for name, check in battery.checks().items():
        violation = max(check() for _ in range(trials))
        passed = violation <= tolerance
        if not passed:
            logger.warning("identity %s violated: %.3e > %.0e", name, violation, tolerance)
        report.append(IdentityCheck(name, violation, passed))
    return report


def write_report(report: List[IdentityCheck], path: str):
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            print("identity,max_relative_violation,passed", file=f)
            for check in report:
                print(f"{check.name},{check.violation:.16e},{str(check.passed).lower()}", file=f)
    except OSError as e:
        raise OSError(e.errno, f"cannot write identity report to {path}: {e.strerror}") from e
