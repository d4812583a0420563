from enum import Enum
from typing import Tuple, Union

import numpy as np
import scipy.sparse as sp

from .assembly import assemble_velocity_operator, integrate_against_basis
from .mesh import boundary_dofs
from .quadrature import ASSEMBLY_DEGREE
from .space import VELOCITY, FEFunction, TaylorHoodSpace, interpolate

# (J a) = e_z x a in the plane
ROTATION = np.array([[0.0, -1.0], [1.0, 0.0]])
EYE = np.eye(2)


class Formulation(str, Enum):
    EMAC = "emac"
    CONV = "conv"
    SKEW = "skew"
    CONS = "cons"
    ROT = "rot"

    @classmethod
    def parse(cls, tag: Union[str, "Formulation"]) -> "Formulation":
        if isinstance(tag, cls):
            return tag
        try:
            return cls(str(tag).lower())
        except ValueError:
            raise ValueError(
                f"unknown formulation {tag!r}; expected one of {[f.value for f in cls]}"
            ) from None


# weight of the ((div u) u, v) term in each formulation
DIVERGENCE_WEIGHT = {
    Formulation.EMAC: 1.0,
    Formulation.CONV: 0.0,
    Formulation.SKEW: 0.5,
    Formulation.CONS: 1.0,
    Formulation.ROT: 0.0,
}


def _check_velocities(*functions: FEFunction) -> TaylorHoodSpace:
    space = functions[0].space
    for f in functions:
        if f.kind != VELOCITY:
            raise ValueError("expected velocity functions")
        if f.space is not space:
            raise ValueError("functions live in different spaces")
    return space


def _fields(u: FEFunction):
    table = u.space.tabulate(ASSEMBLY_DEGREE)
    values, gradients = u.space.velocity_at(u.coefficients, table)
    return table, values, gradients


def _divergence(gradients: np.ndarray) -> np.ndarray:
    return gradients[..., 0, 0] + gradients[..., 1, 1]


def _integrate(table, integrand: np.ndarray) -> float:
    return float(np.sum(table.weights * integrand))


def trilinear_integrand(u: FEFunction, v: FEFunction, w: FEFunction) -> Tuple[object, np.ndarray]:
    """Pointwise (u . grad v) . w at the assembly quadrature points"""
    _check_velocities(u, v, w)
    table, uu, _ = _fields(u)
    _, _, gv = _fields(v)
    _, ww, _ = _fields(w)
    return table, np.einsum("cqj,cqij,cqi->cq", uu, gv, ww)


def trilinear_b(u: FEFunction, v: FEFunction, w: FEFunction) -> float:
    """b(u, v, w) = (u . grad v, w)"""
    table, integrand = trilinear_integrand(u, v, w)
    return _integrate(table, integrand)


def div_product(u: FEFunction, v: FEFunction, w: FEFunction) -> float:
    """((div u) v, w)"""
    _check_velocities(u, v, w)
    table, _, gu = _fields(u)
    _, vv, _ = _fields(v)
    _, ww, _ = _fields(w)
    return _integrate(table, _divergence(gu) * np.einsum("cqi,cqi->cq", vv, ww))


def grad_transpose_product(u: FEFunction, v: FEFunction, w: FEFunction) -> float:
    """((grad v)^T w, u)"""
    _check_velocities(u, v, w)
    table, uu, _ = _fields(u)
    _, _, gv = _fields(v)
    _, ww, _ = _fields(w)
    return _integrate(table, np.einsum("cqij,cqi,cqj->cq", gv, ww, uu))


def deformation_product(u: FEFunction, v: FEFunction, w: FEFunction) -> float:
    """(D(u) v, w) with D(u) the symmetric part of grad u"""
    _check_velocities(u, v, w)
    table, _, gu = _fields(u)
    _, vv, _ = _fields(v)
    _, ww, _ = _fields(w)
    deformation = 0.5 * (gu + np.swapaxes(gu, -1, -2))
    return _integrate(table, np.einsum("cqij,cqj,cqi->cq", deformation, vv, ww))


def nonlinear_integrand(form: Formulation, values: np.ndarray, gradients: np.ndarray) -> np.ndarray:
    form = Formulation.parse(form)
    if form == Formulation.ROT:
        vorticity = gradients[..., 1, 0] - gradients[..., 0, 1]
        return vorticity[..., None] * np.einsum("ik,cqk->cqi", ROTATION, values)

    result = np.einsum("cqij,cqj->cqi", gradients, values)
    if form == Formulation.EMAC:
        result += np.einsum("cqji,cqj->cqi", gradients, values)
    alpha = DIVERGENCE_WEIGHT[form]
    if alpha:
        result += alpha * _divergence(gradients)[..., None] * values
    return result


def nl_residual(form: Formulation, u: FEFunction) -> np.ndarray:
    """
    Entries (NL(u), phi_i) of the chosen nonlinearity:

        EMAC  2 D(u) u + (div u) u
        CONV  (u . grad) u
        SKEW  (u . grad) u + 1/2 (div u) u
        CONS  (u . grad) u + (div u) u
        ROT   (curl u) x u
    """
    form = Formulation.parse(form)
    _check_velocities(u)
    table, values, gradients = _fields(u)
    return integrate_against_basis(u.space, table, nonlinear_integrand(form, values, gradients))


def _linearization(form: Formulation, values: np.ndarray, gradients: np.ndarray):
    """Coefficients (L1, L2) of the Gateaux derivative w -> L1 w + L2 grad w"""
    if form == Formulation.ROT:
        vorticity = gradients[..., 1, 0] - gradients[..., 0, 1]
        rotated = np.einsum("ik,cqk->cqi", ROTATION, values)
        trial_values = vorticity[..., None, None] * ROTATION
        trial_gradients = np.einsum("cqi,kj->cqikj", rotated, ROTATION)
        return trial_values, trial_gradients

    trial_values = gradients.copy()
    trial_gradients = np.einsum("ik,cqj->cqikj", EYE, values)
    if form == Formulation.EMAC:
        trial_values += np.swapaxes(gradients, -1, -2)
        trial_gradients += np.einsum("ij,cqk->cqikj", EYE, values)
    alpha = DIVERGENCE_WEIGHT[form]
    if alpha:
        trial_values += alpha * _divergence(gradients)[..., None, None] * EYE
        trial_gradients += alpha * np.einsum("cqi,kj->cqikj", values, EYE)
    return trial_values, trial_gradients


def nl_jacobian(form: Formulation, u_lin: FEFunction) -> sp.csr_matrix:
    """Exact derivative of nl_residual(form, .) at u_lin"""
    form = Formulation.parse(form)
    _check_velocities(u_lin)
    table, values, gradients = _fields(u_lin)
    trial_values, trial_gradients = _linearization(form, values, gradients)
    return assemble_velocity_operator(
        u_lin.space, table, trial_values=trial_values, trial_gradients=trial_gradients
    )


def convection_matrix(u: FEFunction) -> sp.csr_matrix:
    """Matrix C with w^T C v = b(u, v, w)"""
    _check_velocities(u)
    table, values, _ = _fields(u)
    return assemble_velocity_operator(
        u.space, table, trial_gradients=np.einsum("ik,cqj->cqikj", EYE, values)
    )


def skew_linearized_matrix(u_star: FEFunction) -> sp.csr_matrix:
    """(L w)_i = b(phi_i, w, u*) - b(w, phi_i, u*); w^T L w vanishes identically"""
    _check_velocities(u_star)
    table, values, _ = _fields(u_star)
    return assemble_velocity_operator(
        u_star.space,
        table,
        trial_gradients=np.einsum("mj,cqk->cqmkj", EYE, values),
        test_gradients=-np.einsum("cqm,jk->cqmjk", values, EYE),
    )


def emac_newton_rhs_correction(u_star: FEFunction) -> np.ndarray:
    """(2 D(u*) u* + (div u*) u*, phi_i), moved to the right-hand side of a Newton-linearized step"""
    return nl_residual(Formulation.EMAC, u_star)


def tilde_momentum_fields(space: TaylorHoodSpace) -> Tuple[FEFunction, FEFunction]:
    """Interpolants of e_1 and e_2 with every boundary DOF set to zero"""
    fields = []
    for component in range(2):
        f = interpolate(
            space,
            VELOCITY,
            lambda x, y, c=component: (np.full_like(x, 1.0 - c), np.full_like(x, float(c))),
        )
        fields.append(_zero_boundary(f))
    return fields[0], fields[1]


def tilde_angular_field(space: TaylorHoodSpace) -> FEFunction:
    """Interpolant of (y, -x), exact in P2, with every boundary DOF set to zero"""
    return _zero_boundary(interpolate(space, VELOCITY, lambda x, y: (y, -x)))


def _zero_boundary(f: FEFunction) -> FEFunction:
    coefficients = f.coefficients.copy()
    coefficients[boundary_dofs(f.space.mesh, f.space)] = 0.0
    return f.with_coefficients(coefficients)
