import numpy as np
import pytest

from pyemac.assembly import (
    assemble_div,
    assemble_graddiv,
    assemble_load,
    assemble_mass,
    assemble_pressure_mean,
    assemble_stiffness,
)
from pyemac.basis import p2_basis_eval
from pyemac.diagnostics import kinetic_energy, l2_error
from pyemac.mesh import build_uniform_tri_mesh
from pyemac.problems import GRESHO_ENERGY, gresho_exact
from pyemac.quadrature import monomial_integral, quadrature_rule
from pyemac.space import PRESSURE, VELOCITY, FEFunction, TaylorHoodSpace, interpolate


def test_basis_lagrange_property():
    nodes = [(1, 0, 0), (0, 1, 0), (0, 0, 1), (0, 0.5, 0.5), (0.5, 0, 0.5), (0.5, 0.5, 0)]
    for i, node in enumerate(nodes):
        values, _ = p2_basis_eval(node)
        np.testing.assert_allclose(values, np.eye(6)[i], atol=1e-15)


def test_basis_partition_of_unity(rng):
    for _ in range(20):
        lam = rng.dirichlet(np.ones(3))
        lam[2] = 1.0 - lam[0] - lam[1]
        values, gradients = p2_basis_eval(lam)
        assert values.sum() == pytest.approx(1.0, abs=1e-14)
        np.testing.assert_allclose(gradients.sum(axis=0), 0.0, atol=1e-13)


def test_basis_at_centroid():
    values, _ = p2_basis_eval([1 / 3, 1 / 3, 1 / 3])
    np.testing.assert_allclose(values[:3], -1 / 9, atol=1e-15)
    np.testing.assert_allclose(values[3:], 4 / 9, atol=1e-15)


@pytest.mark.parametrize("point", [(0.5, 0.6, -0.1), (0.2, 0.2, 0.2), (1.0, 0.0)])
def test_basis_rejects_invalid_points(point):
    with pytest.raises(ValueError):
        p2_basis_eval(point)


def test_quadrature_area_and_known_monomial():
    rule = quadrature_rule(5)
    assert rule.weights.sum() == pytest.approx(0.5, rel=1e-14)
    assert rule.integrate_reference(lambda x, y: x**2 * y**3) == pytest.approx(1 / 420, rel=1e-14)
    assert monomial_integral(2, 3) == pytest.approx(1 / 420)


@pytest.mark.parametrize("degree", range(1, 11))
def test_quadrature_exactness(degree):
    rule = quadrature_rule(degree)
    assert rule.exactness_degree >= degree
    assert np.all(rule.weights > 0)
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            value = rule.integrate_reference(lambda x, y: x**a * y**b)
            assert value == pytest.approx(monomial_integral(a, b), rel=1e-14, abs=1e-16)


@pytest.mark.parametrize("degree", [0, 11, 2.5])
def test_quadrature_unsupported_degree(degree):
    with pytest.raises(NotImplementedError):
        quadrature_rule(degree)


def test_space_dimensions(unit_space):
    mesh = unit_space.mesh
    assert unit_space.n_vel_dofs == 2 * (mesh.num_vertices + mesh.num_edges)
    assert unit_space.n_pr_dofs == mesh.num_vertices
    for nodes in unit_space.cell_nodes:
        assert len(set(nodes)) == 6
    for nodes in unit_space.cell_pr_dofs:
        assert len(set(nodes)) == 3


def test_function_length_is_checked(unit_space):
    with pytest.raises(ValueError):
        FEFunction(unit_space, np.zeros(unit_space.n_pr_dofs), VELOCITY)
    with pytest.raises(ValueError):
        FEFunction(unit_space, np.zeros(unit_space.n_pr_dofs), "vorticity")


def test_mass_matrix(unit_space, rng):
    mass = assemble_mass(unit_space)
    ones = np.ones(unit_space.n_vel_dofs)
    assert ones @ mass @ ones == pytest.approx(2.0, rel=1e-14)
    assert abs(mass - mass.T).max() < 1e-15
    for _ in range(100):
        w = rng.standard_normal(unit_space.n_vel_dofs)
        assert w @ (mass @ w) > 0


def test_stiffness_kills_constants(unit_space):
    stiffness = assemble_stiffness(unit_space)
    constant = interpolate(unit_space, VELOCITY, lambda x, y: (np.full_like(x, 2.0), np.full_like(x, -3.0)))
    np.testing.assert_allclose(stiffness @ constant.coefficients, 0.0, atol=1e-12)
    assert abs(stiffness - stiffness.T).max() < 1e-12

    eigenvalues = np.linalg.eigvalsh(stiffness.toarray())
    assert eigenvalues.min() > -1e-10
    assert np.sum(np.abs(eigenvalues) < 1e-9) == 2


def test_divergence_matrix(unit_space, rng):
    div = assemble_div(unit_space)
    assert div.shape == (unit_space.n_pr_dofs, unit_space.n_vel_dofs)
    constant = interpolate(unit_space, VELOCITY, lambda x, y: (np.ones_like(x), np.ones_like(x)))
    np.testing.assert_allclose(div @ constant.coefficients, 0.0, atol=1e-13)

    # (div u, q) against direct quadrature
    u = rng.standard_normal(unit_space.n_vel_dofs)
    q = rng.standard_normal(unit_space.n_pr_dofs)
    table = unit_space.tabulate(5)
    _, gradients = unit_space.velocity_at(u, table)
    direct = np.sum(table.weights * (gradients[..., 0, 0] + gradients[..., 1, 1]) * unit_space.pressure_at(q, table))
    assert q @ (div @ u) == pytest.approx(direct, rel=1e-12)


def test_graddiv_matches_divergence_norm(unit_space, rng):
    graddiv = assemble_graddiv(unit_space)
    u = rng.standard_normal(unit_space.n_vel_dofs)
    table = unit_space.tabulate(5)
    _, gradients = unit_space.velocity_at(u, table)
    direct = np.sum(table.weights * (gradients[..., 0, 0] + gradients[..., 1, 1]) ** 2)
    assert u @ (graddiv @ u) == pytest.approx(direct, rel=1e-12)
    assert abs(graddiv - graddiv.T).max() < 1e-12


def test_pressure_mean_integrates_pressures(unit_space):
    mean = assemble_pressure_mean(unit_space)
    assert mean.sum() == pytest.approx(1.0, rel=1e-14)
    linear = interpolate(unit_space, PRESSURE, lambda x, y: x + 2 * y)
    assert mean @ linear.coefficients == pytest.approx(1.5, rel=1e-14)


def test_assembly_is_bitwise_repeatable(unit_space):
    a = assemble_stiffness(TaylorHoodSpace(unit_space.mesh))
    b = assemble_stiffness(TaylorHoodSpace(unit_space.mesh))
    np.testing.assert_array_equal(a.indptr, b.indptr)
    np.testing.assert_array_equal(a.indices, b.indices)
    np.testing.assert_array_equal(a.data, b.data)


def test_csr_indices_sorted(unit_space):
    mass = assemble_mass(unit_space)
    assert mass.has_sorted_indices
    for row in range(mass.shape[0]):
        cols = mass.indices[mass.indptr[row] : mass.indptr[row + 1]]
        assert np.all(np.diff(cols) > 0)


def test_interpolation_reproduces_quadratics(unit_space):
    def field(x, y):
        return x**2 - x * y + 0.5, 3 * y**2 + x

    u = interpolate(unit_space, VELOCITY, field)
    assert l2_error(u, lambda x, y, t: field(x, y)) < 1e-13


def test_interpolate_zero(unit_space):
    u = interpolate(unit_space, VELOCITY, lambda x, y: (0 * x, 0 * y))
    np.testing.assert_array_equal(u.coefficients, 0.0)


def test_load_of_constant_field(unit_space):
    load = assemble_load(unit_space, lambda x, y: (np.ones_like(x), np.zeros_like(x)))
    n = unit_space.n_vel_nodes
    assert load[:n].sum() == pytest.approx(1.0, rel=1e-14)
    np.testing.assert_allclose(load[n:], 0.0, atol=1e-15)


def test_gresho_interpolant_energy():
    space = TaylorHoodSpace(build_uniform_tri_mesh(48, 48, (-0.5, 0.5, -0.5, 0.5)))
    u = interpolate(space, VELOCITY, lambda x, y: gresho_exact(x, y)[0])
    assert kinetic_energy(u) == pytest.approx(GRESHO_ENERGY, rel=0.02)
