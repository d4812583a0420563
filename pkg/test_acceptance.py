"""Desk-scale benchmark runs; enable with `pytest --runslow`"""

import math

import numpy as np
import pytest

from pyemac.assembly import assemble_div
from pyemac.convergence import newton_energy_defect, temporal_self_convergence
from pyemac.diagnostics import kinetic_energy, l2_error
from pyemac.forms import Formulation
from pyemac.identities import verify_identities
from pyemac.mesh import build_uniform_tri_mesh
from pyemac.problems import GRESHO, LATTICE
from pyemac.simulate import EXIT_DIVERGED, cli_main
from pyemac.space import TaylorHoodSpace
from pyemac.timeloop import FullNewton, NewtonK, SchemeConfig, SkewLinearized, run_simulation

pytestmark = pytest.mark.slow

T_END = 10.0
DT = 0.01


@pytest.fixture(scope="module")
def gresho_space():
    return TaylorHoodSpace(build_uniform_tri_mesh(48, 48, GRESHO.domain))


@pytest.fixture(scope="module")
def lattice_space():
    return TaylorHoodSpace(build_uniform_tri_mesh(32, 32, LATTICE.domain))


@pytest.fixture(scope="module")
def gresho_runs(gresho_space):
    runs = {}
    for name, mode in [("full", FullNewton(tol=1e-8)), ("newton2", NewtonK(2)), ("skewlin", SkewLinearized())]:
        runs[name] = run_simulation(GRESHO, SchemeConfig(mode=mode, dt=DT, t_end=T_END), gresho_space)
    return runs


def drifts(records):
    first, last = records[0], records[-1]
    scale = math.sqrt(2.0 * first.energy)
    return (
        abs(last.energy - first.energy) / first.energy,
        max(abs(last.momentum_x - first.momentum_x), abs(last.momentum_y - first.momentum_y)) / scale,
        abs(last.ang_momentum - first.ang_momentum) / abs(first.ang_momentum),
    )


def check_incompressible(state):
    u = state.u_curr.coefficients
    bound = 1e-9 * max(1.0, math.sqrt(2.0 * kinetic_energy(state.u_curr)))
    assert np.max(np.abs(assemble_div(state.u_curr.space) @ u)) <= bound


def test_identity_battery():
    report = verify_identities(seed=0, nx=8, trials=100)
    assert all(check.passed for check in report), [c for c in report if not c.passed]


@pytest.mark.parametrize("name", ["full", "newton2"])
def test_emac_conserves_gresho_invariants(gresho_runs, name):
    records, state = gresho_runs[name]
    assert len(records) == 1001 and not records[-1].diverged
    energy, momentum, angular = drifts(records)
    assert energy <= 1e-6
    assert momentum <= 1e-6
    assert angular <= 1e-5
    check_incompressible(state)


def test_full_newton_iteration_count(gresho_runs):
    records, _ = gresho_runs["full"]
    assert np.mean([r.newton_iters for r in records[1:]]) <= 4.0


def test_newton2_matches_full_newton(gresho_runs):
    full = gresho_runs["full"][1].u_curr
    newton2 = gresho_runs["newton2"][1].u_curr
    difference = full.with_coefficients(full.coefficients - newton2.coefficients)
    initial = gresho_runs["full"][0][0].energy
    assert math.sqrt(2.0 * kinetic_energy(difference)) <= 1e-4 * math.sqrt(2.0 * initial)


def test_skew_linearization_keeps_energy_but_loses_angular_momentum(gresho_runs):
    records, _ = gresho_runs["skewlin"]
    e0 = records[0].energy
    for previous, current in zip(records[1:], records[2:]):
        assert abs(current.energy - previous.energy) <= 1e-10 * e0
    _, _, skew_angular = drifts(records)
    _, _, newton_angular = drifts(gresho_runs["newton2"][0])
    assert skew_angular >= 100 * newton_angular


def test_newton1_blows_up(tmp_path):
    out = tmp_path / "gresho_newton1.csv"
    status = cli_main(["gresho", "--mode", "newton1", "--out", str(out)])
    assert status == EXIT_DIVERGED
    last = out.read_text().splitlines()[-1].split(",")
    assert last[-1] == "true"
    assert 2.0 < float(last[1]) < 10.0


def test_newton1_energy_defect_order():
    result = newton_energy_defect(nx=32, dts=(0.02, 0.01, 0.005), t_eval=0.5)
    assert all(3.0 <= order <= 5.0 for order in result.orders), result.orders


@pytest.mark.parametrize("form", [Formulation.CONV, Formulation.SKEW, Formulation.CONS, Formulation.ROT])
def test_lattice_non_emac_forms_blow_up(lattice_space, form):
    config = SchemeConfig(form=form, mode=FullNewton(), dt=DT, t_end=T_END, nu=1e-7)
    records, _ = run_simulation(LATTICE, config, lattice_space)
    assert records[-1].diverged
    assert records[-1].t < T_END


@pytest.mark.parametrize("mode", [FullNewton(), NewtonK(2), NewtonK(3)])
def test_lattice_emac_stays_accurate(lattice_space, mode):
    config = SchemeConfig(mode=mode, dt=DT, t_end=T_END, nu=1e-7)
    records, state = run_simulation(LATTICE, config, lattice_space)
    assert not any(r.diverged for r in records)
    assert records[-1].l2_error <= 0.5 * math.sqrt(2.0 * records[0].energy)
    assert records[-1].l2_error == pytest.approx(l2_error(state.u_curr, LATTICE.velocity(1e-7), T_END))
    check_incompressible(state)


def test_full_newton_is_second_order_in_time():
    result = temporal_self_convergence(nx=32, dts=(0.01, 0.005, 0.0025), reference_dt=0.00125, t_end=0.5)
    assert all(1.7 <= order <= 2.3 for order in result.orders), result.orders


def test_runs_are_bitwise_reproducible(tmp_path):
    paths = [tmp_path / f"gresho_{i}.csv" for i in range(2)]
    for path in paths:
        assert cli_main(["gresho", "--out", str(path)]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()
