import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .diagnostics import kinetic_energy, linearization_energy_defect
from .forms import Formulation
from .mesh import build_uniform_tri_mesh
from .problems import LATTICE, BenchmarkProblem
from .space import TaylorHoodSpace
from .timeloop import FullNewton, Mode, NewtonK, SchemeConfig, advance, extrapolate, initial_state, run_simulation
from .utils import exact_steps

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StudyResult:
    name: str
    dts: List[float]
    values: List[float]
    orders: List[float]  # observed order between consecutive time steps

    def rows(self):
        orders = [None] + list(self.orders)
        return list(zip(self.dts, self.values, orders))


def observed_orders(dts: Sequence[float], values: Sequence[float]) -> List[float]:
    return [
        float(np.log(abs(values[i]) / abs(values[i + 1])) / np.log(dts[i] / dts[i + 1]))
        for i in range(len(dts) - 1)
    ]


def _space(problem: BenchmarkProblem, nx: Optional[int]) -> TaylorHoodSpace:
    nx = nx or problem.default_nx
    return TaylorHoodSpace(build_uniform_tri_mesh(nx, nx, problem.domain))


def temporal_self_convergence(
    nx: Optional[int] = None,
    dts: Sequence[float] = (0.01, 0.005, 0.0025),
    reference_dt: float = 0.00125,
    t_end: float = 0.5,
    nu: Optional[float] = None,
    mode: Mode = FullNewton(),
    problem: BenchmarkProblem = LATTICE,
) -> StudyResult:
    """L2 distance at t_end between runs with step `dt` and a reference run with a finer step"""
    space = _space(problem, nx)
    nu = problem.default_nu if nu is None else nu

    def final_velocity(dt):
        config = SchemeConfig(form=Formulation.EMAC, mode=mode, dt=dt, t_end=t_end, nu=nu)
        records, state = run_simulation(problem, config, space)
        if records[-1].diverged:
            raise RuntimeError(f"convergence run with dt={dt} diverged at t={records[-1].t}")
        return state.u_curr

    reference = final_velocity(reference_dt)
    errors = []
    for dt in dts:
        u = final_velocity(dt)
        difference = u.with_coefficients(u.coefficients - reference.coefficients)
        errors.append(float(np.sqrt(2.0 * kinetic_energy(difference))))
        logger.info("dt=%g: self-convergence error %.3e", dt, errors[-1])
    return StudyResult("time", list(dts), errors, observed_orders(dts, errors))


def newton_energy_defect(
    nx: Optional[int] = None,
    dts: Sequence[float] = (0.02, 0.01, 0.005),
    t_eval: float = 0.5,
    nu: Optional[float] = None,
    problem: BenchmarkProblem = LATTICE,
) -> StudyResult:
    """
    Energy defect per unit time that the one-step Newton linearization introduces
    in the step ending at t_eval. It shrinks like dt^4 for smooth solutions.
    """
    space = _space(problem, nx)
    nu = problem.default_nu if nu is None else nu
    defects = []
    for dt in dts:
        config = SchemeConfig(form=Formulation.EMAC, mode=NewtonK(1), dt=dt, t_end=t_eval, nu=nu)
        steps = exact_steps(t_eval, dt)
        if steps < 2:
            raise ValueError(f"t_eval={t_eval} must span at least two steps of {dt}")
        state = initial_state(problem, config, space)
        for n in range(1, steps + 1):
            previous = state
            state = advance(
                state, config, problem.load(space, (n - 0.5) * dt), problem.boundary(space, n * dt, nu)
            )
        defect = linearization_energy_defect(state.u_curr, previous.u_curr, extrapolate(previous))
        defects.append(abs(defect))
        logger.info("dt=%g: linearization energy defect %.3e", dt, defects[-1])
    return StudyResult("defect", list(dts), defects, observed_orders(dts, defects))


def write_study(result: StudyResult, path: str):
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            print("dt,value,order", file=f)
            for dt, value, order in result.rows():
                order = "" if order is None else f"{order:.16e}"
                print(f"{dt:.16e},{value:.16e},{order}", file=f)
    except OSError as e:
        raise OSError(e.errno, f"cannot write {result.name} study to {path}: {e.strerror}") from e
