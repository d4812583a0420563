import logging
import re
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import TYPE_CHECKING, Callable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp
import tqdm

from .assembly import (
    assemble_div,
    assemble_graddiv,
    assemble_load,
    assemble_mass,
    assemble_pressure_mean,
    assemble_stiffness,
)
from .diagnostics import DiagnosticsRecord, kinetic_energy, measure
from .forms import Formulation, nl_jacobian, nl_residual, skew_linearized_matrix
from .mesh import boundary_dofs, build_uniform_tri_mesh
from .saddle import SaddleSystem, solve
from .space import PRESSURE, VELOCITY, FEFunction, TaylorHoodSpace, interpolate
from .utils import exact_steps

if TYPE_CHECKING:
    from .problems import BenchmarkProblem

logger = logging.getLogger(__name__)

# run is declared blown up once the energy exceeds this multiple of its initial value;
# runs started from rest are only stopped by non-finite energy
BLOWUP_FACTOR = 1e16

# tolerated ||B u||_inf relative to max(1, ||u||)
DIVERGENCE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class FullNewton:
    tol: float = 1e-8  # threshold on the H1 norm of the Newton update
    max_iter: int = 25

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"Newton tolerance must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be at least 1, got {self.max_iter}")


@dataclass(frozen=True)
class NewtonK:
    k: int = 2  # number of linear solves per step

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"NewtonK needs a positive iteration count, got {self.k}")


@dataclass(frozen=True)
class SkewLinearized:
    pass


Mode = Union[FullNewton, NewtonK, SkewLinearized]

# the first step has no u^{n-2} to extrapolate from
STARTUP_NEWTON = FullNewton(tol=1e-8, max_iter=25)


@dataclass(frozen=True)
class SchemeConfig:
    form: Formulation = Formulation.EMAC
    mode: Mode = field(default_factory=FullNewton)
    dt: float = 0.01
    t_end: float = 10.0
    nu: float = 0.0
    gamma: float = 0.0  # grad-div coefficient

    def __post_init__(self):
        object.__setattr__(self, "form", Formulation.parse(self.form))
        if not isinstance(self.mode, (FullNewton, NewtonK, SkewLinearized)):
            raise ValueError(f"unknown time stepping mode {self.mode!r}")
        if isinstance(self.mode, (NewtonK, SkewLinearized)) and self.form != Formulation.EMAC:
            raise ValueError(
                f"{type(self.mode).__name__} is only defined for the emac form, got {self.form.value}"
            )
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_end >= self.dt:
            raise ValueError(f"t_end must be at least dt, got t_end={self.t_end}, dt={self.dt}")
        if not self.nu >= 0:
            raise ValueError(f"nu must be non-negative, got {self.nu}")
        if not self.gamma >= 0:
            raise ValueError(f"gamma must be non-negative, got {self.gamma}")

    @property
    def num_steps(self) -> int:
        return exact_steps(self.t_end, self.dt)


def parse_mode(name: str, tol: float = 1e-8) -> Mode:
    """Map the command-line names full, newton<k> and skewlin to a mode record"""
    if name == "full":
        return FullNewton(tol=tol)
    if name == "skewlin":
        return SkewLinearized()
    if match := re.fullmatch(r"newton(\d+)", name):
        return NewtonK(int(match.group(1)))
    raise ValueError(f"unknown mode {name!r}; expected full, newton<k> or skewlin")


@dataclass(frozen=True)
class TimeState:
    t: float
    step: int
    u_curr: FEFunction
    p_curr: FEFunction
    u_prev: Optional[FEFunction] = None
    newton_iters: int = 0
    nonlinear_residual: float = 0.0

    def __post_init__(self):
        space = self.u_curr.space
        for f in (self.p_curr, self.u_prev):
            if f is not None and f.space is not space:
                raise ValueError("state functions live in different spaces")


class NonConvergenceError(RuntimeError):
    """Newton iteration hit max_iter; `history` holds the update norms, `state` the last iterate"""

    def __init__(self, message: str, history: List[float], state: Optional[TimeState] = None):
        super().__init__(message)
        self.history = history
        self.state = state


class Operators(NamedTuple):
    mass: sp.csr_matrix
    stiffness: sp.csr_matrix
    graddiv: sp.csr_matrix
    div: sp.csr_matrix
    mean: np.ndarray
    h1: sp.csr_matrix  # mass + stiffness, the Newton step norm


@lru_cache(maxsize=8)
def operators(space: TaylorHoodSpace) -> Operators:
    mass = assemble_mass(space)
    stiffness = assemble_stiffness(space)
    return Operators(
        mass=mass,
        stiffness=stiffness,
        graddiv=assemble_graddiv(space),
        div=assemble_div(space),
        mean=assemble_pressure_mean(space),
        h1=(mass + stiffness).tocsr(),
    )


Boundary = Tuple[np.ndarray, np.ndarray]


def _boundary(space: TaylorHoodSpace, boundary: Optional[Boundary]) -> Boundary:
    if boundary is None:
        dofs = boundary_dofs(space.mesh, space)
        return dofs, np.zeros(dofs.size)
    return boundary


def _load(space: TaylorHoodSpace, load: Optional[np.ndarray]) -> np.ndarray:
    return np.zeros(space.n_vel_dofs) if load is None else load


def project_initial_condition(
    space: TaylorHoodSpace, velocity: Callable, boundary: Optional[Boundary] = None
) -> Tuple[FEFunction, FEFunction]:
    """
    Discretely divergence-free L2 projection of `velocity(x, y)`, with the
    boundary DOFs taken from its interpolant unless `boundary` is given.
    Returns the velocity and the constraint multiplier.
    """
    ops = operators(space)
    if boundary is None:
        dofs = boundary_dofs(space.mesh, space)
        boundary = dofs, interpolate(space, VELOCITY, velocity).coefficients[dofs]
    system = SaddleSystem(
        space,
        ops.mass,
        ops.div,
        ops.mean,
        assemble_load(space, velocity),
        np.zeros(space.n_pr_dofs),
        *boundary,
    )
    return solve(system)


def _viscous(config: SchemeConfig, ops: Operators) -> sp.csr_matrix:
    return config.nu * ops.stiffness + config.gamma * ops.graddiv


def _momentum_residual(
    state: TimeState, config: SchemeConfig, u_new: np.ndarray, load: np.ndarray
) -> np.ndarray:
    """Crank-Nicolson momentum residual at u^n, pressure excluded"""
    ops = operators(state.u_curr.space)
    u_old = state.u_curr.coefficients
    midpoint = state.u_curr.with_coefficients(0.5 * (u_new + u_old))
    return (
        ops.mass @ (u_new - u_old) / config.dt
        + _viscous(config, ops) @ midpoint.coefficients
        + nl_residual(config.form, midpoint)
        - load
    )


def _residual_norm(
    state: TimeState, config: SchemeConfig, u_new: FEFunction, p_new: FEFunction, load, dofs
) -> float:
    ops = operators(u_new.space)
    residual = _momentum_residual(state, config, u_new.coefficients, load) - ops.div.T @ p_new.coefficients
    residual[dofs] = 0.0
    return float(np.linalg.norm(residual))


def cn_step_full_newton(
    state: TimeState,
    config: SchemeConfig,
    load: Optional[np.ndarray] = None,
    boundary: Optional[Boundary] = None,
    newton: Optional[FullNewton] = None,
) -> TimeState:
    """
    Crank-Nicolson step with the nonlinearity of `config.form` resolved by
    Newton's method on u^n. `load` holds (f^{n+1/2}, phi_i) and `boundary` the
    Dirichlet DOFs and values at the new time level (homogeneous by default).
    """
    if newton is None:
        newton = config.mode if isinstance(config.mode, FullNewton) else STARTUP_NEWTON
    space = state.u_curr.space
    ops = operators(space)
    dofs, values = _boundary(space, boundary)
    load = _load(space, load)
    viscous = _viscous(config, ops)
    mass_dt = ops.mass / config.dt

    u_old = state.u_curr.coefficients
    u = u_old.copy()
    u[dofs] = values
    pressure = state.p_curr
    history = []
    for iteration in range(1, newton.max_iter + 1):
        midpoint = state.u_curr.with_coefficients(0.5 * (u + u_old))
        residual = _momentum_residual(state, config, u, load)
        jacobian = mass_dt + 0.5 * (viscous + nl_jacobian(config.form, midpoint))
        system = SaddleSystem(
            space, jacobian.tocsr(), ops.div, ops.mean, -residual, -(ops.div @ u), dofs, 0.0
        )
        update, pressure = solve(system)
        delta = update.coefficients
        u = u + delta
        step_norm = float(np.sqrt(max(delta @ (ops.h1 @ delta), 0.0)))
        history.append(step_norm)
        logger.debug("step %d, newton iteration %d: |du|_H1 = %.3e", state.step + 1, iteration, step_norm)
        if step_norm < newton.tol:
            break
    else:
        last = replace(
            state,
            t=state.t + config.dt,
            step=state.step + 1,
            u_curr=state.u_curr.with_coefficients(u),
            p_curr=pressure,
            u_prev=state.u_curr,
            newton_iters=newton.max_iter,
        )
        raise NonConvergenceError(
            f"Newton did not converge in {newton.max_iter} iterations at step {state.step + 1} "
            f"(last update norm {history[-1]:.3e})",
            history,
            last,
        )

    u_new = state.u_curr.with_coefficients(u)
    return TimeState(
        t=state.t + config.dt,
        step=state.step + 1,
        u_curr=u_new,
        p_curr=pressure,
        u_prev=state.u_curr,
        newton_iters=len(history),
        nonlinear_residual=_residual_norm(state, config, u_new, pressure, load, dofs),
    )


def extrapolate(state: TimeState) -> FEFunction:
    """u* = 3/2 u^{n-1} - 1/2 u^{n-2}"""
    if state.u_prev is None:
        raise ValueError("extrapolation needs two previous velocities; take the first step with Newton")
    return state.u_curr.with_coefficients(
        1.5 * state.u_curr.coefficients - 0.5 * state.u_prev.coefficients
    )


def _linear_step(
    state: TimeState,
    config: SchemeConfig,
    operator: sp.spmatrix,
    rhs_extra: np.ndarray,
    load: np.ndarray,
    boundary: Boundary,
) -> Tuple[FEFunction, FEFunction]:
    """Solve M(u - u_old)/dt + 1/2 (V + operator)(u + u_old) - B^T p = load + rhs_extra"""
    space = state.u_curr.space
    ops = operators(space)
    half = 0.5 * (_viscous(config, ops) + operator)
    u_old = state.u_curr.coefficients
    system = SaddleSystem(
        space,
        (ops.mass / config.dt + half).tocsr(),
        ops.div,
        ops.mean,
        ops.mass @ u_old / config.dt - half @ u_old + load + rhs_extra,
        np.zeros(space.n_pr_dofs),
        *boundary,
    )
    return solve(system)


def cn_step_newton_k(
    state: TimeState,
    config: SchemeConfig,
    load: Optional[np.ndarray] = None,
    boundary: Optional[Boundary] = None,
) -> TimeState:
    """
    Exactly k Newton-linearized EMAC solves. The first linearizes at the
    extrapolation of the two previous velocities, later ones at the midpoint
    of the latest iterate and u^{n-1}.
    """
    if not isinstance(config.mode, NewtonK):
        raise ValueError(f"cn_step_newton_k needs a NewtonK mode, got {config.mode!r}")
    if config.form != Formulation.EMAC:
        raise ValueError("Newton-linearized steps are only defined for the emac form")
    space = state.u_curr.space
    boundary = _boundary(space, boundary)
    load = _load(space, load)

    u_star = extrapolate(state)
    for j in range(config.mode.k):
        if j > 0:
            u_star = u_new.with_coefficients(0.5 * (u_new.coefficients + state.u_curr.coefficients))
        u_new, p_new = _linear_step(
            state,
            config,
            nl_jacobian(Formulation.EMAC, u_star),
            nl_residual(Formulation.EMAC, u_star),
            load,
            boundary,
        )
        logger.debug("step %d, linearized solve %d of %d", state.step + 1, j + 1, config.mode.k)

    return TimeState(
        t=state.t + config.dt,
        step=state.step + 1,
        u_curr=u_new,
        p_curr=p_new,
        u_prev=state.u_curr,
        newton_iters=config.mode.k,
        nonlinear_residual=_residual_norm(state, config, u_new, p_new, load, boundary[0]),
    )


def cn_step_skew_linearized(
    state: TimeState,
    config: SchemeConfig,
    load: Optional[np.ndarray] = None,
    boundary: Optional[Boundary] = None,
) -> TimeState:
    """One linear solve with the skew-symmetrized EMAC operator at the extrapolated velocity"""
    if config.form != Formulation.EMAC:
        raise ValueError("the skew-symmetrized linearization is only defined for the emac form")
    space = state.u_curr.space
    boundary = _boundary(space, boundary)
    load = _load(space, load)

    operator = skew_linearized_matrix(extrapolate(state))
    u_new, p_new = _linear_step(state, config, operator, np.zeros(space.n_vel_dofs), load, boundary)
    return TimeState(
        t=state.t + config.dt,
        step=state.step + 1,
        u_curr=u_new,
        p_curr=p_new,
        u_prev=state.u_curr,
        newton_iters=1,
        nonlinear_residual=_residual_norm(state, config, u_new, p_new, load, boundary[0]),
    )


def advance(
    state: TimeState,
    config: SchemeConfig,
    load: Optional[np.ndarray] = None,
    boundary: Optional[Boundary] = None,
) -> TimeState:
    """Take the next step, using full Newton for the first one"""
    if state.u_prev is None or isinstance(config.mode, FullNewton):
        return cn_step_full_newton(state, config, load, boundary)
    if isinstance(config.mode, NewtonK):
        return cn_step_newton_k(state, config, load, boundary)
    return cn_step_skew_linearized(state, config, load, boundary)


def initial_state(
    problem: "BenchmarkProblem", config: SchemeConfig, space: TaylorHoodSpace, ic: str = "project"
) -> TimeState:
    velocity = problem.initial_velocity(config.nu)
    if ic == "project":
        u0, _ = project_initial_condition(space, velocity, problem.boundary(space, 0.0, config.nu))
    elif ic == "interpolate":
        u0 = interpolate(space, VELOCITY, velocity)
    else:
        raise ValueError(f"unknown initial condition {ic!r}; expected project or interpolate")
    p0 = interpolate(space, PRESSURE, problem.initial_pressure(config.nu))
    return TimeState(t=0.0, step=0, u_curr=u0, p_curr=p0)


RecordSink = Callable[[DiagnosticsRecord, TimeState], None]


def _check_divergence(state: TimeState):
    ops = operators(state.u_curr.space)
    violation = float(np.max(np.abs(ops.div @ state.u_curr.coefficients)))
    scale = max(1.0, np.sqrt(2.0 * kinetic_energy(state.u_curr)))
    if violation > DIVERGENCE_TOLERANCE * scale:
        logger.warning("step %d: |B u|_inf = %.3e exceeds %.0e", state.step, violation, DIVERGENCE_TOLERANCE * scale)


def run_simulation(
    problem: "BenchmarkProblem",
    config: SchemeConfig,
    space: Optional[TaylorHoodSpace] = None,
    ic: str = "project",
    sinks: Sequence[RecordSink] = (),
    progress: bool = False,
) -> Tuple[List[DiagnosticsRecord], TimeState]:
    """
    Advance `problem` from t = 0 to config.t_end, emitting one record for the
    initial state and one per step. A run whose energy leaves the blow-up
    bound, turns non-finite or whose Newton iteration stalls is stopped with
    its last record flagged as diverged.
    """
    num_steps = config.num_steps
    if space is None:
        space = TaylorHoodSpace(build_uniform_tri_mesh(problem.default_nx, problem.default_nx, problem.domain))
    exact = problem.velocity(config.nu)

    def emit(state: TimeState, diverged: bool = False) -> DiagnosticsRecord:
        record = measure(state, exact, diverged)
        records.append(record)
        for sink in sinks:
            sink(record, state)
        return record

    records: List[DiagnosticsRecord] = []
    state = initial_state(problem, config, space, ic)
    initial_energy = emit(state).energy
    logger.info(
        "%s: %s/%s, %d steps of %g, %r",
        problem.name, config.form.value, type(config.mode).__name__, num_steps, config.dt, space,
    )

    with tqdm.tqdm(total=num_steps, unit="step", disable=not progress) as pbar:
        for n in range(1, num_steps + 1):
            t_mid = (n - 0.5) * config.dt
            try:
                state = advance(
                    state,
                    config,
                    problem.load(space, t_mid),
                    problem.boundary(space, n * config.dt, config.nu),
                )
            except NonConvergenceError as e:
                logger.warning("%s; treating the run as diverged", e)
                emit(replace(e.state, t=n * config.dt, step=n), diverged=True)
                break
            state = replace(state, t=n * config.dt)

            energy = kinetic_energy(state.u_curr)
            if not np.isfinite(energy) or (initial_energy > 0.0 and energy > BLOWUP_FACTOR * initial_energy):
                logger.warning("energy %.3e at t=%g left the blow-up bound; stopping", energy, state.t)
                emit(state, diverged=True)
                break
            _check_divergence(state)
            emit(state)
            pbar.update()

    return records, state
