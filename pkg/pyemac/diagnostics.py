import logging
from dataclasses import astuple, dataclass, fields
from typing import TYPE_CHECKING, Callable, Iterable, List, Optional, TextIO, Tuple, Union

import numpy as np

from .forms import Formulation, nl_residual
from .quadrature import ASSEMBLY_DEGREE, ERROR_DEGREE
from .space import VELOCITY, FEFunction

if TYPE_CHECKING:
    from .timeloop import TimeState

logger = logging.getLogger(__name__)

CSV_HEADER = (
    "step,t,energy,momentum_x,momentum_y,ang_momentum,div_norm,"
    "l2_error,newton_iters,nonlinear_residual,diverged"
)


@dataclass(frozen=True)
class DiagnosticsRecord:
    step: int
    t: float
    energy: float
    momentum_x: float
    momentum_y: float
    ang_momentum: float
    div_norm: float
    l2_error: Optional[float]
    newton_iters: int
    nonlinear_residual: float
    diverged: bool


def _check_velocity(u: FEFunction):
    if u.kind != VELOCITY:
        raise ValueError("expected a velocity function")


def _velocity_fields(u: FEFunction, degree: int = ASSEMBLY_DEGREE):
    _check_velocity(u)
    table = u.space.tabulate(degree)
    values, gradients = u.space.velocity_at(u.coefficients, table)
    return table, values, gradients


def kinetic_energy(u: FEFunction) -> float:
    """E = 1/2 (u, u)"""
    table, values, _ = _velocity_fields(u)
    return 0.5 * float(np.sum(table.weights[..., None] * values**2))


def linear_momentum(u: FEFunction) -> Tuple[float, float]:
    table, values, _ = _velocity_fields(u)
    total = np.einsum("cq,cqi->i", table.weights, values)
    return float(total[0]), float(total[1])


def angular_momentum(u: FEFunction) -> float:
    """Integral of u_1 y - u_2 x, the out-of-plane component of u x x"""
    table, values, _ = _velocity_fields(u)
    x, y = table.points[..., 0], table.points[..., 1]
    return float(np.sum(table.weights * (values[..., 0] * y - values[..., 1] * x)))


def div_l2_norm(u: FEFunction) -> float:
    table, _, gradients = _velocity_fields(u)
    div = gradients[..., 0, 0] + gradients[..., 1, 1]
    return float(np.sqrt(np.sum(table.weights * div**2)))


def gradient_l2_norm_squared(u: FEFunction) -> float:
    table, _, gradients = _velocity_fields(u)
    return float(np.sum(table.weights[..., None, None] * gradients**2))


def l2_error(u: FEFunction, exact: Callable, t: float = 0.0) -> float:
    """||u - exact(., t)|| with the degree-8 rule; `exact(x, y, t)` returns (u1, u2)"""
    table, values, _ = _velocity_fields(u, ERROR_DEGREE)
    x, y = table.points[..., 0], table.points[..., 1]
    e1, e2 = exact(x, y, t)
    err = (values[..., 0] - e1) ** 2 + (values[..., 1] - e2) ** 2
    return float(np.sqrt(np.sum(table.weights * err)))


def energy_balance_defect(
    u_new: FEFunction,
    u_old: FEFunction,
    dt: float,
    nu: float = 0.0,
    gamma: float = 0.0,
    load: Optional[np.ndarray] = None,
) -> float:
    """
    E^n - E^{n-1} + dt nu |grad u^{n+1/2}|^2 + dt gamma |div u^{n+1/2}|^2 - dt (f, u^{n+1/2}),
    which vanishes for an energy-conserving step with homogeneous boundary data.
    `load` holds the entries (f^{n+1/2}, phi_i).
    """
    midpoint = u_new.with_coefficients(0.5 * (u_new.coefficients + u_old.coefficients))
    defect = kinetic_energy(u_new) - kinetic_energy(u_old)
    defect += dt * nu * gradient_l2_norm_squared(midpoint)
    defect += dt * gamma * div_l2_norm(midpoint) ** 2
    if load is not None:
        defect -= dt * float(load @ midpoint.coefficients)
    return defect


def linearization_energy_defect(u_new: FEFunction, u_old: FEFunction, u_star: FEFunction) -> float:
    """
    Work of the Newton-linearized EMAC term against u^{n+1/2} that the exact
    term would not do: -(NL(u^{n+1/2} - u*), u^{n+1/2}). It is quadratic in the
    linearization error u^{n+1/2} - u*.
    """
    midpoint = 0.5 * (u_new.coefficients + u_old.coefficients)
    gap = u_star.with_coefficients(midpoint - u_star.coefficients)
    return -float(midpoint @ nl_residual(Formulation.EMAC, gap))


def measure(state: "TimeState", exact: Optional[Callable] = None, diverged: bool = False) -> DiagnosticsRecord:
    u = state.u_curr
    momentum_x, momentum_y = linear_momentum(u)
    return DiagnosticsRecord(
        step=state.step,
        t=state.t,
        energy=kinetic_energy(u),
        momentum_x=momentum_x,
        momentum_y=momentum_y,
        ang_momentum=angular_momentum(u),
        div_norm=div_l2_norm(u),
        l2_error=None if exact is None else l2_error(u, exact, state.t),
        newton_iters=state.newton_iters,
        nonlinear_residual=state.nonlinear_residual,
        diverged=diverged,
    )


def _format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.16e}"


def format_record(record: DiagnosticsRecord) -> str:
    return ",".join(_format_value(v) for v in astuple(record))


def parse_record(line: str) -> DiagnosticsRecord:
    parts = line.rstrip("\n").split(",")
    names = [f.name for f in fields(DiagnosticsRecord)]
    if len(parts) != len(names):
        raise ValueError(f"expected {len(names)} fields, got {len(parts)}: {line!r}")
    row = dict(zip(names, parts))
    if row["diverged"] not in ("true", "false"):
        raise ValueError(f"diverged must be true or false, got {row['diverged']!r}")
    return DiagnosticsRecord(
        step=int(row["step"]),
        t=float(row["t"]),
        energy=float(row["energy"]),
        momentum_x=float(row["momentum_x"]),
        momentum_y=float(row["momentum_y"]),
        ang_momentum=float(row["ang_momentum"]),
        div_norm=float(row["div_norm"]),
        l2_error=float(row["l2_error"]) if row["l2_error"] else None,
        newton_iters=int(row["newton_iters"]),
        nonlinear_residual=float(row["nonlinear_residual"]),
        diverged=row["diverged"] == "true",
    )


def write_csv(records: Iterable[DiagnosticsRecord], destination: Union[str, TextIO]):
    if not isinstance(destination, str):
        print(CSV_HEADER, file=destination)
        for record in records:
            print(format_record(record), file=destination)
        return
    try:
        with open(destination, "w", encoding="utf-8", newline="\n") as f:
            write_csv(records, f)
    except OSError as e:
        raise OSError(e.errno, f"cannot write diagnostics to {destination}: {e.strerror}") from e


def read_csv(source: str) -> List[DiagnosticsRecord]:
    try:
        with open(source, encoding="utf-8") as f:
            lines = f.read().splitlines()
    except OSError as e:
        raise OSError(e.errno, f"cannot read diagnostics from {source}: {e.strerror}") from e
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"{source} is not a diagnostics CSV (unexpected header)")
    return [parse_record(line) for line in lines[1:] if line]
