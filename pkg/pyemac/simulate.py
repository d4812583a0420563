import argparse
import logging
import os
import sys
import traceback
import warnings
from typing import List, Optional

from .convergence import newton_energy_defect, temporal_self_convergence, write_study
from .diagnostics import read_csv
from .forms import Formulation
from .identities import verify_identities, write_report
from .mesh import build_uniform_tri_mesh
from .plotting import QUANTITY_LABELS, plot_runs
from .problems import PROBLEMS
from .saddle import SolverError
from .space import TaylorHoodSpace
from .timeloop import SchemeConfig, parse_mode, run_simulation
from .utils import get_writers, optional_float, positive_int

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_DIVERGED = 2


class UsageError(ValueError):
    pass


class ArgumentParser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so usage errors map to exit status 1"""

    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="pyemac", description="EMAC Navier-Stokes benchmarks")
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    for name in PROBLEMS:
        # fmt: off
        run = subparsers.add_parser(name, formatter_class=argparse.ArgumentDefaultsHelpFormatter, help=f"run the {name} benchmark")
        run.add_argument("--nx", type=positive_int, default=None, help="cells per side of the uniform mesh; 48 for gresho, 32 for lattice")
        run.add_argument("--dt", type=float, default=0.01, help="time step")
        run.add_argument("--t-end", type=float, default=10.0, help="final time")
        run.add_argument("--form", type=str, default="emac", choices=[f.value for f in Formulation], help="form of the nonlinear term")
        run.add_argument("--mode", type=str, default="full", help="nonlinear resolution: full, newton1, newton2, newton3 or skewlin")
        run.add_argument("--tol", type=float, default=1e-8, help="H1 norm of the Newton update at which full Newton stops")
        run.add_argument("--nu", type=optional_float, default=None, help="kinematic viscosity; 0 for gresho, 1e-7 for lattice")
        run.add_argument("--graddiv", type=float, default=0.0, help="grad-div stabilization coefficient")
        run.add_argument("--ic", type=str, default="project", choices=["project", "interpolate"], help="divergence-free projection or plain interpolation of the initial velocity")
        run.add_argument("--out", type=str, required=True, help="diagnostics CSV path")
        run.add_argument("--svg", type=str, default=None, help="optional SVG plot of one diagnostic over time")
        run.add_argument("--quantity", type=str, default="energy", choices=list(QUANTITY_LABELS), help="diagnostic shown by --svg")
        run.add_argument("--vtk-every", type=positive_int, default=None, help="write a VTK snapshot every this many steps")
        run.add_argument("--verbose", action="store_true", help="show progress and INFO logging")
        # fmt: on

    # fmt: off
    identities = subparsers.add_parser("identities", formatter_class=argparse.ArgumentDefaultsHelpFormatter, help="verify the discrete vector identities")
    identities.add_argument("--seed", type=int, default=0, help="random seed")
    identities.add_argument("--nx", type=positive_int, default=8, help="cells per side of the unit square mesh")
    identities.add_argument("--trials", type=positive_int, default=100, help="random samples per identity")
    identities.add_argument("--out", type=str, required=True, help="report CSV path")
    identities.add_argument("--verbose", action="store_true", help="INFO logging")

    convergence = subparsers.add_parser("convergence", formatter_class=argparse.ArgumentDefaultsHelpFormatter, help="time-step convergence studies on the lattice vortex")
    convergence.add_argument("--study", type=str, default="time", choices=["time", "defect"], help="self-convergence of full Newton, or the energy defect of one Newton step")
    convergence.add_argument("--nx", type=positive_int, default=32, help="cells per side of the unit square mesh")
    convergence.add_argument("--t-end", type=float, default=0.5, help="time at which errors or defects are measured")
    convergence.add_argument("--nu", type=optional_float, default=None, help="kinematic viscosity; 1e-7 by default")
    convergence.add_argument("--out", type=str, required=True, help="study CSV path")
    convergence.add_argument("--verbose", action="store_true", help="show INFO logging")

    plot = subparsers.add_parser("plot", formatter_class=argparse.ArgumentDefaultsHelpFormatter, help="overlay diagnostics of several runs in one SVG")
    plot.add_argument("runs", nargs="+", type=str, help="diagnostics CSVs written by the benchmark commands")
    plot.add_argument("--labels", nargs="+", type=str, default=None, help="curve labels, one per CSV; the file names by default")
    plot.add_argument("--quantity", type=str, default="energy", choices=list(QUANTITY_LABELS), help="diagnostic to plot")
    plot.add_argument("--title", type=str, default="", help="plot title")
    plot.add_argument("--out", type=str, required=True, help="SVG path")
    plot.add_argument("--verbose", action="store_true", help="show INFO logging")
    # fmt: on
    return parser


def _config(args) -> SchemeConfig:
    problem = PROBLEMS[args.command]
    try:
        mode = parse_mode(args.mode, args.tol)
        return SchemeConfig(
            form=Formulation(args.form),
            mode=mode,
            dt=args.dt,
            t_end=args.t_end,
            nu=problem.default_nu if args.nu is None else args.nu,
            gamma=args.graddiv,
        )
    except ValueError as e:
        raise UsageError(f"pyemac {args.command}: error: {e}") from e


def run_benchmark(args) -> int:
    problem = PROBLEMS[args.command]
    config = _config(args)
    nx = args.nx or problem.default_nx
    if args.ic == "interpolate":
        warnings.warn("--ic interpolate starts from a velocity that is not discretely divergence-free")
    space = TaylorHoodSpace(build_uniform_tri_mesh(nx, nx, problem.domain))

    writers = get_writers(args.out, args.vtk_every)
    try:
        records, _ = run_simulation(problem, config, space, ic=args.ic, sinks=writers, progress=args.verbose)
    finally:
        for writer in writers:
            writer.close()

    if args.svg:
        label = f"{config.form.value}-{args.mode}"
        plot_runs({label: records}, args.svg, args.quantity, title=f"{problem.name}, {nx}x{nx}, dt={config.dt:g}")

    diverged = records[-1].diverged
    print(
        f"{problem.name}: {len(records) - 1} steps, final t={records[-1].t:g}, "
        f"energy {records[0].energy:.6e} -> {records[-1].energy:.6e}" + (", DIVERGED" if diverged else "")
    )
    return EXIT_DIVERGED if diverged else EXIT_OK


def run_identities(args) -> int:
    report = verify_identities(seed=args.seed, nx=args.nx, trials=args.trials)
    write_report(report, args.out)
    for check in report:
        print(f"{check.name:24s} {check.violation:.3e} {'ok' if check.passed else 'FAILED'}")
    return EXIT_OK if all(check.passed for check in report) else EXIT_ERROR


def run_convergence(args) -> int:
    if args.study == "time":
        result = temporal_self_convergence(nx=args.nx, t_end=args.t_end, nu=args.nu)
    else:
        result = newton_energy_defect(nx=args.nx, t_eval=args.t_end, nu=args.nu)
    write_study(result, args.out)
    for dt, value, order in result.rows():
        print(f"dt={dt:<10g} {result.name}={value:.3e}" + ("" if order is None else f" order={order:.2f}"))
    return EXIT_OK


def run_plot(args) -> int:
    labels = args.labels or [os.path.splitext(os.path.basename(path))[0] for path in args.runs]
    if len(labels) != len(args.runs):
        raise UsageError(f"pyemac plot: error: {len(args.runs)} runs but {len(labels)} labels")
    if len(set(labels)) != len(labels):
        raise UsageError(f"pyemac plot: error: curve labels must be unique, got {labels}")
    runs = {label: read_csv(path) for label, path in zip(labels, args.runs)}
    plot_runs(runs, args.out, args.quantity, title=args.title)
    logger.info("plotted %s of %d runs to %s", args.quantity, len(runs), args.out)
    return EXIT_OK


COMMANDS = {"identities": run_identities, "convergence": run_convergence, "plot": run_plot}


def cli_main(argv: Optional[List[str]] = None) -> int:
    """Exit status: 0 on success, 2 when a run diverged (its CSV is still written), 1 on any error"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(e, file=sys.stderr)
        return EXIT_ERROR

    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    if getattr(args, "out", None):
        os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)

    try:
        return COMMANDS.get(args.command, run_benchmark)(args)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_ERROR
    except (SolverError, OSError, ValueError, RuntimeError) as e:
        if args.verbose:
            traceback.print_exc()
        print(f"pyemac {args.command} failed due to {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(cli_main())
