from typing import Dict, List, Mapping, Sequence, Tuple

import matplotlib
from matplotlib.figure import Figure

from .diagnostics import DiagnosticsRecord

QUANTITY_LABELS = {
    "energy": "kinetic energy",
    "momentum_x": "linear momentum (x)",
    "momentum_y": "linear momentum (y)",
    "ang_momentum": "angular momentum",
    "div_norm": "||div u||",
    "l2_error": "L2 velocity error",
    "newton_iters": "Newton iterations",
}

Series = Tuple[Sequence[float], Sequence[float]]


def series_from_records(records: Sequence[DiagnosticsRecord], quantity: str) -> Series:
    if quantity not in QUANTITY_LABELS:
        raise ValueError(f"cannot plot {quantity!r}; expected one of {sorted(QUANTITY_LABELS)}")
    rows = [r for r in records if getattr(r, quantity) is not None]
    return [r.t for r in rows], [getattr(r, quantity) for r in rows]


def svg_plot(
    series: Mapping[str, Series],
    path: str,
    quantity: str = "energy",
    title: str = "",
):
    """
    Line chart with one curve per labelled run, written as SVG. Curves carry
    the group id `curve-<label>`; text stays text so labels can be searched.
    """
    rc = {"svg.fonttype": "none", "svg.hashsalt": "pyemac", "path.simplify": False}
    with matplotlib.rc_context(rc):
        fig = Figure(figsize=(6.4, 4.0))
        ax = fig.add_subplot()
        for label, (t, values) in series.items():
            ax.plot(t, values, label=label, gid=f"curve-{label}", linewidth=1.2)
        ax.set_xlabel("t")
        ax.set_ylabel(QUANTITY_LABELS.get(quantity, quantity))
        if title:
            ax.set_title(title)
        if series:
            ax.legend()
        ax.grid(True, linewidth=0.3)
        try:
            fig.savefig(path, format="svg", metadata={"Date": None})
        except OSError as e:
            raise OSError(e.errno, f"cannot write plot to {path}: {e.strerror}") from e


def plot_runs(runs: Dict[str, List[DiagnosticsRecord]], path: str, quantity: str = "energy", title: str = ""):
    svg_plot({label: series_from_records(records, quantity) for label, records in runs.items()}, path, quantity, title)
