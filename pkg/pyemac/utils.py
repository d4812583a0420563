import os
from typing import TYPE_CHECKING, List, Optional, TextIO

import numpy as np

from .diagnostics import CSV_HEADER, DiagnosticsRecord, format_record
from .space import FEFunction

if TYPE_CHECKING:
    from .timeloop import TimeState

# VTK_QUADRATIC_TRIANGLE: three vertices, then the midpoints of (0,1), (1,2), (2,0)
VTK_QUADRATIC_TRIANGLE = 22


def exact_steps(t_end: float, dt: float, tol: float = 1e-9) -> int:
    steps = t_end / dt
    n = int(round(steps))
    if n < 1 or abs(steps - n) > tol:
        raise ValueError(f"t_end={t_end} is not an integer multiple of dt={dt}")
    return n


def optional_float(string):
    return None if string == "None" else float(string)


def positive_int(string):
    value = int(string)
    if value < 1:
        raise ValueError(f"expected a positive integer, got {string}")
    return value


def _open(path: str) -> TextIO:
    directory = os.path.dirname(path)
    try:
        if directory:
            os.makedirs(directory, exist_ok=True)
        return open(path, "w", encoding="utf-8", newline="\n")
    except OSError as e:
        raise OSError(e.errno, f"cannot open {path} for writing: {e.strerror}") from e


class ResultWriter:
    """Per-step output sink of a simulation run; usable as a context manager"""

    extension: str

    def __init__(self, output_path: str):
        self.output_path = output_path

    def __call__(self, record: DiagnosticsRecord, state: "TimeState"):
        raise NotImplementedError

    def close(self):
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class WriteCSV(ResultWriter):
    """Streams diagnostics rows so a run that aborts keeps its partial series"""

    extension: str = "csv"

    def __init__(self, output_path: str):
        super().__init__(output_path)
        self.file = _open(output_path)
        print(CSV_HEADER, file=self.file, flush=True)

    def __call__(self, record: DiagnosticsRecord, state: "TimeState"):
        print(format_record(record), file=self.file, flush=True)

    def close(self):
        self.file.close()


class WriteVTK(ResultWriter):
    """Dumps velocity and pressure every `every` steps as <stem>_<step>.vtk"""

    extension: str = "vtk"

    def __init__(self, output_path: str, every: int):
        super().__init__(output_path)
        if every < 1:
            raise ValueError(f"VTK stride must be positive, got {every}")
        self.every = every
        self.stem = os.path.splitext(output_path)[0]
        self.written: List[str] = []

    def __call__(self, record: DiagnosticsRecord, state: "TimeState"):
        if record.step % self.every and not record.diverged:
            return
        path = f"{self.stem}_{record.step:05d}.{self.extension}"
        write_vtk(state.u_curr, state.p_curr, path, title=f"t = {record.t:.6g}")
        self.written.append(path)


def write_vtk(velocity: FEFunction, pressure: FEFunction, path: str, title: str = "pyemac"):
    """Legacy ASCII UNSTRUCTURED_GRID of quadratic triangles carrying u and p"""
    space = velocity.space
    mesh = space.mesh
    nv = mesh.num_vertices
    points = space.node_coords
    # local edge k is opposite vertex k, VTK wants edges (0,1), (1,2), (2,0)
    cells = np.hstack([mesh.cells, nv + mesh.cell_edges[:, [2, 0, 1]]])
    u1, u2 = velocity.components
    p_vertex = pressure.coefficients
    p = np.concatenate([p_vertex, p_vertex[mesh.edges].mean(axis=1)])

    with _open(path) as f:
        print("# vtk DataFile Version 3.0", file=f)
        print(title, file=f)
        print("ASCII", file=f)
        print("DATASET UNSTRUCTURED_GRID", file=f)
        print(f"POINTS {len(points)} double", file=f)
        for x, y in points:
            print(f"{x:.16e} {y:.16e} 0", file=f)
        print(f"CELLS {len(cells)} {7 * len(cells)}", file=f)
        for cell in cells:
            print("6 " + " ".join(str(i) for i in cell), file=f)
        print(f"CELL_TYPES {len(cells)}", file=f)
        for _ in range(len(cells)):
            print(VTK_QUADRATIC_TRIANGLE, file=f)
        print(f"POINT_DATA {len(points)}", file=f)
        print("VECTORS velocity double", file=f)
        for a, b in zip(u1, u2):
            print(f"{a:.16e} {b:.16e} 0", file=f)
        print("SCALARS pressure double 1", file=f)
        print("LOOKUP_TABLE default", file=f)
        for value in p:
            print(f"{value:.16e}", file=f)


def get_writers(csv_path: str, vtk_every: Optional[int] = None) -> List[ResultWriter]:
    writers: List[ResultWriter] = [WriteCSV(csv_path)]
    if vtk_every is not None:
        writers.append(WriteVTK(csv_path, vtk_every))
    return writers
