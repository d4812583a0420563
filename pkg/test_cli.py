import os

import numpy as np
import pytest

from pyemac.diagnostics import DiagnosticsRecord, read_csv, write_csv
from pyemac.mesh import build_uniform_tri_mesh
from pyemac.plotting import series_from_records, svg_plot
from pyemac.simulate import EXIT_DIVERGED, EXIT_ERROR, EXIT_OK, build_parser, cli_main
from pyemac.space import PRESSURE, VELOCITY, FEFunction, TaylorHoodSpace, interpolate
from pyemac.timeloop import TimeState
from pyemac.utils import VTK_QUADRATIC_TRIANGLE, WriteCSV, WriteVTK, exact_steps, get_writers, positive_int, write_vtk


def record(step, diverged=False, l2=None):
    return DiagnosticsRecord(step, 0.01 * step, 1.0, 0.0, 0.0, 0.0, 0.0, l2, 1, 0.0, diverged)


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["gresho"],
        ["gresho", "--out", "x.csv", "--bogus"],
        ["gresho", "--out", "x.csv", "--form", "upwind"],
        ["gresho", "--out", "x.csv", "--mode", "skewlin", "--form", "conv"],
        ["gresho", "--out", "x.csv", "--mode", "picard"],
        ["gresho", "--out", "x.csv", "--dt", "-0.1"],
        ["lattice", "--out", "x.csv", "--nx", "0"],
        ["lattice", "--out", "x.csv", "--quantity", "pressure"],
        ["plot", "--out", "x.svg"],
    ],
)
def test_usage_errors(argv, tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    assert cli_main(argv) == EXIT_ERROR
    assert "error" in capsys.readouterr().err


def test_parser_defaults():
    args = build_parser().parse_args(["gresho", "--out", "run.csv"])
    assert (args.dt, args.t_end, args.form, args.mode, args.ic) == (0.01, 10.0, "emac", "full", "project")
    assert args.nx is None and args.nu is None and args.vtk_every is None and args.quantity == "energy"
    args = build_parser().parse_args(["identities", "--out", "ids.csv"])
    assert (args.seed, args.nx, args.trials) == (0, 8, 100)


def test_lattice_run(tmp_path):
    out = tmp_path / "runs" / "lattice.csv"
    svg = tmp_path / "lattice.svg"
    argv = ["lattice", "--nx", "4", "--dt", "0.01", "--t-end", "0.02", "--mode", "newton2", "--nu", "1e-3"]
    argv += ["--out", str(out), "--svg", str(svg), "--quantity", "l2_error", "--vtk-every", "1"]
    assert cli_main(argv) == EXIT_OK

    records = read_csv(str(out))
    assert [r.step for r in records] == [0, 1, 2]
    assert [r.newton_iters for r in records] == [0, records[1].newton_iters, 2]
    assert all(r.l2_error is not None for r in records)
    text = svg.read_text()
    assert 'id="curve-emac-newton2"' in text and "L2 velocity error" in text
    for step in range(3):
        assert (tmp_path / "runs" / f"lattice_{step:05d}.vtk").exists()


def test_gresho_run_with_interpolated_start(tmp_path):
    out = tmp_path / "gresho.csv"
    with pytest.warns(UserWarning):
        status = cli_main(["gresho", "--nx", "4", "--t-end", "0.01", "--ic", "interpolate", "--form", "rot", "--out", str(out)])
    assert status == EXIT_OK
    assert len(read_csv(str(out))) == 2


def test_diverged_run_exit_status(tmp_path):
    out = tmp_path / "gresho.csv"
    status = cli_main(["gresho", "--nx", "4", "--t-end", "0.03", "--tol", "1e-300", "--out", str(out)])
    assert status == EXIT_DIVERGED
    records = read_csv(str(out))
    assert records[-1].diverged and len(records) == 2


def test_t_end_must_be_a_multiple_of_dt(tmp_path, capsys):
    out = tmp_path / "gresho.csv"
    assert cli_main(["gresho", "--nx", "4", "--t-end", "0.015", "--out", str(out)]) == EXIT_ERROR
    assert "integer multiple" in capsys.readouterr().err


def test_identities_command(tmp_path, capsys):
    out = tmp_path / "identities.csv"
    assert cli_main(["identities", "--nx", "4", "--trials", "2", "--out", str(out)]) == EXIT_OK
    assert out.read_text().startswith("identity,max_relative_violation,passed\n")
    assert "FAILED" not in capsys.readouterr().out


def test_defect_study_command(tmp_path):
    out = tmp_path / "defect.csv"
    assert cli_main(["convergence", "--study", "defect", "--nx", "4", "--t-end", "0.04", "--out", str(out)]) == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "dt,value,order" and len(lines) == 4


def test_svg_plot(tmp_path):
    path = tmp_path / "energy.svg"
    series = {"emac": ([0.0, 1.0], [1.0, 1.0]), "conv": ([0.0, 1.0], [1.0, 2.0])}
    svg_plot(series, str(path), title="gresho energy")
    text = path.read_text()
    assert text.lstrip().startswith("<?xml") and "<svg" in text
    for label in series:
        assert f'id="curve-{label}"' in text
        assert label in text
    assert "gresho energy" in text

    again = tmp_path / "again.svg"
    svg_plot(series, str(again), title="gresho energy")
    assert again.read_text() == text


def test_svg_plot_without_series(tmp_path):
    path = tmp_path / "empty.svg"
    svg_plot({}, str(path))
    assert "<svg" in path.read_text()


def test_series_from_records():
    records = [record(0, l2=None), record(1, l2=0.5)]
    assert series_from_records(records, "l2_error") == ([0.01], [0.5])
    assert series_from_records(records, "energy") == ([0.0, 0.01], [1.0, 1.0])
    with pytest.raises(ValueError):
        series_from_records(records, "pressure")


def test_write_vtk(tmp_path):
    space = TaylorHoodSpace(build_uniform_tri_mesh(1, 1))
    u = interpolate(space, VELOCITY, lambda x, y: (x, -y))
    p = interpolate(space, PRESSURE, lambda x, y: 2 * x)
    path = tmp_path / "fields.vtk"
    write_vtk(u, p, str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == "# vtk DataFile Version 3.0"
    assert "POINTS 9 double" in lines
    assert "CELLS 2 14" in lines
    start = lines.index("CELL_TYPES 2") + 1
    assert lines[start : start + 2] == [str(VTK_QUADRATIC_TRIANGLE)] * 2
    pressure = np.array([float(v) for v in lines[lines.index("LOOKUP_TABLE default") + 1 :]])
    np.testing.assert_allclose(pressure, 2 * space.node_coords[:, 0], atol=1e-15)


def test_result_writers(tmp_path):
    space = TaylorHoodSpace(build_uniform_tri_mesh(1, 1))
    state = TimeState(0.0, 0, FEFunction.zeros(space), FEFunction.zeros(space, PRESSURE))
    csv_path = tmp_path / "out" / "run.csv"
    with WriteCSV(str(csv_path)) as csv_writer, WriteVTK(str(csv_path), every=2) as vtk_writer:
        for step in range(4):
            csv_writer(record(step, diverged=step == 3), state)
            vtk_writer(record(step, diverged=step == 3), state)
    assert len(read_csv(str(csv_path))) == 4
    assert [os.path.basename(p) for p in vtk_writer.written] == ["run_00000.vtk", "run_00002.vtk", "run_00003.vtk"]

    with pytest.raises(ValueError):
        WriteVTK(str(csv_path), every=0)
    writers = get_writers(str(tmp_path / "other.csv"))
    assert [type(w) for w in writers] == [WriteCSV]
    for writer in writers:
        writer.close()


def test_small_helpers():
    assert exact_steps(0.5, 0.1) == 5
    assert exact_steps(10.0, 0.01) == 1000
    with pytest.raises(ValueError):
        exact_steps(0.55, 0.1)
    assert positive_int("3") == 3
    with pytest.raises(ValueError):
        positive_int("0")


def test_plot_command(tmp_path):
    emac, conv = tmp_path / "emac.csv", tmp_path / "conv.csv"
    write_csv([record(0), record(1)], str(emac))
    write_csv([record(0), record(1, diverged=True)], str(conv))
    svg = tmp_path / "figs" / "angular.svg"
    argv = ["plot", str(emac), str(conv), "--quantity", "ang_momentum", "--title", "gresho", "--out", str(svg)]
    assert cli_main(argv) == EXIT_OK
    text = svg.read_text()
    assert 'id="curve-emac"' in text and 'id="curve-conv"' in text
    assert "angular momentum" in text

    labelled = tmp_path / "labelled.svg"
    assert cli_main(["plot", str(emac), str(conv), "--labels", "full", "newton2", "--out", str(labelled)]) == EXIT_OK
    assert 'id="curve-newton2"' in labelled.read_text()


@pytest.mark.parametrize(
    "extra",
    [["--labels", "only-one"], ["--labels", "same", "same"]],
)
def test_plot_rejects_bad_labels(tmp_path, capsys, extra):
    paths = []
    for name in ("a", "b"):
        paths.append(str(tmp_path / f"{name}.csv"))
        write_csv([record(0)], paths[-1])
    assert cli_main(["plot", *paths, *extra, "--out", str(tmp_path / "x.svg")]) == EXIT_ERROR
    assert "labels" in capsys.readouterr().err


def test_plot_missing_run(tmp_path, capsys):
    assert cli_main(["plot", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "x.svg")]) == EXIT_ERROR
    assert "failed" in capsys.readouterr().err
