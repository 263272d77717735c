import xml.etree.ElementTree as ET

import numpy as np
import pytest

from limqr import bench, plots
from limqr.cli import main

SMALL = ["--problem", "pep5", "--method", "lim", "--dist", "uniform", "--n", "36", "--stencil", "9",
         "--threads", "1"]


def _csv(text):
    import io
    return bench.read_results_csv(io.StringIO(text))


def test_run_to_stdout(capsys):
    assert main(["run", *SMALL, "--epsilon", "3", "--no-timing"]) == 0
    out = capsys.readouterr().out
    rows = _csv(out)
    assert len(rows) == 1 and rows[0]["N"] == 36 and rows[0]["wall_seconds"] == 0.0
    assert out.splitlines()[0].startswith("problem,method,distribution,N,n,epsilon,linf,l2pct,rms")


def test_run_is_byte_deterministic(tmp_path):
    paths = [tmp_path / f"r{i}.csv" for i in range(2)]
    fields = [tmp_path / f"f{i}.csv" for i in range(2)]
    for p, f in zip(paths, fields):
        assert main(["run", *SMALL, "--epsilon", "2", "--no-timing", "--out", str(p), "--field", str(f)]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert fields[0].read_bytes() == fields[1].read_bytes()
    head, *lines = fields[0].read_text().splitlines()
    assert head == "x,y,u_apx,u_exact" and len(lines) == 36


def test_run_diagnostics(tmp_path):
    d = tmp_path / "diag.csv"
    assert main(["run", *SMALL, "--epsilon", "2", "--diagnostics", str(d), "--out", str(tmp_path / "o.csv")]) == 0
    lines = d.read_text().splitlines()
    assert lines[0] == "stencil_id,cond_A,cond_B,radius,n_i,n_b" and len(lines) == 37


@pytest.mark.parametrize("argv", [
    [],
    ["run", "--problem", "nope"],
    ["run", "--epsilon", "-1"],
    ["sweep", "--problem", "pep5"],
    ["sweep", "--epsilons", ""],
    ["run", "--method", "lim-rbfqr", "--kind", "TPS", "--n", "36", "--stencil", "9"],
    ["run", "--problem", "pep5", "--k", "40", "--n", "36", "--stencil", "9"],
    ["converge", "--sizes", "100,36", "--method", "lim"],
])
def test_usage_errors(argv, capsys):
    assert main(argv) == 2
    capsys.readouterr()


def test_numerical_failure_exit_code(capsys):
    # four-point thin-plate stencils cannot carry the quadratic augmentation
    assert main(["run", *SMALL[:8], "--stencil", "4", "--kind", "TPS", "--out", "-"]) == 3
    assert "error: numerical" in capsys.readouterr().err


def test_io_failure_exit_code(tmp_path, capsys):
    bad = tmp_path / "missing" / "out.csv"
    assert main(["run", *SMALL, "--epsilon", "3", "--out", str(bad)]) == 4
    assert "error: io" in capsys.readouterr().err


def test_sweep_with_plot(tmp_path):
    svg = tmp_path / "sweep.svg"
    out = tmp_path / "sweep.csv"
    assert main(["sweep", *SMALL, "--epsilons", "1,2,4", "--out", str(out), "--plot", str(svg)]) == 0
    rows = bench.read_results_csv(out.open())
    assert [r["epsilon"] for r in rows] == [1.0, 2.0, 4.0]
    root = ET.parse(svg).getroot()
    assert root.tag.endswith("svg") and root.get("version") == "1.1"


def test_converge_and_isolines(tmp_path):
    out = tmp_path / "c.csv"
    assert main(["converge", *[a for a in SMALL if a not in ("--n", "36")], "--sizes", "25,49", "--epsilon", "3",
                 "--out", str(out), "--plot", str(tmp_path / "c.svg")]) == 0
    assert [r["N"] for r in bench.read_results_csv(out.open())] == [25, 49]
    iso = tmp_path / "i.csv"
    svg = tmp_path / "i.svg"
    argv = ["isolines", "--problem", "pep5", "--method", "lim", "--dist", "uniform", "--n", "36",
            "--stencils", "5,9", "--epsilons", "2,4", "--metric", "l2pct", "--no-timing", "--threads", "2",
            "--out", str(iso), "--plot", str(svg)]
    assert main(argv) == 0
    rows = bench.read_results_csv(iso.open())
    assert len(rows) == 4 and [(r["n"], r["epsilon"]) for r in rows] == [(5, 2.0), (5, 4.0), (9, 2.0), (9, 4.0)]
    first = svg.read_bytes()
    assert main(argv) == 0
    assert svg.read_bytes() == first


def test_line_plot_breaks_on_nan():
    s = plots.Series("a", [1.0, 2.0, 3.0, 4.0], [1e-3, float("nan"), 1e-4, 1e-5])
    root = ET.fromstring(plots.line_plot([s], "x", "y", "t", xlog=True))
    polys = [e for e in root.iter() if e.tag.endswith("polyline")]
    assert [len(p.get("points").split()) for p in polys] == [1, 2]


def test_heatmap_shape_and_nan():
    text = plots.heatmap([10, 30], [1.0, 2.0, 4.0], np.array([[1e-4, 1e-3, np.nan], [1e-5, 1e-2, 1e-1]]))
    root = ET.fromstring(text)
    assert sum(1 for e in root.iter() if e.tag.endswith("rect") and e.get("fill") == plots.NAN_FILL) == 1
    with pytest.raises(ValueError):
        plots.heatmap([10], [1.0, 2.0], np.ones((2, 2)))
