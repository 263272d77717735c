import io
import math

import numpy as np
import pytest

from limqr import bench
from limqr.bench import error_norms, problem_catalog
from limqr.geometry import DIRICHLET, NEUMANN


def test_exact_values():
    assert problem_catalog("pep5").exact(np.array([[0.5, 0.0]]))[0] == pytest.approx(1.0, abs=1e-15)
    assert problem_catalog("disk").f(np.array([[0.0, 0.0]]))[0] == 0.0
    with pytest.raises(ValueError):
        problem_catalog("wave")


@pytest.mark.parametrize("name", ["pep5", "pep7", "disk"])
def test_source_is_laplacian_of_exact(name, rng):
    prob = problem_catalog(name)
    lo = np.array(prob.domain.bounds[::2])
    hi = np.array(prob.domain.bounds[1::2])
    p = lo + (hi - lo) * rng.random((20, 2))
    h = 1e-3
    lap = sum(prob.exact(p + h * e) + prob.exact(p - h * e) for e in np.eye(2)) - 4 * prob.exact(p)
    np.testing.assert_allclose(lap / h**2, prob.f(p), atol=5e-4 * np.max(np.abs(prob.f(p))))
    h = 1e-6
    g = np.column_stack([(prob.exact(p + h * e) - prob.exact(p - h * e)) / (2 * h) for e in np.eye(2)])
    np.testing.assert_allclose(prob.exact_gradient(p), g, atol=1e-7)


def test_convdiff_exact_satisfies_pde(rng):
    for k in (40.0, 100.0, 200.0):
        prob = problem_catalog("convdiff1d", k=k)
        x = rng.random(20)
        v = math.log(10.0) + k * (x - 0.5)
        u = prob.exact(np.column_stack([x, np.zeros(20)]))
        # u' = V u and u'' = (k + V^2) u in closed form
        resid = (k + v * v) * u - v * (v * u) - k * u
        assert np.max(np.abs(resid) / np.abs(u)) < 1e-9
        h = 1e-4
        up = prob.exact(np.column_stack([x + h, np.zeros(20)]))
        um = prob.exact(np.column_stack([x - h, np.zeros(20)]))
        np.testing.assert_allclose((up - 2 * u + um) / h**2, (k + v * v) * u, rtol=1e-4)
        assert prob.exact(np.array([[0.0, 0.05]]))[0] == pytest.approx(1.0)
        assert prob.exact(np.array([[1.0, -0.05]]))[0] == pytest.approx(10.0)


def test_convdiff_operator_form():
    prob = problem_catalog("convdiff1d", k=40.0)
    assert prob.f is None
    p = np.array([[0.25, 0.0]])
    assert prob.b_tilde.u(p)[0] == 40.0
    assert prob.b_tilde.ux(p)[0] == pytest.approx(math.log(10.0) - 10.0)


def test_thermal_boundary_tags():
    from limqr.geometry import make_nodes
    prob = problem_catalog("thermal")
    ns = bench.boundary_data(make_nodes(prob.domain, "uniform", 100), prob)
    b = ns.boundary
    corners = (np.isclose(b[:, 0], 0) | np.isclose(b[:, 0], 1)) & (np.isclose(b[:, 1], 0) | np.isclose(b[:, 1], 1))
    assert np.all(ns.bc[corners] == DIRICHLET)
    outlet = np.isclose(b[:, 0], 1) & ~corners
    assert np.all(ns.bc[outlet] == NEUMANN) and np.all(ns.values[outlet] == 0)
    hot = np.isclose(b[:, 1], 0)
    assert np.all(ns.values[hot] == 1.0)
    assert prob.params == {"Pe": 50.0, "velocity_sign": 1.0}


def test_manufactured_boundary_data_match_exact():
    from limqr.geometry import make_nodes
    for name in ("pep5", "pep7", "disk", "convdiff1d"):
        prob = problem_catalog(name)
        ns = bench.boundary_data(make_nodes(prob.domain, "uniform" if name != "disk" else "repel", 200), prob)
        d = ns.bc == DIRICHLET
        np.testing.assert_allclose(ns.values[d], prob.exact(ns.boundary[d]), atol=1e-12)
        nm = ~d
        flux = np.einsum("pd,pd->p", prob.exact_gradient(ns.boundary[nm]), ns.normals[nm])
        np.testing.assert_allclose(ns.values[nm], flux, atol=1e-12)


def test_error_norm_examples():
    assert error_norms([1.0, 2.0], [1.0, 2.0]) == bench.ErrorReport(0.0, 0.0, 0.0)
    r = error_norms([2.0, 0.0], [0.0, 0.0])
    assert r.linf == 2.0 and r.l2_percent == pytest.approx(100.0) and r.rms == pytest.approx(math.sqrt(2))
    assert error_norms([3.0], [0.0]).rms == 3.0
    z = error_norms([0.0, 0.0], [1.0, 0.0])
    assert math.isnan(z.l2_percent) and z.linf == 1.0
    with pytest.raises(ValueError):
        error_norms([1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        error_norms([], [])


def test_single_eps_sweep_equals_run():
    kw = dict(kind="GA")
    row = bench.epsilon_sweep("pep5", "lim", "uniform", 64, 9, [3.0], **kw)[0]
    res = bench.run("pep5", "lim", "uniform", 64, 9, 3.0, **kw)
    for key in ("N", "n", "linf", "l2pct", "rms", "iterations"):
        assert row[key] == res.as_row()[key]
    conv = bench.convergence_study("pep5", "lim", "uniform", [64], 9, 3.0, **kw)[0]
    for key in ("N", "linf", "rms"):
        assert conv[key] == row[key]


def test_sweep_order_and_failures():
    rows = bench.epsilon_sweep("pep5", "lrdrm", "uniform", 36, 9, [4.0, 2.0], kind="TPS", workers=2)
    assert [r["epsilon"] for r in rows] == [4.0, 2.0]
    bad = bench.epsilon_sweep("pep5", "lim-rbfqr", "uniform", 36, 9, [1.0], kind="MQ1")[0]
    assert math.isnan(bad["rms"]) and "stencil" in bad["reason"]
    with pytest.raises(ValueError):
        bench.epsilon_sweep("pep5", "lim", "uniform", 36, 9, [])
    with pytest.raises(ValueError):
        bench.epsilon_sweep("pep5", "lim", "uniform", 36, 9, [-1.0])
    with pytest.raises(ValueError):
        bench.convergence_study("pep5", "lim", "uniform", [100, 36], 9, 1.0)


def test_isoline_grid_layout():
    rows = bench.isoline_grid("pep5", "lim", "uniform", 36, [5, 9], [2.0, 4.0, 8.0], kind="GA")
    assert [(r["n"], r["epsilon"]) for r in rows] == [(5, 2.0), (5, 4.0), (5, 8.0), (9, 2.0), (9, 4.0), (9, 8.0)]


def test_results_csv_round_trip():
    rows = bench.epsilon_sweep("pep5", "lim", "uniform", 36, 9, [2.0, 5.0])
    buf = io.StringIO()
    bench.write_results_csv(rows, buf)
    text = buf.getvalue()
    assert text.splitlines()[0] == ",".join(bench.RESULTS_HEADER)
    back = bench.read_results_csv(io.StringIO(text))
    for a, b in zip(rows, back):
        for k in bench.RESULTS_HEADER:
            if isinstance(a[k], float):
                assert b[k] == pytest.approx(a[k], rel=1e-10)
            else:
                assert b[k] == a[k]


def test_convdiff_solution_independent_of_x2():
    res = bench.run("convdiff1d", "lim-rbfqr", "uniform", 500, 13, 0.5)
    assert res.report.converged
    pts = res.nodeset.interior
    spread = 0.0
    for x in np.unique(np.round(pts[:, 0], 12)):
        col = res.solution[np.isclose(pts[:, 0], x)]
        spread = max(spread, float(np.ptp(col) / np.max(np.abs(col))))
    # relative variation across the channel on a uniform grid
    assert spread < 1e-3
