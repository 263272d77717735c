import math

import numpy as np
import pytest
from scipy import special
from hypothesis import given, settings, strategies as st

from conftest import halton_stencil
from limqr.rbf_direct import BasisKind, build_interpolation_matrix, condition_number
from limqr.rbfqr import (ExpansionIndex, RankDeficiencyError, apply_boundary_operator_psi, build_rbfqr_basis,
                         evaluate_psi, expansion_coefficient, expansion_function_jet, expansion_indices,
                         hypergeometric_1f2, scale_factor)


def test_indices_degree_zero():
    assert [str(i) for i in expansion_indices(0)] == ["C0,0"]


def test_indices_degree_two():
    assert [str(i) for i in expansion_indices(2)] == ["C0,0", "C1,0", "S1,0", "C2,0", "C2,1", "S2,1"]


@pytest.mark.parametrize("k_max", range(0, 12))
def test_index_count(k_max):
    brute = sum(1 for k in range(k_max + 1) for l in range(k // 2 + 1) for trig in ("cos", "sin")
                if trig == "cos" or 2 * l + k % 2 != 0)
    assert len(expansion_indices(k_max)) == brute == (k_max + 1) * (k_max + 2) // 2


def test_scale_factor_examples():
    assert scale_factor(ExpansionIndex(0, 0, "cos"), 0.37) == 2.0
    assert abs(scale_factor(ExpansionIndex(1, 0, "cos"), 0.37) - 0.37**2) < 1e-16


def test_scale_factor_ratio():
    # d_{4,0} / d_{2,0} = eps^4 * 2^{2-1} 1! 1! / (2^{4-1} 2! 2!) = eps^4 / 16
    for eps in (0.1, 0.5, 2.0):
        r = scale_factor(ExpansionIndex(4, 0, "cos"), eps) / scale_factor(ExpansionIndex(2, 0, "cos"), eps)
        assert abs(r - eps**4 / 16) < 1e-15 * max(1.0, eps**4)


def test_hypergeometric_examples():
    assert hypergeometric_1f2(0.5, 1.0, 2.0, 0.0) == 1.0
    brute = sum(0.1**t / math.factorial(t) ** 2 for t in range(30))
    assert abs(hypergeometric_1f2(1.0, 1.0, 1.0, 0.1) - brute) < 1e-15
    # closed form: sum z^t / (t!)^2 = I0(2 sqrt(z))
    assert abs(brute - special.i0(2 * math.sqrt(0.1))) < 1e-15
    vals = [hypergeometric_1f2(1.5, 2.0, 2.5, z) for z in (0.0, 0.05, 0.1)]
    assert vals[0] < vals[1] < vals[2]


def test_hypergeometric_matches_mpmath():
    mpmath = pytest.importorskip("mpmath")
    for a, b1, b2, z in [(1.5, 2.0, 3.5, 0.7), (3.0, 4.0, 6.0, 5.0), (0.5, 1.0, 1.5, 1e-3)]:
        assert abs(hypergeometric_1f2(a, b1, b2, z) - float(mpmath.hyp1f2(a, b1, b2, z))) < 1e-13 * float(
            mpmath.hyp1f2(a, b1, b2, z))


def test_coefficient_examples():
    assert expansion_coefficient(ExpansionIndex(0, 0, "cos"), 0.0, 0.0, 0.8) == 0.5
    assert expansion_coefficient(ExpansionIndex(3, 1, "sin"), 0.6, 0.0, 0.8) == 0.0


def test_coefficients_bounded():
    for idx in expansion_indices(6):
        for r in (0.0, 0.3, 0.7, 1.0):
            for th in (0.0, 1.1, 2.9):
                for eps in (0.1, 0.5, 1.0):
                    ab = ((idx.k - 2 * idx.l + idx.p + 1) / 2, idx.k - 2 * idx.l + 1, (idx.k + 2 * idx.l + idx.p + 2) / 2)
                    bound = 2 * hypergeometric_1f2(*ab, eps**4 * r * r)
                    assert abs(expansion_coefficient(idx, r, th, eps)) <= bound


def test_expansion_function_examples():
    v, _ = expansion_function_jet(ExpansionIndex(2, 0, "cos"), 1.0, 0.0, 0.0)
    assert abs(v - 1.0) < 1e-15
    # C3,0 at r = 0.5, theta = 0 carries T_3(0.5) = -1 (times exp(-eps^2 r^2) = 1 at eps = 0)
    v, _ = expansion_function_jet(ExpansionIndex(3, 0, "cos"), 0.5, 0.0, 0.0)
    assert abs(v + 1.0) < 1e-15


def test_expansion_gradient_finite_differences(rng):
    h = 1e-6
    for idx in expansion_indices(4):
        for _ in range(10):
            r, th = 0.1 + 0.8 * rng.random(), 2 * math.pi * rng.random()
            x, y = r * math.cos(th), r * math.sin(th)
            f = lambda px, py: expansion_function_jet(idx, math.hypot(px, py), math.atan2(py, px), 0.7)[0]  # noqa: E731
            fd = [(f(x + h, y) - f(x - h, y)) / (2 * h), (f(x, y + h) - f(x, y - h)) / (2 * h)]
            _, g = expansion_function_jet(idx, r, th, 0.7)
            np.testing.assert_allclose(g, fd, atol=1e-7)


def test_single_node_basis():
    basis = build_rbfqr_basis(np.array([[0.2, -0.3]]), 0.5)
    assert basis.n == 1
    B = evaluate_psi(basis, basis.nodes)
    assert B.shape == (1, 1)
    coef = np.linalg.solve(B, [3.7])
    np.testing.assert_allclose(evaluate_psi(basis, basis.nodes) @ coef, [3.7])


def test_duplicate_nodes_rejected():
    with pytest.raises((ValueError, RankDeficiencyError)):
        build_rbfqr_basis(np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]), 0.5)


def _direct_interpolant(nodes, eps, data, q):
    return build_interpolation_matrix(BasisKind("GA", eps), nodes).evaluate(q, data)


def test_matches_direct_in_stable_regime():
    nodes = halton_stencil(25)
    data = np.cos(2 * nodes[:, 0]) * np.exp(nodes[:, 1])
    q = 0.9 * halton_stencil(50, skip=500)
    basis = build_rbfqr_basis(nodes, 2.0)
    gamma = np.linalg.solve(evaluate_psi(basis, nodes), data)
    np.testing.assert_allclose(evaluate_psi(basis, q) @ gamma, _direct_interpolant(nodes, 2.0, data, q), atol=1e-8)


def test_conditioning_small_eps():
    nodes = halton_stencil(25)
    basis = build_rbfqr_basis(nodes, 0.1)
    assert np.linalg.cond(evaluate_psi(basis, nodes)) < 1e8
    assert condition_number(BasisKind("GA", 0.1), nodes) > 1e14


def test_interpolation_conditions_small_eps():
    nodes = halton_stencil(25)
    d = np.sin(3 * nodes[:, 0] + nodes[:, 1])
    basis = build_rbfqr_basis(nodes, 0.5)
    B = evaluate_psi(basis, nodes)
    np.testing.assert_allclose(B @ np.linalg.solve(B, d), d, atol=1e-10)
    c = np.linalg.solve(B, np.full(25, 2.5))
    np.testing.assert_allclose(evaluate_psi(basis, nodes) @ c, 2.5, atol=1e-12)


def test_boundary_operator_rows():
    nodes = halton_stencil(25)
    basis = build_rbfqr_basis(nodes, 0.7)
    np.testing.assert_array_equal(apply_boundary_operator_psi(basis, nodes[:5]), evaluate_psi(basis, nodes[:5]))
    nrm = np.array([[math.cos(a), math.sin(a)] for a in (0.3, 1.9, 4.0)])
    rows = apply_boundary_operator_psi(basis, nodes[:3], nrm, op="normal_derivative")
    h = 1e-6
    fd = (evaluate_psi(basis, nodes[:3] + h * nrm) - evaluate_psi(basis, nodes[:3] - h * nrm)) / (2 * h)
    np.testing.assert_allclose(rows, fd, atol=1e-6)
    B = np.vstack([evaluate_psi(basis, nodes[3:]), rows])
    assert B.shape == (25, 25)
    with pytest.raises(ValueError):
        apply_boundary_operator_psi(basis, nodes[:1], op="curl")


@settings(max_examples=15, deadline=None)
@given(n=st.integers(3, 30), skip=st.integers(1, 400), eps=st.floats(0.05, 1.5),
       shift=st.tuples(st.floats(-5, 5), st.floats(-5, 5)), size=st.floats(0.01, 3.0))
def test_interpolation_property(n, skip, eps, shift, size):
    nodes = np.asarray(shift) + size * halton_stencil(n, skip=skip)
    basis = build_rbfqr_basis(nodes, eps / size)
    B = evaluate_psi(basis, nodes)
    d = np.cos(np.arange(n))
    np.testing.assert_allclose(B @ np.linalg.solve(B, d), d, atol=1e-9)
