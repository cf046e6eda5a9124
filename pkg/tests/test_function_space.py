import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from bochner_galerkin.function_space import (
    Domain, DomainKind, bochner_norms, composite_gauss_legendre, dirichlet_sine, divfree_fourier_2d,
    export_basis_csv, h_inner, h_inner_quadrature, h_norm, intersection_norm, interval, make_basis,
    norm_equivalence, project_initial, square, tensor_sine_2d, torus2d, v_norm, v_norm_gradient)
from bochner_galerkin.solver import Trajectory

coef = st.floats(-10, 10, allow_nan=False)


def e(i, n):
    out = np.zeros(n)
    out[i] = 1.0
    return out


# ------------------------------------------------------------ h_inner

def test_h_inner_orthonormal(sine8):
    assert h_inner(e(0, 8), e(0, 8), sine8) == 1.0
    assert h_inner(e(0, 8), e(1, 8), sine8) == 0.0


def test_h_inner_dot_product():
    basis = dirichlet_sine(interval(1.0, 2), 2)
    assert h_inner([1, 2], [3, -1], basis) == pytest.approx(1.0)


def test_h_inner_dimension_mismatch(sine8):
    with pytest.raises(ValueError):
        h_inner(np.ones(3), np.ones(8), sine8)


@settings(max_examples=50, deadline=None)
@given(st.lists(coef, min_size=8, max_size=8), st.lists(coef, min_size=8, max_size=8))
def test_parseval_matches_quadrature(sine8, u, v):
    direct = h_inner_quadrature(sine8.evaluate(u), sine8.evaluate(v), sine8)
    assert h_inner(u, v, sine8) == pytest.approx(direct, rel=1e-8, abs=1e-10)
    assert h_inner(u, v, sine8) == pytest.approx(h_inner(v, u, sine8))


# ------------------------------------------------------------ v_norm

def test_v_norm_zero(sine8):
    assert v_norm(np.zeros(8), sine8, 3.0) == 0.0


def test_v_norm_first_mode_p2(sine8):
    oracle = np.sqrt(quad(lambda x: 2 * np.pi ** 2 * np.cos(np.pi * x) ** 2, 0, 1)[0])
    assert v_norm(e(0, 8), sine8, 2.0) == pytest.approx(np.pi, rel=1e-12)
    assert oracle == pytest.approx(np.pi, rel=1e-12)


def test_v_norm_first_mode_p4(sine8):
    expected = (4 * np.pi ** 4 * 3 / 8) ** 0.25
    oracle = quad(lambda x: (np.sqrt(2) * np.pi * np.cos(np.pi * x)) ** 4, 0, 1)[0] ** 0.25
    assert oracle == pytest.approx(expected, rel=1e-12)
    assert v_norm(e(0, 8), sine8, 4.0) == pytest.approx(expected, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(coef, min_size=8, max_size=8), st.floats(-5, 5), st.floats(1.1, 5))
def test_v_norm_homogeneous(sine8, v, lam, p):
    v = np.array(v)
    assert v_norm(lam * v, sine8, p) == pytest.approx(abs(lam) * v_norm(v, sine8, p), rel=1e-10, abs=1e-12)


def test_v_norm_gradient_matches_finite_differences(sine8):
    rng = np.random.default_rng(1)
    a = rng.standard_normal(8)
    for p in (1.5, 2.0, 3.0):
        g = v_norm_gradient(a, sine8, p)
        h = 1e-6
        fd = np.array([(v_norm(a + h * e(i, 8), sine8, p) - v_norm(a - h * e(i, 8), sine8, p)) / (2 * h)
                       for i in range(8)])
        np.testing.assert_allclose(g, fd, rtol=1e-6, atol=1e-8)


def test_vector_basis_uses_symmetric_gradient(divfree12):
    assert divfree12.norm_gradient == "symmetric"
    # a single shear mode: |Du|^2 = |grad u|^2 / 2
    a = e(0, 12)
    full = np.sqrt(np.dot(divfree12.weights, np.sum(divfree12.gradient(a) ** 2, axis=(1, 2))))
    assert v_norm(a, divfree12, 2.0) == pytest.approx(full / np.sqrt(2), rel=1e-12)


# ------------------------------------------------------ intersection norm

def test_intersection_norm_examples(sine8):
    assert intersection_norm(np.zeros(8), sine8, 2.0) == 0.0
    assert intersection_norm(e(0, 8), sine8, 2.0) == pytest.approx(np.pi + 1.0, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(coef, min_size=8, max_size=8), st.lists(coef, min_size=8, max_size=8), st.floats(1.2, 4))
def test_intersection_norm_triangle_and_dominance(sine8, u, v, p):
    u, v = np.array(u), np.array(v)
    nu = intersection_norm(u, sine8, p)
    assert nu >= v_norm(u, sine8, p)
    assert nu >= h_norm(u, sine8)
    assert intersection_norm(u + v, sine8, p) <= nu + intersection_norm(v, sine8, p) + 1e-9


def test_norm_equivalence_constants(sine8):
    c, C = norm_equivalence(sine8, 3.0, samples=100)
    assert 0 < c <= C
    rng = np.random.default_rng(5)
    for a in rng.standard_normal((20, 8)):
        r = intersection_norm(a, sine8, 3.0) / np.linalg.norm(a)
        assert r > 0


# ------------------------------------------------------ project_initial

def test_project_first_mode(sine8):
    alpha = project_initial(sine8.values[0], sine8)
    np.testing.assert_allclose(alpha, e(0, 8), atol=1e-13)


def test_project_zero(sine8):
    np.testing.assert_array_equal(project_initial(np.zeros(sine8.n_nodes), sine8), np.zeros(8))


def test_project_parabola_against_symbolic_integrals():
    basis = dirichlet_sine(interval(1.0, 3), 3)
    x = sp.symbols("x")
    expected = [float(sp.integrate(x * (1 - x) * sp.sqrt(2) * sp.sin(i * sp.pi * x), (x, 0, 1)))
                for i in (1, 2, 3)]
    alpha = project_initial(lambda nodes: nodes[:, 0] * (1 - nodes[:, 0]), basis)
    np.testing.assert_allclose(alpha, expected, atol=1e-13)


def test_project_bessel(sine8):
    y0 = lambda nodes: np.exp(nodes[:, 0]) * nodes[:, 0] * (1 - nodes[:, 0]) ** 2  # noqa: E731
    alpha = project_initial(y0, sine8)
    raw = np.sqrt(np.dot(sine8.weights, y0(sine8.nodes) ** 2))
    assert np.linalg.norm(alpha) <= raw + 1e-12


def test_project_wrong_shape(sine8):
    with pytest.raises(ValueError):
        project_initial(np.zeros(5), sine8)


# ------------------------------------------------------ bochner norms

def _traj(basis, times, coeffs):
    coeffs = np.asarray(coeffs, dtype=float)
    return Trajectory(np.asarray(times, dtype=float), coeffs, np.zeros(len(times) - 1, int), basis)


def test_bochner_zero(sine8):
    assert bochner_norms(_traj(sine8, [0, 0.5, 1], np.zeros((3, 8))), sine8, 2.0) == (0.0, 0.0)


def test_bochner_single_step(sine8):
    tr = _traj(sine8, [0.0, 1.0], [e(0, 8), e(0, 8)])
    lp, linf = bochner_norms(tr, sine8, 2.0)
    assert lp == pytest.approx(np.pi, rel=1e-12)
    assert linf == pytest.approx(1.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(-4, 4))
def test_bochner_scaling(sine8, lam):
    rng = np.random.default_rng(3)
    coeffs = rng.standard_normal((5, 8))
    times = np.linspace(0, 1, 5)
    lp, linf = bochner_norms(_traj(sine8, times, coeffs), sine8, 3.0)
    lp2, linf2 = bochner_norms(_traj(sine8, times, lam * coeffs), sine8, 3.0)
    assert lp2 == pytest.approx(abs(lam) * lp, rel=1e-10, abs=1e-12)
    assert linf2 == pytest.approx(abs(lam) * linf, rel=1e-10, abs=1e-12)


def test_bochner_empty_rejected(sine8):
    with pytest.raises(ValueError):
        bochner_norms(Trajectory(np.zeros(0), np.zeros((0, 8)), np.zeros(0, int), sine8), sine8, 2.0)


# ------------------------------------------------------ bases

@pytest.mark.parametrize("make", [
    lambda: dirichlet_sine(interval(1.0, 64), 64),
    lambda: dirichlet_sine(interval(2.5, 10), 10),
    lambda: tensor_sine_2d(square(1.0, 5), 20),
    lambda: divfree_fourier_2d(torus2d(), 40),
    lambda: divfree_fourier_2d(torus2d(3.0, 30), 16),
])
def test_gram_identity(make):
    basis = make()
    assert np.abs(basis.gram() - np.eye(basis.n)).max() < 1e-10


def test_divergence_free(divfree12):
    big = divfree_fourier_2d(torus2d(), 40)
    for basis in (divfree12, big):
        assert np.abs(basis.divergence()).max() < 1e-10


def test_too_many_modes_rejected():
    with pytest.raises(ValueError):
        dirichlet_sine(interval(1.0, 4), 1000)
    with pytest.raises(ValueError):
        divfree_fourier_2d(torus2d(grid_resolution=8), 100)


def test_make_basis_dispatch():
    b = make_basis(interval(1.0, 4), "dirichlet_sine", 4)
    assert b.n == 4 and not b.is_vector


@pytest.mark.parametrize("kwargs", [
    dict(extent=(-1.0,)), dict(extent=(1.0,), quadrature_order=1), dict(extent=(1.0,), grid_resolution=(2,)),
])
def test_domain_validation(kwargs):
    base = dict(kind=DomainKind.INTERVAL_1D, extent=(1.0,), quadrature_order=8, grid_resolution=(16,))
    base.update(kwargs)
    with pytest.raises(ValueError):
        Domain(**base)


def test_composite_gauss_legendre_exact_for_polynomials():
    x, w = composite_gauss_legendre(0.0, 2.0, 3, 4)
    assert np.dot(w, x ** 7) == pytest.approx(2 ** 8 / 8, rel=1e-13)


def test_export_basis_csv(tmp_path, sine8):
    path = tmp_path / "basis.csv"
    export_basis_csv(sine8, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "x0,weight,basis_index,value,grad0"
    assert len(lines) == 1 + sine8.n * sine8.n_nodes
