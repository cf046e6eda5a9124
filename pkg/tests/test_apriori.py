import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from bochner_galerkin.apriori import (AprioriBounds, audit_trajectory, gronwall_bounds, operator_bounds,
                                      time_l1)
from bochner_galerkin.function_space import bochner_norms
from bochner_galerkin.operators import (FieldForcing, NemyckiiOperator, PLaplaceOperator, ZeroForcing,
                                        sum_operator)
from bochner_galerkin.perturbation import linear
from bochner_galerkin.solver import SolveConfig, solve_coefficients


def test_all_zero():
    b = gronwall_bounds(0.0, 1.0, 0.0, 0.0, 2.0)
    assert (b.K0, b.K1, b.M) == (0.0, 0.0, 0.0)


def test_unit_data():
    b = gronwall_bounds(1.0, 1.0, 0.0, 0.0, 2.0)
    assert b.K0 == 1.0 and b.K1 == 0.5
    assert b.M == pytest.approx(np.sqrt(0.5) + 1.0, rel=1e-15)


def test_with_c2():
    b = gronwall_bounds(2.0, 1.0, 0.0, 1.0, 2.0)
    assert b.K0 == pytest.approx(6.0) and b.K1 == pytest.approx(3.0)
    assert b.M == pytest.approx(np.sqrt(3) + np.sqrt(6))


def test_formula_against_sympy():
    x0, c0, c1, c2, p = sp.symbols("x0 c0 c1 c2 p", positive=True)
    K0 = (x0 ** 2 + 2 * c2) * sp.exp(2 * c1)
    K1 = x0 ** 2 / 2 + c2 + K0 * c1
    M = (K1 / c0) ** (1 / p) + sp.sqrt(K0)
    vals = {x0: 1.3, c0: 0.7, c1: 0.4, c2: 0.25, p: 2.5}
    b = gronwall_bounds(1.3, 0.7, 0.4, 0.25, 2.5)
    assert b.K0 == pytest.approx(float(K0.subs(vals)), rel=1e-14)
    assert b.K1 == pytest.approx(float(K1.subs(vals)), rel=1e-14)
    assert b.M == pytest.approx(float(M.subs(vals)), rel=1e-14)
    assert b.lp_bound == pytest.approx(float(((K1 / c0) ** (1 / p)).subs(vals)), rel=1e-14)


@pytest.mark.parametrize("c0", [0.0, -1.0, np.nan])
def test_rejects_bad_c0(c0):
    with pytest.raises(ValueError):
        gronwall_bounds(1.0, c0, 0.0, 0.0, 2.0)


def test_rejects_negative_norms():
    with pytest.raises(ValueError):
        gronwall_bounds(1.0, 1.0, -0.1, 0.0, 2.0)


nonneg = st.floats(0, 5)


@settings(max_examples=200, deadline=None)
@given(nonneg, st.floats(0.1, 5), nonneg, nonneg, st.floats(1.1, 5), st.floats(1e-3, 1))
def test_bounds_monotone(x0, c0, c1, c2, p, h):
    base = gronwall_bounds(x0, c0, c1, c2, p)
    for bumped in (gronwall_bounds(x0 + h, c0, c1, c2, p), gronwall_bounds(x0, c0, c1 + h, c2, p),
                   gronwall_bounds(x0, c0, c1, c2 + h, p)):
        assert bumped.K0 >= base.K0 and bumped.K1 >= base.K1 and bumped.M >= base.M
    assert gronwall_bounds(x0, c0 + h, c1, c2, p).M <= base.M
    assert min(base.K0, base.K1, base.M) >= 0


@settings(max_examples=200, deadline=None)
@given(nonneg, nonneg, nonneg)
def test_conservative_grouping_dominates(a, b, c):
    assert (a + 2 * b) * np.exp(2 * c) >= a + 2 * b * np.exp(2 * c) - 1e-12


def test_time_l1_right_endpoint():
    t = np.array([0.0, 0.5, 1.0])
    assert time_l1(2.0, t) == 2.0
    assert time_l1(lambda s: s, t) == pytest.approx(0.5 * 0.5 + 0.5 * 1.0)
    assert time_l1(1.0, [0.0]) == 0.0


def test_operator_bounds_forcing_shift(sine8):
    A = PLaplaceOperator(sine8, 2.0)
    t = np.linspace(0, 1, 11)
    plain = operator_bounds(A, ZeroForcing(sine8), 1.0, t)
    assert plain.c1_l1 == 0.0 and plain.c2_l1 == 0.0
    f = FieldForcing(sine8, lambda s, x: np.ones(len(x)))
    shifted = operator_bounds(A, f, 1.0, t)
    assert shifted.c1_l1 == pytest.approx(0.5)
    assert shifted.c2_l1 == pytest.approx(0.5 * float(np.sum(f.load(0.0) ** 2)))


def test_operator_bounds_refused(sine8):
    with pytest.raises(ValueError):
        operator_bounds(NemyckiiOperator(sine8, linear(1.0)), None, 1.0, [0, 1])


def test_audit_zero_run(sine8):
    A = PLaplaceOperator(sine8, 3.0)
    cfg = SolveConfig(dt=0.01, T=0.1)
    traj, _ = solve_coefficients(np.zeros(8), A, None, sine8, cfg)
    bounds = operator_bounds(A, None, 0.0, traj.times)
    rep = audit_trajectory(traj, bounds, sine8, 3.0)
    assert rep.passed and rep.lp_V == 0.0 and rep.linf_H == 0.0


def test_audit_heat(sine8):
    A = PLaplaceOperator(sine8, 2.0)
    a0 = np.zeros(8)
    a0[0] = 1.0
    traj, _ = solve_coefficients(a0, A, None, sine8, SolveConfig(dt=1e-3, T=0.1))
    bounds = operator_bounds(A, None, 1.0, traj.times)
    rep = audit_trajectory(traj, bounds, sine8, 2.0)
    assert rep.passed
    assert rep.linf_H == pytest.approx(1.0) and bounds.K0 == 1.0


def test_audit_antidamped(sine8):
    lam, T = 12.0, 0.2
    A = sum_operator([PLaplaceOperator(sine8, 2.0), NemyckiiOperator(sine8, linear(lam))])
    a0 = np.zeros(8)
    a0[0] = 1.0
    traj, _ = solve_coefficients(a0, A, None, sine8, SolveConfig(dt=1e-4, T=T))
    # the first mode grows like exp((lam - pi^2) t)
    assert traj.coeffs[-1, 0] == pytest.approx(np.exp((lam - np.pi ** 2) * T), rel=2e-3)
    bounds = operator_bounds(A, None, 1.0, traj.times)
    assert bounds.K0 == pytest.approx(np.exp(2 * lam * T))
    rep = audit_trajectory(traj, bounds, sine8, 2.0)
    assert rep.passed
    assert rep.linf_H <= np.exp(lam * T)


def test_audit_detects_overstated_c0(sine8):
    A = PLaplaceOperator(sine8, 2.0)
    a0 = np.ones(8)
    traj, _ = solve_coefficients(a0, A, None, sine8, SolveConfig(dt=1e-3, T=0.05))
    b = operator_bounds(A.with_constants(c0=1e4), None, np.linalg.norm(a0), traj.times)
    rep = audit_trajectory(traj, b, sine8, 2.0)
    assert not rep.lp_ok and "FAIL" in rep.summary()


def test_as_dict_roundtrip():
    b = gronwall_bounds(1.0, 2.0, 0.1, 0.2, 3.0)
    d = b.as_dict()
    assert AprioriBounds(**d) == b
