import dataclasses

import numpy as np
import pytest
from scipy.integrate import quad

from bochner_galerkin.conditions import (
    PHI_NAMES, DegenerateDemo, ProbeRefused, ProbeReport, c3_margin, c5_margin, check_coercivity_C5,
    check_growth_C3, check_monotonicity, check_nemyckii_growth, check_skew, comp2_demo,
    default_comp2_pair, dual_norm, interpolation_exponents, interpolation_margin, interpolation_probe,
    nemyckii_margin, oscillation_demo, replay_margin, sample_coefficients, torus3_grid)
from bochner_galerkin.function_space import intersection_norm, v_norm
from bochner_galerkin.operators import (ConvectiveOperator, NemyckiiOperator, PLaplaceOperator,
                                        StressOperator, StressParams, convective_pairing, sum_operator)
from bochner_galerkin.perturbation import identity, linear, linear_plus_sine, power, zero


# ---------------------------------------------------------------- report

def test_verdict_threshold():
    rep = ProbeReport("x", 1, -1e-9, -1e-9, 0.0, np.zeros(2), 0, 1e-8, 0)
    assert rep.passed
    rep = ProbeReport("x", 1, -2e-8, -2e-8, 0.0, np.zeros(2), 0, 1e-8, 0)
    assert not rep.passed and "fail" in rep.summary()


def test_sampling_spans_three_decades():
    c = sample_coefficients(50, 300, seed=1)
    scales = [np.std(c[i::3]) for i in range(3)]
    assert scales[0] < 0.2 and 0.8 < scales[1] < 1.2 and 8 < scales[2] < 12


# ------------------------------------------------------------- dual norm

def test_dual_norm_zero_load(sine8):
    assert dual_norm(np.zeros(8), sine8, 2.0) == 0.0


def test_dual_norm_lower_bound_and_tight_for_p2(sine8):
    # for p = 2 the intersection norm is ||w||_H + |D a| with D = diag(i pi)
    rng = np.random.default_rng(5)
    load = rng.standard_normal(8)
    val = dual_norm(load, sine8, 2.0, seed=0)
    w = rng.standard_normal((2000, 8))
    sampled = max(float(load @ x) / intersection_norm(x, sine8, 2.0) for x in w)
    assert val >= sampled - 1e-9
    # upper bound: ||w||_V >= pi |a| so the norm is >= (1 + pi)|a|
    assert val <= np.linalg.norm(load) / (1 + np.pi) * (1 + 1e-9)


# -------------------------------------------------------------------- C3

def test_c3_zero_vector(sine8):
    rep = check_growth_C3(PLaplaceOperator(sine8, 3.0), sine8, coeffs=[np.zeros(8)])
    assert rep.margin >= 0 and rep.passed


@pytest.mark.parametrize("p", [2.0, 3.0, 1.5])
def test_c3_p_laplace_passes(sine16, p):
    rep = check_growth_C3(PLaplaceOperator(sine16, p), sine16, samples=60, seed=2)
    assert rep.passed, rep.summary()
    assert rep.implied_constant <= 1.0 + 1e-8


def test_c3_halved_beta_fails(sine16):
    op = PLaplaceOperator(sine16, 2.0).with_constants(beta=0.5)
    big = np.zeros((3, 16))
    big[:, -4:] = 10.0 * np.random.default_rng(0).standard_normal((3, 4))
    rep = check_growth_C3(op, sine16, coeffs=big)
    assert not rep.passed and rep.margin < 0


def test_c3_refused_without_constants(sine8):
    op = NemyckiiOperator(sine8, power(3), p=2.0)
    with pytest.raises(ProbeRefused):
        check_growth_C3(op, sine8, samples=2)


def test_c3_stress_and_convective(divfree12):
    A = sum_operator([StressOperator(divfree12, StressParams(11 / 5)), ConvectiveOperator(divfree12, 11 / 5)])
    rep = check_growth_C3(A, divfree12, samples=30, seed=3)
    assert rep.passed, rep.summary()


# -------------------------------------------------------------------- C5

def test_c5_identity_case(sine16):
    rep = check_coercivity_C5(PLaplaceOperator(sine16, 3.0), sine16, samples=200, seed=0)
    assert rep.passed
    fn = c5_margin(PLaplaceOperator(sine16, 3.0), sine16)
    for a in sample_coefficients(16, 30, seed=9):
        rhs, lhs = fn(0.0, a)
        assert abs(rhs - lhs) <= 1e-10 * (1 + abs(rhs))


def test_c5_with_linear_perturbation(sine8):
    lam = 2.5
    A = sum_operator([PLaplaceOperator(sine8, 2.0), NemyckiiOperator(sine8, linear(lam))])
    assert A.constants.c1 == lam
    rep = check_coercivity_C5(A, sine8, samples=100, seed=1)
    assert rep.passed
    # <Bv, v> = -lam |v|^2 exactly
    v = np.random.default_rng(1).standard_normal(8)
    assert A.parts()[1][1].pairing(0, v, v) == pytest.approx(-lam * v @ v, rel=1e-12)


def test_c5_doubled_c0_fails(sine16):
    rep = check_coercivity_C5(PLaplaceOperator(sine16, 3.0).with_constants(c0=2.0), sine16, samples=50)
    assert not rep.passed
    assert rep.implied_constant == pytest.approx(1.0, rel=1e-8)


def test_c5_refused(sine8):
    with pytest.raises(ProbeRefused):
        check_coercivity_C5(NemyckiiOperator(sine8, power(2)), sine8, samples=2)


# ------------------------------------------------------------- Nemyckii

def test_nemyckii_zero_margin(sine8):
    rep = check_nemyckii_growth(zero(), sine8, samples=30)
    assert rep.margin == 0.0 and rep.passed


def test_nemyckii_identity_passes(sine16):
    assert check_nemyckii_growth(identity(), sine16, samples=200).passed


def test_nemyckii_square_with_false_r_fails(sine16):
    rep = check_nemyckii_growth(power(2, r=2.0), sine16, samples=200)
    assert not rep.passed
    assert np.linalg.norm(rep.witness) > 5  # large amplitude witness


def test_nemyckii_square_with_true_r_passes(sine16):
    assert check_nemyckii_growth(power(2), sine16, samples=200).passed


def test_nemyckii_rejects_bad_r(sine8):
    with pytest.raises(ValueError):
        nemyckii_margin(dataclasses.replace(identity(), r=0.5), sine8)


def test_nemyckii_perturbed_preset(sine16):
    assert check_nemyckii_growth(linear_plus_sine(1.0), sine16, samples=100).passed


# ------------------------------------------------------------ skewness

def test_skew_probe(divfree12):
    rep = check_skew(divfree12, samples=100)
    assert rep.passed and abs(rep.abs_margin) < 1e-10


def test_monotonicity_probe(sine16, divfree12):
    assert check_monotonicity(PLaplaceOperator(sine16, 3.0), sine16, samples=100).passed
    assert check_monotonicity(StressOperator(divfree12, StressParams(1.6, 0.1)), divfree12,
                              samples=100).passed
    # a non-monotone perturbation fails
    assert not check_monotonicity(NemyckiiOperator(sine16, linear(50.0)), sine16, samples=20).passed


# ------------------------------------------------- replay and determinism

def test_witness_replays(sine16):
    A = PLaplaceOperator(sine16, 2.0).with_constants(c0=1.5)
    rep = check_coercivity_C5(A, sine16, samples=40, seed=4)
    assert replay_margin(rep, c5_margin(A, sine16)) == pytest.approx(rep.margin, rel=1e-12, abs=1e-15)
    A3 = PLaplaceOperator(sine16, 3.0)
    rep3 = check_growth_C3(A3, sine16, samples=20, seed=4)
    assert replay_margin(rep3, c3_margin(A3, sine16, seed=4)) == pytest.approx(rep3.margin, rel=1e-9)


def test_jobs_do_not_change_result(sine16):
    A = sum_operator([PLaplaceOperator(sine16, 2.5), NemyckiiOperator(sine16, linear_plus_sine(1.0))])
    r1 = check_growth_C3(A, sine16, samples=24, seed=6, jobs=1)
    r4 = check_growth_C3(A, sine16, samples=24, seed=6, jobs=4)
    assert r1.margin == r4.margin and r1.witness_index == r4.witness_index
    np.testing.assert_array_equal(r1.witness, r4.witness)


# ---------------------------------------------------------- interpolation

def test_interpolation_exponents():
    rho, pstar = interpolation_exponents(11 / 5)
    assert rho == pytest.approx(11 / 3)
    assert pstar == pytest.approx(33 / 4)
    # 1/rho = theta/2 + (1 - theta)/p* with theta = 2/5
    assert 1 / rho == pytest.approx(0.2 + 0.6 / pstar)


def test_interpolation_constant_field_equality():
    nodes, w = torus3_grid(8)
    field = np.full((len(w), 3), 1.7)
    rhs, lhs = interpolation_margin(field, w, 2.5)
    assert rhs == pytest.approx(lhs, rel=1e-12)


def test_interpolation_single_mode():
    nodes, w = torus3_grid(12)
    field = np.zeros((len(w), 3))
    field[:, 0] = np.cos(nodes[:, 0] + 2 * nodes[:, 2])
    rhs, lhs = interpolation_margin(field, w, 11 / 5)
    assert rhs > lhs
    # x + 2z runs uniformly over the 12 grid phases, so the 3D sum reduces to 1D
    s = 2 * np.pi * np.arange(12) / 12

    def norm(q):
        return ((2 * np.pi) ** 3 * np.mean(np.abs(np.cos(s)) ** q)) ** (1 / q)

    def exact(q):
        mean = quad(lambda u: abs(np.cos(u)) ** q, 0, 2 * np.pi)[0] / (2 * np.pi)
        return ((2 * np.pi) ** 3 * mean) ** (1 / q)

    rho, pstar = interpolation_exponents(11 / 5)
    assert lhs == pytest.approx(norm(rho) ** 2, rel=1e-12)
    assert rhs == pytest.approx(norm(2) ** 0.8 * norm(pstar) ** 1.2, rel=1e-12)
    # and the grid is close to the continuous norms
    assert lhs == pytest.approx(exact(rho) ** 2, rel=1e-3)


@pytest.mark.parametrize("p", [11 / 5, 2.5])
def test_interpolation_probe_passes(p):
    rep = interpolation_probe(samples=100, p=p, seed=0)
    assert rep.passed and rep.margin >= -1e-8


@pytest.mark.parametrize("p", [2.0, 3.0, 4.0])
def test_interpolation_rejects_exponent(p):
    with pytest.raises(ValueError):
        interpolation_probe(samples=2, p=p)


# ----------------------------------------------------------------- comp2

def test_comp2_self_pair_vanishes(divfree12):
    v, _ = default_comp2_pair(divfree12)
    with pytest.raises(DegenerateDemo):
        comp2_demo(v, v, divfree12, n_max=3)
    # the quantity itself is zero: <B x, x> vanishes pointwise in time
    assert abs(convective_pairing(v, v, divfree12)) < 1e-14


def test_comp2_plateau(divfree12):
    v, w = default_comp2_pair(divfree12)
    res = comp2_demo(v, w, divfree12, n_max=20)
    assert abs(res.bvw) > 1e-3
    assert res.skew_ok and res.plateau_ok
    np.testing.assert_allclose(np.abs(res.q), np.pi * abs(res.bvw), rtol=1e-10)
    assert res.observed_sign == -int(np.sign(res.bvw))


def test_comp2_single_value_dense_oracle(divfree12):
    v, w = default_comp2_pair(divfree12)
    res = comp2_demo(v, w, divfree12, n_max=1)
    oracle = quad(lambda t: convective_pairing(np.sin(t) * v, np.sin(t) * v - w, divfree12),
                  0, 2 * np.pi, epsabs=1e-13)[0]
    assert res.q.shape == (1,)
    assert res.q[0] == pytest.approx(oracle, rel=1e-10)


def test_comp2_rejects_scalar(sine8):
    with pytest.raises(ValueError):
        default_comp2_pair(sine8)
    with pytest.raises(ValueError):
        comp2_demo(np.ones(12), np.ones(12), sine8, n_max=0)


# ----------------------------------------------------------- oscillation

def test_oscillation_constant():
    res = oscillation_demo("one", n_max=10)
    np.testing.assert_allclose(res.s, 0.0, atol=1e-12)


def test_oscillation_linear():
    res = oscillation_demo("t", n_max=20)
    np.testing.assert_allclose(res.s, -2 * np.pi / res.n, rtol=1e-10)
    assert res.decay_ok and res.sin2_ok


@pytest.mark.parametrize("phi", PHI_NAMES)
def test_oscillation_catalogue(phi):
    res = oscillation_demo(phi, n_max=30)
    assert res.decay_ok and res.sin2_ok
    np.testing.assert_allclose(res.sin2, np.pi, atol=1e-8)


def test_oscillation_callable_and_errors():
    res = oscillation_demo(lambda t: np.cos(t) ** 2, n_max=5)
    assert res.decay_ok
    with pytest.raises(ValueError):
        oscillation_demo("nope")
    with pytest.raises(ValueError):
        oscillation_demo("t", n_max=0)
