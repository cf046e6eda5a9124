import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bochner_galerkin.perturbation import (CATALOGUE, Term, from_catalogue, identity, linear,
                                           linear_plus_power, linear_plus_sine, power, sine)

x = np.zeros((1, 1))
svals = st.floats(-1e4, 1e4, allow_nan=False)


def growth_ok(spec, s, t=0.0):
    b = abs(float(spec(t, x, np.array([s]))[0]))
    bound = float(np.ravel(spec.C1)[0] if not callable(spec.C1) else spec.C1(t, x)) + \
        float(spec.C2) * (1 + abs(s)) ** (spec.r - 1)
    return b <= bound * (1 + 1e-12) + 1e-12


def sign_ok(spec, s, t=0.0):
    b = float(spec(t, x, np.array([s]))[0])
    return b * s >= -float(spec.c1) * s * s - float(spec.c2) - 1e-9 * (1 + s * s)


PRESETS = [identity(), linear(1.0), linear(-2.0), sine(), linear_plus_sine(1.0), linear_plus_sine(3.0),
           linear_plus_power(1.0, 1.0, 1.5), linear_plus_power(0.5, -2.0, 1.2), power(3), power(1)]


@pytest.mark.parametrize("spec", PRESETS, ids=lambda s: s.name)
@settings(max_examples=200, deadline=None)
@given(s=svals)
def test_declared_constants_hold_pointwise(spec, s):
    assert growth_ok(spec, s)
    if spec.c1 is not None:
        assert sign_ok(spec, s)


def test_linear_plus_sine_constants():
    spec = linear_plus_sine(1.0)
    assert (spec.C2, spec.r, spec.c1, spec.c2) == (2.0, 2.0, 2.0, 0.0)


def test_even_power_has_no_sign_constant():
    assert power(2).c1 is None


def test_derivative_matches_difference():
    for spec in PRESETS:
        s = np.linspace(-3, 3, 13) + 0.01
        h = 1e-6
        fd = (spec(0, np.zeros((13, 1)), s + h) - spec(0, np.zeros((13, 1)), s - h)) / (2 * h)
        np.testing.assert_allclose(spec.ds(0, np.zeros((13, 1)), s), fd, rtol=1e-5, atol=1e-6)


def test_rho_and_validate():
    assert identity().rho == 2.0
    assert sine().rho == 1.0
    assert power(3).rho == 6.0
    power(3).validate(2.0, 1)
    with pytest.raises(ValueError):
        power(3).validate(1.5, 2)


def test_catalogue_lookup():
    assert set(CATALOGUE) >= {"zero", "linear", "sine", "linear_plus_sine"}
    assert from_catalogue("linear", lam=2.0).params["lambda"] == 2.0
    with pytest.raises(ValueError):
        from_catalogue("exp")


def test_term_validation():
    with pytest.raises(ValueError):
        Term("log")
    with pytest.raises(ValueError):
        Term("power", 1.0, 1.5)
    with pytest.raises(ValueError):
        Term("signed_power", 1.0, 0.5)
    with pytest.raises(ValueError):
        linear_plus_power(1.0, 1.0, 3.0)
