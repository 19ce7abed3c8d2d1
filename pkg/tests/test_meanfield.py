import json
import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from spatialrumor.errors import StepSizeError, UsageError
from spatialrumor.lattice import Params
from spatialrumor.meanfield import (
    Classification,
    MeanFieldState,
    derivative,
    endemic_equilibrium,
    integrate,
    jacobian,
    jacobian_at_origin,
    stability,
    stability_json,
)


def test_derivative_examples():
    assert derivative(MeanFieldState(0, 0), Params(2, 1)) == (0.0, 0.0)
    du1, du2 = derivative(MeanFieldState(0.5, 0.0), Params(2, 0))
    assert du1 == pytest.approx(0.0) and du2 == 0.0
    du1, du2 = derivative(MeanFieldState(0.2, 0.1), Params(3, 2))
    # 3*0.2*0.7 - 2*0.04 - 0.2 and 2*0.04 - 0.1
    assert du1 == pytest.approx(0.14) and du2 == pytest.approx(-0.02)


def test_state_outside_simplex_rejected():
    with pytest.raises(UsageError):
        MeanFieldState(0.8, 0.5)
    with pytest.raises(UsageError):
        MeanFieldState(-0.1, 0.0)


def test_logistic_limit_without_stifling():
    s = integrate(MeanFieldState(0.01, 0.0), Params(2, 0), 50.0).final
    assert abs(s.u1 - 0.5) < 1e-6 and abs(s.u2) < 1e-6


def test_endemic_limit_with_stifling():
    u1 = (-3 + math.sqrt(17)) / 4
    s = integrate(MeanFieldState(0.01, 0.0), Params(2, 1), 50.0).final
    assert abs(s.u1 - u1) < 1e-6 and abs(s.u2 - u1 * u1) < 1e-6
    eq = endemic_equilibrium(Params(2, 1))
    assert eq.u1 == pytest.approx(u1, abs=1e-14) and eq.u2 == pytest.approx(u1 * u1, abs=1e-14)


def test_subcritical_decays():
    s = integrate(MeanFieldState(0.3, 0.1), Params(0.8, 1.0), 50.0).final
    assert s.u1 < 1e-3 and s.u2 < 1e-3
    assert endemic_equilibrium(Params(1.0, 3.0)) is None


def test_matches_independent_solver():
    p = Params(3.0, 0.7)
    series = integrate(MeanFieldState(0.05, 0.02), p, 10.0)

    def rhs(t, y):
        return list(derivative(MeanFieldState(*np.clip(y, 0, 1)), p))

    ref = solve_ivp(rhs, (0, 10), [0.05, 0.02], rtol=1e-11, atol=1e-13, t_eval=[2.5, 10.0])
    for k, tk in enumerate(ref.t):
        i = int(round(tk / 1e-3))
        np.testing.assert_allclose(series.u[i, 1:], ref.y[:, k], atol=1e-8)


def test_series_shape_and_time_grid():
    series = integrate(MeanFieldState(0.1, 0.0), Params(2, 1), 1.0, dt=0.25)
    np.testing.assert_allclose(series.t, [0, 0.25, 0.5, 0.75, 1.0])
    assert series.u.shape == (5, 3)
    assert series.to_csv().splitlines()[0] == "t,u0,u1,u2"
    assert len(integrate(MeanFieldState(0.1, 0.0), Params(2, 1), 0.0).t) == 1


@settings(deadline=None, max_examples=30)
@given(
    st.floats(0, 5), st.floats(0, 5), st.floats(0, 1), st.floats(0, 1)
)
def test_conservation(lam, alpha, a, b):
    u1, u2 = a * (1 - b), b * (1 - a) * 0.5
    series = integrate(MeanFieldState(u1, u2), Params(lam, alpha), 5.0, dt=1e-2)
    assert np.abs(series.u.sum(axis=1) - 1).max() < 1e-9


def test_jacobian_at_origin_examples():
    r = jacobian_at_origin(Params(2, 1))
    assert r.eigenvalues == (1.0, -1.0) and r.classification is Classification.UNSTABLE
    r = jacobian_at_origin(Params(0.5, 1))
    assert r.eigenvalues == (-0.5, -1.0) and r.classification is Classification.STABLE
    r = jacobian_at_origin(Params(1, 4))
    assert r.marginal and r.classification is Classification.STABLE


@pytest.mark.parametrize("lam", [0.3, 1.0, 1.7, 4.0])
def test_origin_classification_independent_of_alpha(lam):
    results = {jacobian_at_origin(Params(lam, a)) for a in (0.0, 0.5, 3.0, 100.0)}
    assert len(results) == 1


@settings(deadline=None, max_examples=50)
@given(st.floats(0, 5), st.floats(0, 5), st.floats(0.01, 0.98), st.floats(0.0, 1.0))
def test_jacobian_central_difference(lam, alpha, u1, frac):
    s = MeanFieldState(u1, frac * (0.99 - u1))
    p = Params(lam, alpha)
    h = 1e-4
    num = np.empty((2, 2))
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        # raw points may step just off the simplex, so skip validation
        plus = SimpleNamespace(u1=s.u1 + e[0], u2=s.u2 + e[1])
        minus = SimpleNamespace(u1=s.u1 - e[0], u2=s.u2 - e[1])
        num[:, j] = (np.array(derivative(plus, p)) - np.array(derivative(minus, p))) / (2 * h)
    np.testing.assert_allclose(jacobian(s, p), num, atol=1e-6)


def test_endemic_equilibrium_is_stable():
    for lam, a in [(2, 1), (3, 0.1), (5, 20), (1.5, 0)]:
        eq = endemic_equilibrium(Params(lam, a))
        assert max(abs(v) for v in derivative(eq, Params(lam, a))) < 1e-12
        assert stability(eq, Params(lam, a)).classification is Classification.STABLE


def test_large_step_raises():
    with pytest.raises(StepSizeError):
        integrate(MeanFieldState(0.9, 0.0), Params(50, 50), 5.0, dt=1.0)


def test_stability_json():
    data = json.loads(stability_json(Params(2, 1)))
    assert data == {"lambda": 2, "alpha": 1, "eigenvalues": [1.0, -1.0], "classification": "Unstable", "marginal": False}
