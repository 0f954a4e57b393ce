import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from roadfront.model import (
    BracketError,
    ModelParams,
    ReactionSpec,
    derive_constants,
    r0_bracket,
    reaction_eval,
    solve_r0,
)


def test_r0_golden_ratio():
    r0 = solve_r0(ModelParams(alpha=0.5, mu=1.0, k=0.0))
    assert abs(r0 - (1 + math.sqrt(5)) / 2) < 1e-10


def test_r0_when_alpha_quarter_and_k_nonzero():
    # brentq is an independent root finder
    from scipy.optimize import brentq

    p = ModelParams(alpha=0.25, mu=1.0, k=2.0)
    ref = brentq(lambda r: r * r - math.sqrt(r) - 3.0, 1.0, 10.0, xtol=1e-14)
    assert abs(solve_r0(p) - ref) < 1e-10


@given(
    alpha=st.floats(0.01, 0.99),
    a=st.floats(0.05, 20.0),
    k=st.floats(0.0, 20.0),
)
def test_r0_residual_vanishes_and_exceeds_sqrt_a(alpha, a, k):
    p = ModelParams(alpha=alpha, k=k, reaction=ReactionSpec(a))
    lo, hi = r0_bracket(p)
    assert lo < hi
    r0 = solve_r0(p)
    assert lo <= r0 <= hi
    assert abs(r0 * r0 - r0 ** (2 * alpha) - a - k) < 1e-9 * (1 + a + k)
    c = derive_constants(p)
    assert c.r0 > math.sqrt(a)
    assert c.cK == pytest.approx(2 * math.sqrt(a))
    assert c.gammaStar == pytest.approx(a / (1 + 2 * alpha))


def test_derived_constants_reference_case():
    c = derive_constants(ModelParams())
    assert c.cK == 2.0
    assert c.gammaStar == 0.5


@pytest.mark.parametrize(
    "kwargs",
    [{"alpha": 0.0}, {"alpha": 1.0}, {"mu": 0.0}, {"k": -1.0}],
)
def test_invalid_params_rejected(kwargs):
    with pytest.raises(ValueError):
        ModelParams(**kwargs)


def test_bad_rate_rejected():
    with pytest.raises(ValueError):
        ReactionSpec(0.0)


def test_bracket_error_type():
    assert issubclass(BracketError, RuntimeError)


def test_reaction_kpp_shape():
    f = ReactionSpec(1.5)
    s = np.linspace(0, 1, 101)
    assert reaction_eval(f, 0.0) == 0 and f(1.0) == 0
    assert np.all(f(s[1:-1]) > 0)
    assert np.all(f(s) <= f.fprime0 * s + 1e-15)
    assert f.derivative(0.0) == 1.5
    assert float(f.second_derivative()) == -3.0


@given(v0=st.floats(0.0, 1.5), tau=st.floats(0.0, 2.0), a=st.floats(0.1, 3.0))
def test_logistic_flow_matches_ode(v0, tau, a):
    f = ReactionSpec(a)
    sol = solve_ivp(lambda t, v: f(v), (0, tau), [v0], rtol=1e-11, atol=1e-13)
    assert f.flow(v0, tau) == pytest.approx(sol.y[0, -1], rel=1e-8, abs=1e-12)
    assert f.flow(v0, tau, linearized=True) == pytest.approx(v0 * math.exp(a * tau))


@given(a=st.floats(0.0, 1.0), b=st.floats(0.0, 1.0), tau=st.floats(0.0, 1.0))
def test_flow_is_order_preserving(a, b, tau):
    lo, hi = sorted((a, b))
    f = ReactionSpec()
    assert f.flow(lo, tau) <= f.flow(hi, tau) + 1e-15
