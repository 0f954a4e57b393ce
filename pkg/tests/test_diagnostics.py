import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roadfront.diagnostics import (
    EmptyTraceError,
    FitError,
    FrontTrace,
    drift,
    extract_levels,
    fit_field_speed,
    fit_road_exponent,
    fit_tail_exponent,
    level_position_function,
    ray_profile,
    regime_exponents,
    rescaled_view,
    rescaled_view_function,
)
from roadfront.solver import RectGrid, Snapshot


def _trace(times, x):
    x = np.asarray(x, float)
    return FrontTrace(0.1, np.asarray(times, float), x, -x, saturated=np.zeros(len(times), bool))


def _ols_slope(t, y):
    tb, yb = sum(t) / len(t), sum(y) / len(y)
    return sum((a - tb) * (b - yb) for a, b in zip(t, y)) / sum((a - tb) ** 2 for a in t)


def test_pure_exponential_rate():
    t = np.linspace(0, 20, 81)
    fit = fit_road_exponent(_trace(t, 3 * np.exp(0.5 * t)))
    assert fit.estimate == pytest.approx(0.5, abs=1e-12)
    assert fit.window == (10.0, 20.0)
    assert fit.r2 > 0.999999


def test_algebraic_correction_biases_rate_downward():
    t = np.linspace(8, 14, 25)
    x = np.exp(0.5 * t) * t**-0.75
    fit = fit_road_exponent(_trace(t, x), window=(8, 14))
    oracle = 0.5 - 0.75 * _ols_slope(list(t), [math.log(s) for s in t])
    assert fit.estimate == pytest.approx(oracle, abs=1e-12)
    assert fit.estimate == pytest.approx(0.43, abs=0.01)
    assert fit.r2 > 0.98


def test_linear_speed_exact():
    t = np.linspace(0, 10, 41)
    tr = FrontTrace(0.1, t, t, -t, rays={math.pi / 2: 3 * t + 2}, saturated=np.zeros(41, bool))
    fit = fit_field_speed(tr, math.pi / 2, window=(2, 10))
    assert fit.estimate == pytest.approx(3.0, abs=1e-12)
    assert fit.stderr < 1e-10


@settings(max_examples=30)
@given(shift=st.floats(-5, 5), scale=st.floats(0.1, 50), rate=st.floats(0.05, 1.0))
def test_rate_invariant_under_shift_and_scale(shift, scale, rate):
    t = np.linspace(10, 30, 41)
    x = np.exp(rate * t) * t**-0.75
    base = fit_road_exponent(_trace(t, x), (10, 30)).estimate
    scaled = fit_road_exponent(_trace(t, scale * x), (10, 30)).estimate
    shifted = fit_road_exponent(_trace(t + shift, x), (10 + shift, 30 + shift)).estimate
    assert scaled == pytest.approx(base, abs=1e-9)
    assert shifted == pytest.approx(base, abs=1e-9)


def test_fit_errors():
    t = np.linspace(0, 1, 5)
    with pytest.raises(FitError):
        fit_road_exponent(_trace(t, np.exp(t)))
    t = np.linspace(0, 10, 41)
    with pytest.raises(FitError):
        fit_road_exponent(_trace(t, np.exp(t)), window=(5, 11))
    with pytest.raises(FitError):
        fit_road_exponent(_trace(t, np.where(t > 7, np.nan, 1.0)))


def test_tail_exponent():
    x = np.geomspace(1, 1e3, 200)
    fit = fit_tail_exponent(x, 4 * x**-2.0, 10, 500)
    assert fit.estimate == pytest.approx(-2.0, abs=1e-12)


def _snap(t, u, grid, v=None):
    return Snapshot(t, u, v)


def test_crossing_linear_interpolation_and_symmetry():
    grid = RectGrid(256, 11, 50.0, 5.0)
    x = grid.x
    snaps = [_snap(t, np.exp(-np.abs(x) / t), grid) for t in (1.0, 2.0, 4.0)]
    tr = extract_levels(snaps, 0.1, grid)
    exact = np.array([1.0, 2.0, 4.0]) * math.log(10)
    assert np.allclose(tr.x_right, exact, rtol=5e-3)
    assert np.allclose(tr.x_left, -tr.x_right, atol=1e-12)
    assert not tr.saturated.any()


def test_crossing_uses_rightmost_level():
    grid = RectGrid(512, 11, 40.0, 5.0)
    x = grid.x
    u = np.where(np.abs(x - 10) < 2, 0.5, 0.0) + np.where(np.abs(x) < 3, 0.5, 0.0)
    tr = extract_levels([_snap(1.0, u, grid)], 0.25, grid)
    assert 11.5 < tr.x_right[0] < 12.5


def test_saturation_flags_and_taints_fit():
    grid = RectGrid(64, 11, 10.0, 5.0)
    snaps = [_snap(t, np.full(64, 0.5), grid) for t in np.linspace(1, 10, 20)]
    tr = extract_levels(snaps, 0.1, grid)
    assert tr.saturated.all()
    assert fit_road_exponent(tr).tainted


def test_empty_trace_raises():
    grid = RectGrid(64, 11, 10.0, 5.0)
    with pytest.raises(EmptyTraceError):
        extract_levels([_snap(1.0, np.zeros(64), grid)], 0.1, grid)
    with pytest.raises(EmptyTraceError):
        extract_levels([], 0.1, grid)


def test_ray_profile_radial_field():
    grid = RectGrid(256, 129, 20.0, 20.0)
    X, Y = np.meshgrid(grid.x, grid.y)
    v = np.exp(-np.hypot(X, Y) / 3)
    for th in (math.pi / 4, math.pi / 2, 2.0):
        r, vals = ray_profile(v, grid, th)
        assert np.allclose(vals, np.exp(-r / 3), atol=1e-2)
    snaps = [Snapshot(1.0, np.exp(-np.abs(grid.x) / 3), v)]
    tr = extract_levels(snaps, 0.1, grid, thetas=(math.pi / 4,))
    assert tr.rays[math.pi / 4][0] == pytest.approx(3 * math.log(10), rel=1e-2)


def test_regime_exponents():
    r = regime_exponents(0.25)
    assert r == {"m0": 0.0, "critical": 1.0, "double": 2.0}


def test_rescaled_view_resamples_exactly():
    x = np.linspace(0, 1e4, 100_001)
    l, m = 0.3, 0.5
    snaps = [Snapshot(t, np.exp(-x / (math.exp(l * t) * t**-m)), None) for t in (2.0, 5.0, 10.0)]
    xi = np.linspace(0.1, 3, 30)
    view = rescaled_view(snaps, x, l, m, xi)
    assert np.allclose(view.profiles, np.exp(-xi)[None, :], atol=1e-3)
    assert not view.outside.any()
    big = rescaled_view(snaps, x, l, m, np.array([1e5]))
    assert big.outside.all() and np.isnan(big.profiles).all()


def test_level_positions_follow_power_of_t():
    # a profile whose level set sits at e^{t/2} t^{-3/4}: xi-levels scale like t^{m - 3/4}
    dens = lambda x, t: math.exp(-x / (math.exp(0.5 * t) * t**-0.75))
    times = np.array([10.0, 20.0, 40.0])
    for m, sign in ((0.0, -1), (0.75, 0), (1.5, 1)):
        xi = np.linspace(1e-3, 30, 8001) if m > 0 else np.linspace(1e-4, 0.3, 4001)
        view = rescaled_view_function(dens, times, 0.5, m, xi)
        pos = view.level_positions(math.exp(-1))
        assert np.allclose(pos, times ** (m - 0.75), rtol=1e-3)
        d = drift(pos)
        assert (abs(d) < 1e-3) if sign == 0 else (np.sign(d) == sign)


def test_level_position_function():
    ld = lambda x, t: -2.0 * math.log(x) + t
    assert level_position_function(ld, 2.0, 1e-3, 1.0, 1e6) == pytest.approx(math.sqrt(1e3 * math.e**2), rel=1e-10)
    with pytest.raises(FitError):
        level_position_function(ld, 2.0, 1e-3, 1e5, 1e6)


def test_rescaled_view_rejects_small_t():
    with pytest.raises(ValueError):
        rescaled_view([Snapshot(0.5, np.zeros(3))], np.arange(3.0), 0.1, 0, np.ones(2))
