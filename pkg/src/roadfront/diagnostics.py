"""Level-set extraction, rate and speed fits, rescaled-frame views."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats
from scipy.interpolate import RegularGridInterpolator

from .io import write_csv, write_pgm
from .solver import RectGrid, Snapshot


class EmptyTraceError(ValueError):
    pass


class FitError(ValueError):
    pass


@dataclass
class FrontTrace:
    level: float
    times: np.ndarray
    x_right: np.ndarray
    x_left: np.ndarray
    rays: dict = field(default_factory=dict)
    saturated: np.ndarray | None = None
    field_level: float | None = None

    def to_rows(self, theta=None):
        """(t, x_level, y_level) rows; y_level is the ray crossing height if a ray is given."""
        ys = np.full(self.times.size, np.nan)
        if theta is not None:
            ys = self.rays[theta] * math.sin(theta)
        return [(float(t), float(x), float(y)) for t, x, y in zip(self.times, self.x_right, ys)]

    def write_csv(self, path, theta=None):
        return write_csv(path, ["t", "x_level", "y_level"], self.to_rows(theta))


@dataclass
class RateFit:
    estimate: float
    stderr: float
    window: tuple[float, float]
    model: str
    r2: float
    n: int
    tainted: bool = False


def _last_crossing(s: np.ndarray, vals: np.ndarray, level: float):
    """Largest s where vals crosses down through level, linearly interpolated.

    Returns (position, saturated); saturated means vals >= level at the
    last sample, so the true crossing lies outside.
    """
    above = np.flatnonzero(vals >= level)
    if above.size == 0:
        return math.nan, False
    j = above[-1]
    if j == vals.size - 1:
        return float(s[j]), True
    frac = (vals[j] - level) / (vals[j] - vals[j + 1])
    return float(s[j] + frac * (s[j + 1] - s[j])), False


def ray_profile(v: np.ndarray, grid: RectGrid, theta: float, ds: float | None = None):
    """Samples of v along (r cos theta, r sin theta) from the origin until the ray leaves the box."""
    if not 0.0 < theta < math.pi:
        raise ValueError("ray angle must lie in (0, pi)")
    ds = ds or 0.25 * min(grid.hx, grid.hy)
    c, s = math.cos(theta), math.sin(theta)
    x_hi = grid.x[-1] if c >= 0 else grid.x[0]
    r_max = grid.Y / s
    if abs(c) > 1e-12:
        r_max = min(r_max, x_hi / c)
    r = np.arange(0.0, r_max + 1e-12, ds)
    f = RegularGridInterpolator((grid.y, grid.x), v)
    return r, f(np.column_stack([r * s, r * c]))


def extract_levels(snapshots, level: float, grid: RectGrid, thetas=(), field_level: float | None = None) -> FrontTrace:
    if not snapshots:
        raise EmptyTraceError("no snapshots")
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    field_level = level if field_level is None else field_level
    x = grid.x
    n = len(snapshots)
    xr, xl, sat = np.full(n, np.nan), np.full(n, np.nan), np.zeros(n, dtype=bool)
    rays = {th: np.full(n, np.nan) for th in thetas}
    for i, snap in enumerate(snapshots):
        xr[i], s_r = _last_crossing(x, snap.u, level)
        left, s_l = _last_crossing(-x[::-1], snap.u[::-1], level)
        xl[i] = -left
        sat[i] = s_r or s_l
        for th in thetas:
            if snap.v is None:
                raise ValueError("ray levels need field snapshots")
            r, vals = ray_profile(snap.v, grid, th)
            rays[th][i], s_f = _last_crossing(r, vals, field_level)
            sat[i] |= s_f
    if np.all(np.isnan(xr)) and all(np.all(np.isnan(a)) for a in rays.values()):
        raise EmptyTraceError(f"level {level} never reached")
    return FrontTrace(level, np.array([s.t for s in snapshots]), xr, xl, rays, sat, field_level)


def _window_mask(times, window):
    if window is None:
        lo = times[0] + 0.5 * (times[-1] - times[0])
        window = (lo, times[-1])
    lo, hi = window
    if lo < times[0] - 1e-12 or hi > times[-1] + 1e-12:
        raise FitError(f"window {window} not inside trace [{times[0]}, {times[-1]}]")
    return (times >= lo - 1e-12) & (times <= hi + 1e-12), (float(lo), float(hi))


def _linfit(t, y, model, window, tainted):
    if t.size < 8:
        raise FitError(f"need at least 8 points in the window, got {t.size}")
    res = stats.linregress(t, y)
    return RateFit(float(res.slope), float(res.stderr), window, model, float(res.rvalue**2), int(t.size), tainted)


def _saturation_taint(trace, mask):
    return bool(trace.saturated is not None and np.any(trace.saturated[mask]))


def fit_road_exponent(trace: FrontTrace, window=None) -> RateFit:
    """Slope of log x_level(t) against t."""
    mask, window = _window_mask(trace.times, window)
    x = trace.x_right[mask]
    if np.any(~(x > 0)):
        raise FitError("nonpositive or missing road positions in the window")
    return _linfit(trace.times[mask], np.log(x), "log-position-vs-t", window, _saturation_taint(trace, mask))


def fit_field_speed(trace: FrontTrace, theta: float, window=None) -> RateFit:
    """Slope of the ray crossing distance against t."""
    mask, window = _window_mask(trace.times, window)
    r = trace.rays[theta][mask]
    if np.any(~(r > 0)):
        raise FitError("nonpositive or missing ray positions in the window")
    return _linfit(trace.times[mask], r, "position-vs-t", window, _saturation_taint(trace, mask))


def fit_tail_exponent(x: np.ndarray, u: np.ndarray, lo: float, hi: float) -> RateFit:
    """Log-log slope of u over lo <= x <= hi."""
    m = (x >= lo) & (x <= hi)
    if np.any(u[m] <= 0):
        raise FitError("nonpositive values in tail window")
    return _linfit(np.log(x[m]), np.log(u[m]), "log-log-tail", (lo, hi), False)


def regime_exponents(alpha: float) -> dict:
    s = 1.0 + 2.0 * alpha
    return {"m0": 0.0, "critical": 3.0 / (2.0 * s), "double": 3.0 / s}


@dataclass
class RescaledView:
    l: float
    m: float
    xi: np.ndarray
    times: np.ndarray
    profiles: np.ndarray
    outside: np.ndarray

    def level_positions(self, level: float) -> np.ndarray:
        """Rightmost xi where the rescaled profile crosses ``level``, per time."""
        return np.array([_last_crossing(self.xi, p, level)[0] for p in self.profiles])


def _scale(t, l, m):
    return math.exp(l * t) * t ** (-m)


def rescaled_view(snapshots, x: np.ndarray, l: float, m: float, xi: np.ndarray) -> RescaledView:
    """Resample road profiles u(., t) at x = e^{l t} t^{-m} xi by linear interpolation.

    Points mapping outside [x[0], x[-1]] are NaN and flagged in ``outside``.
    """
    xi = np.asarray(xi, dtype=float)
    times = np.array([s.t for s in snapshots])
    if np.any(times <= 1):
        raise ValueError("rescaled view needs t > 1")
    prof = np.empty((times.size, xi.size))
    out = np.zeros_like(prof, dtype=bool)
    for i, snap in enumerate(snapshots):
        xs = _scale(snap.t, l, m) * xi
        out[i] = (xs < x[0]) | (xs > x[-1])
        prof[i] = np.interp(xs, x, snap.u)
        prof[i, out[i]] = np.nan
    return RescaledView(l, m, xi, times, prof, out)


def rescaled_view_function(density, times, l: float, m: float, xi: np.ndarray) -> RescaledView:
    """Same as :func:`rescaled_view` for a grid-free density(x, t)."""
    xi = np.asarray(xi, dtype=float)
    times = np.asarray(times, dtype=float)
    if np.any(times <= 1):
        raise ValueError("rescaled view needs t > 1")
    prof = np.array([[density(_scale(t, l, m) * s, t) for s in xi] for t in times])
    return RescaledView(l, m, xi, times, prof, np.zeros_like(prof, dtype=bool))


def level_position_function(log_density, t: float, level: float, x_lo: float, x_hi: float) -> float:
    """Position where a density decreasing in x crosses ``level`` (root in log x)."""
    g = lambda s: log_density(math.exp(s), t) - math.log(level)
    a, b = math.log(x_lo), math.log(x_hi)
    if g(a) < 0 or g(b) > 0:
        raise FitError(f"level {level} not bracketed in [{x_lo}, {x_hi}] at t={t}")
    return math.exp(optimize.brentq(g, a, b, xtol=1e-12))


def drift(positions: np.ndarray) -> float:
    """Relative change of a level position between first and last time."""
    return float(positions[-1] / positions[0] - 1.0)


def heatmap(path, snap: Snapshot, vmax: float = 1.0):
    if snap.v is None:
        raise ValueError("snapshot has no field")
    return write_pgm(path, snap.v, vmax=vmax)
