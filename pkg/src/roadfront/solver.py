"""Time stepping for the road-field system.

Field v(x, y, t) on [-X, X) x [0, Y], road u(x, t) on the line y = 0:

    v_t - Laplacian v = f(v)
    u_t + (-d_xx)^alpha u = -(mu + k) u + v(x, 0, t)
    -v_y(x, 0, t) = mu u - v(x, 0, t)

Discretization: Strang splitting of the pointwise reaction around one
backward-Euler step of the whole linear part. The linear step is solved
exactly per Fourier mode in x (periodic), where it reduces to a
tridiagonal system in y bordered by one road unknown. Second differences
in x and y use the 3-point stencil; the road operator uses the alpha-th
power of the 3-point Laplacian; the exchange condition enters through a
ghost point. Every substep is order preserving, so the full step is.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import fft as sfft

from .fraclap import lattice_symbol
from .model import ModelParams

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


def fft_workers() -> int:
    """Thread count for the x-transforms, from ROADFRONT_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("ROADFRONT_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class RectGrid:
    nx: int
    ny: int
    X: float
    Y: float

    def __post_init__(self):
        if self.nx < 1 or self.nx & (self.nx - 1):
            raise ValueError(f"nx must be a power of two, got {self.nx}")
        if self.ny < 3:
            raise ValueError("need at least 3 points in y")
        if not self.X > 0 or not self.Y > 0:
            raise ValueError("extents must be positive")

    @property
    def hx(self) -> float:
        return 2.0 * self.X / self.nx

    @property
    def hy(self) -> float:
        return self.Y / (self.ny - 1)

    @property
    def x(self) -> np.ndarray:
        return -self.X + self.hx * np.arange(self.nx)

    @property
    def y(self) -> np.ndarray:
        return self.hy * np.arange(self.ny)

    @property
    def wavenumbers(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.rfftfreq(self.nx, d=self.hx)

    def index_of_x(self, x0: float) -> int:
        return int(round((x0 + self.X) / self.hx)) % self.nx

    def reduced(self) -> "RectGrid":
        """Single-column grid with the same y-axis, for x-independent data."""
        return replace(self, nx=1)


@dataclass
class SystemState:
    v: np.ndarray
    u: np.ndarray
    t: float = 0.0

    def copy(self) -> "SystemState":
        return SystemState(self.v.copy(), self.u.copy(), self.t)

    @classmethod
    def zeros(cls, grid: RectGrid) -> "SystemState":
        return cls(np.zeros((grid.ny, grid.nx)), np.zeros(grid.nx), 0.0)


@dataclass(frozen=True)
class SchemeConfig:
    dt: float = 0.05
    linearized: bool = False
    dirichlet: bool = False
    reaction: bool = True
    road_symbol: str = "lattice"
    edge_tol: float = 1e-6
    # FFT roundoff ahead of a KPP front is amplified like e^{f'(0) t};
    # values below this are zeroed in nonlinear runs (a monotone map)
    noise_floor: float = 1e-13

    def validate(self, params: ModelParams):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.reaction and self.dt * params.fprime0 > 0.1 + 1e-12:
            raise ValueError(f"dt * f'(0) = {self.dt * params.fprime0:.3g} exceeds the 0.1 accuracy guard")
        if self.noise_floor < 0:
            raise ValueError("noise_floor must be nonnegative")
        if self.road_symbol not in ("lattice", "exact"):
            raise ValueError(f"unknown road symbol {self.road_symbol!r}")


@dataclass
class Snapshot:
    t: float
    u: np.ndarray
    v: np.ndarray | None = None
    tainted: bool = False


@dataclass
class RunResult:
    grid: RectGrid
    params: ModelParams
    cfg: SchemeConfig
    snapshots: list[Snapshot] = field(default_factory=list)
    final: SystemState | None = None
    tainted: bool = False

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])


def _thomas(sub, diag, sup, rhs):
    """Batched tridiagonal solve along axis 0.

    ``sub[j]`` couples row j to j-1, ``sup[j]`` to j+1; all coefficient
    arrays broadcast against ``rhs`` of shape (n, m).
    """
    n = rhs.shape[0]
    cp = np.empty(np.broadcast_shapes(diag.shape, rhs.shape), dtype=float)
    dp = np.empty(rhs.shape, dtype=rhs.dtype)
    denom = diag[0] * np.ones(rhs.shape[1:])
    cp[0] = sup[0] / denom
    dp[0] = rhs[0] / denom
    for j in range(1, n):
        denom = diag[j] - sub[j] * cp[j - 1]
        cp[j] = sup[j] / denom if j < n - 1 else 0.0
        dp[j] = (rhs[j] - sub[j] * dp[j - 1]) / denom
    out = np.empty_like(dp)
    out[-1] = dp[-1]
    for j in range(n - 2, -1, -1):
        out[j] = dp[j] - cp[j] * out[j + 1]
    return out


class LinearStep:
    """Backward-Euler step of the linear part, factored once per (grid, dt)."""

    def __init__(self, grid: RectGrid, params: ModelParams, cfg: SchemeConfig):
        self.grid, self.params, self.cfg = grid, params, cfg
        self.workers = fft_workers()
        dt, hx, hy = cfg.dt, grid.hx, grid.hy
        xi = grid.wavenumbers
        lam_x = (2.0 / hx * np.sin(0.5 * xi * hx)) ** 2 if grid.nx > 1 else np.zeros(1)
        if cfg.road_symbol == "lattice":
            sig = lattice_symbol(xi, hx, params.alpha) if grid.nx > 1 else np.zeros(1)
        else:
            sig = np.abs(xi) ** (2 * params.alpha)
        self.du = 1.0 + dt * (params.mu + params.k + sig)
        r = dt / hy**2
        ny = grid.ny
        base = 1.0 + dt * lam_x
        diag = np.empty((ny, xi.size))
        diag[:] = base + 2.0 * r
        sub = np.full((ny, 1), -r)
        sup = np.full((ny, 1), -r)
        sub[-1] = -2.0 * r
        if cfg.dirichlet:
            sub[1] = 0.0
        else:
            self.exch = 2.0 * dt * params.mu / hy
            diag[0] = base + 2.0 * r + 2.0 * dt / hy - self.exch * dt / self.du
            sup[0] = -2.0 * r
        self.sub, self.diag, self.sup = sub, diag, sup

    def __call__(self, v: np.ndarray, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        nx, w = self.grid.nx, self.workers
        vh = sfft.rfft(v, axis=1, workers=w)
        uh = sfft.rfft(u)
        dt = self.cfg.dt
        if self.cfg.dirichlet:
            out = np.zeros_like(vh)
            out[1:] = _thomas(self.sub[1:], self.diag[1:], self.sup[1:], vh[1:])
            uh_new = uh / self.du
        else:
            rhs = vh.copy()
            rhs[0] += self.exch * uh / self.du
            out = _thomas(self.sub, self.diag, self.sup, rhs)
            uh_new = (uh + dt * out[0]) / self.du
        return sfft.irfft(out, nx, axis=1, workers=w), sfft.irfft(uh_new, nx)


class Stepper:
    def __init__(self, grid: RectGrid, params: ModelParams, cfg: SchemeConfig):
        cfg.validate(params)
        self.grid, self.params, self.cfg = grid, params, cfg
        self.linear = LinearStep(grid, params, cfg)
        self.floor = cfg.noise_floor if (cfg.reaction and not cfg.linearized) else 0.0

    def _react(self, v, tau):
        if not self.cfg.reaction:
            return v
        out = self.params.reaction.flow(v, tau, linearized=self.cfg.linearized)
        if self.cfg.dirichlet:
            out[0] = 0.0
        return out

    def __call__(self, state: SystemState) -> SystemState:
        half = 0.5 * self.cfg.dt
        v = self._react(state.v, half)
        v, u = self.linear(v, state.u)
        v = self._react(v, half)
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(u))):
            raise SolverError("non-finite values after linear solve; check dt and grid")
        if self.floor > 0:
            v = np.where(v >= self.floor, v, 0.0)
            u = np.where(u >= self.floor, u, 0.0)
        return SystemState(v, u, state.t + self.cfg.dt)


def step(state: SystemState, cfg: SchemeConfig, params: ModelParams, grid: RectGrid | None = None) -> SystemState:
    if grid is None:
        raise ValueError("step needs the grid the state lives on")
    if state.v.shape != (grid.ny, grid.nx) or state.u.shape != (grid.nx,):
        raise ValueError("state does not match grid")
    return Stepper(grid, params, cfg)(state)


def edge_violation(grid: RectGrid, state: SystemState, cfg: SchemeConfig, params: ModelParams) -> bool:
    """True when |u| or |v| exceeds the tolerance on the outer 2% of the x-range.

    Linearized runs are judged on the e^{-f'(0) t}-rescaled state, the
    only scale on which a fixed tolerance is meaningful.
    """
    if grid.nx == 1:
        return False
    m = max(1, int(np.ceil(0.01 * grid.nx)))
    scale = np.exp(-params.fprime0 * state.t) if cfg.linearized else 1.0
    edges = np.r_[0:m, grid.nx - m : grid.nx]
    worst = max(np.max(np.abs(state.u[edges])), np.max(np.abs(state.v[:, edges])))
    return bool(worst * scale > cfg.edge_tol)


def run(
    init: SystemState,
    cfg: SchemeConfig,
    params: ModelParams,
    grid: RectGrid,
    T: float,
    probes=None,
    keep_field: bool = True,
    callback=None,
) -> RunResult:
    """Advance to time T, recording a snapshot at every probe time.

    Probe times are rounded to the step grid. ``callback(state)`` is called
    at each probe, e.g. to extract level sets from a field that is not kept.
    """
    if T < 0:
        raise ValueError("T must be nonnegative")
    probes = [init.t] if probes is None else list(probes)
    if any(b < a for a, b in zip(probes, probes[1:])):
        raise ValueError("probe times must be sorted")
    stepper = Stepper(grid, params, cfg)
    n_steps = int(round((T - init.t) / cfg.dt))
    probe_steps = {}
    for p in probes:
        if p <= T + 1e-12:
            probe_steps.setdefault(int(round((p - init.t) / cfg.dt)), p)
    result = RunResult(grid, params, cfg)
    state = init.copy()

    def record(s):
        bad = edge_violation(grid, s, cfg, params)
        if bad and not result.tainted:
            log.warning("edge mass above %.1e at t=%.3f: domain too small", cfg.edge_tol, s.t)
        result.tainted |= bad
        result.snapshots.append(Snapshot(s.t, s.u.copy(), s.v.copy() if keep_field else None, bad))
        if callback is not None:
            callback(s)

    if 0 in probe_steps:
        record(state)
    for n in range(1, n_steps + 1):
        state = stepper(state)
        if n in probe_steps:
            record(state)
    result.final = state
    return result


def bump_initial(grid: RectGrid, width: float = 2.0, height: float = 1.0) -> SystemState:
    """(0, u0) with u0 the indicator of |x| <= width/2."""
    s = SystemState.zeros(grid)
    s.u[np.abs(grid.x) <= 0.5 * width + 1e-12] = height
    return s


@dataclass
class SteadyState:
    Vs: np.ndarray
    Us: float
    y: np.ndarray
    iterations: int = 0

    @property
    def Vs0(self) -> float:
        return float(self.Vs[0])


def solve_steady(
    params: ModelParams,
    grid: RectGrid,
    tol: float = 1e-10,
    tau: float = 2.0,
    max_iter: int = 200_000,
) -> SteadyState:
    """x-independent steady state by semi-implicit pseudo-time iteration.

    The reaction a v (1 - v) is split as a v^n - a v^n v^{n+1}, so each
    iterate solves an M-matrix system and the fixed point satisfies the
    discrete steady equations exactly.
    """
    a = params.fprime0
    hy, ny = grid.hy, grid.ny
    r = tau / hy**2
    du = 1.0 + tau * (params.mu + params.k)
    exch = 2.0 * tau * params.mu / hy
    v = np.ones(ny)
    u = 1.0 / params.mu
    sub = np.full((ny, 1), -r)
    sup = np.full((ny, 1), -r)
    sub[-1] = -2.0 * r
    sup[0] = -2.0 * r
    for it in range(1, max_iter + 1):
        diag = (1.0 + 2.0 * r + tau * a * v)[:, None]
        diag[0] += 2.0 * tau / hy - exch * tau / du
        rhs = (v * (1.0 + tau * a))[:, None].copy()
        rhs[0] += exch * u / du
        v_new = _thomas(sub, diag, sup, rhs)[:, 0]
        u_new = (u + tau * v_new[0]) / du
        diff = max(np.max(np.abs(v_new - v)), abs(u_new - u))
        v, u = v_new, u_new
        if diff < tol:
            return SteadyState(v, float(u), grid.y, it)
    raise SolverError(f"steady iteration did not converge in {max_iter} iterations")


def run_no_reaction(u0: np.ndarray, params: ModelParams, grid: RectGrid, until: float = 2.0, dt: float = 0.01) -> SystemState:
    """State at time ``until`` of the f = 0 system from (0, u0)."""
    u0 = np.asarray(u0, dtype=float)
    if np.any(u0 < 0):
        raise ValueError("u0 must be nonnegative")
    init = SystemState(np.zeros((grid.ny, grid.nx)), u0.copy(), 0.0)
    cfg = SchemeConfig(dt=dt, reaction=False)
    res = run(init, cfg, params, grid, until, probes=[until], keep_field=True)
    return res.final


def total_mass(state: SystemState, grid: RectGrid) -> float:
    """Discrete mass of field (trapezoid in y) plus road."""
    wy = np.full(grid.ny, grid.hy)
    wy[0] = wy[-1] = 0.5 * grid.hy
    return float(grid.hx * (np.sum(wy[:, None] * state.v) + np.sum(state.u)))


def run_dirichlet(w0: np.ndarray, params: ModelParams, grid: RectGrid, T: float, dt: float = 0.05, probes=None, keep_field=True, callback=None) -> RunResult:
    """Field problem with w = 0 on y = 0 (road removed)."""
    w0 = np.asarray(w0, dtype=float)
    if np.any(w0 < 0):
        raise ValueError("w0 must be nonnegative")
    init = SystemState(w0.copy(), np.zeros(grid.nx), 0.0)
    init.v[0] = 0.0
    cfg = SchemeConfig(dt=dt, dirichlet=True)
    return run(init, cfg, params, grid, T, probes=probes, keep_field=keep_field, callback=callback)
