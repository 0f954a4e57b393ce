"""Explicit subsolutions with algebraic tails, and numerical checks of their inequalities.

The profile phi solves -gamma x phi' <= g(phi) with g(s) = f(s) - (pi/L)^2 s.
It equals |x|^-sigma - A |x|^-(sigma+eps) far out, is flat near the origin,
and a quintic bridge joins the two pieces with C^2 regularity. The strip pair

    V(xi, y) = phi(xi) sin(pi y / L + h)   (0 <= y < L (1 - h/pi)),   U(xi) = C phi(xi)

moved by xi = x B e^{-gamma t} is a subsolution of the road-field system.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .fraclap import FracOpSpec, LineGrid, apply_quadrature
from .model import ModelParams


class ConstructionError(RuntimeError):
    pass


@dataclass(frozen=True)
class GSpec:
    """g(s) = a s (1 - s) - kappa s with kappa = (pi/L)^2."""

    rate: float
    kappa: float

    def __call__(self, s):
        return self.rate * s * (1.0 - s) - self.kappa * s

    @property
    def gprime0(self) -> float:
        return self.rate - self.kappa

    @property
    def gsecond0(self) -> float:
        return -2.0 * self.rate

    def delta(self) -> float:
        """Threshold below which g is increasing and g(s) >= g'(0)s + (g''(0)-1)s^2.

        The second bound holds for every s for this g, so only monotonicity binds.
        """
        return 0.99 * min(1.0, self.gprime0 / (2.0 * self.rate))


@dataclass
class SubsolutionPhi:
    sigma: float
    epsilon: float
    A: float
    A1: float
    A2: float
    A3: float
    chi: np.ndarray  # quintic coefficients in s = |x| - A1, lowest order first
    beta: float
    gSpec: GSpec
    gamma: float
    delta: float

    @property
    def gamma_tilde(self) -> float:
        return self.gSpec.gprime0 / self.sigma

    @property
    def plateau(self) -> float:
        return self.A1 ** (-self.sigma) - self.A * self.A1 ** (-self.sigma - self.epsilon)

    def outer(self, r, d: int = 0):
        """d-th derivative of r^-sigma - A r^-(sigma+eps), r > 0."""
        s, e, A = self.sigma, self.epsilon, self.A
        if d == 0:
            return r ** (-s) - A * r ** (-s - e)
        if d == 1:
            return -s * r ** (-s - 1) + A * (s + e) * r ** (-s - e - 1)
        if d == 2:
            return s * (s + 1) * r ** (-s - 2) - A * (s + e) * (s + e + 1) * r ** (-s - e - 2)
        raise ValueError("only d <= 2")

    def _bridge(self, r, d):
        poly = np.polynomial.Polynomial(self.chi)
        return poly.deriv(d)(r - self.A1) if d else poly(r - self.A1)

    def __call__(self, x, d: int = 0):
        """phi (d=0), phi' or phi'' evaluated at x (derivatives in x, not |x|)."""
        x = np.asarray(x, dtype=float)
        r = np.abs(x)
        out = np.zeros_like(r) if d else np.full_like(r, self.plateau)
        mid = (r > self.A1) & (r < self.A2)
        far = r >= self.A2
        out[mid] = self._bridge(r[mid], d)
        rf = r[far]
        out[far] = self.outer(rf, d)
        if d == 1:
            out *= np.sign(x)
        return out

    def residual(self, x):
        """-gamma x phi' - g(phi)."""
        return -self.gamma * x * self(x, 1) - self.gSpec(self(x))


def _quintic(A1, A2, left, right):
    """Coefficients in s = r - A1 of the quintic with (value, d1, d2) = left at A1, right at A2."""
    d = A2 - A1
    rows, rhs = [], []
    for point, vals in ((0.0, left), (d, right)):
        for k in range(3):
            row = [0.0] * 6
            for n in range(k, 6):
                row[n] = math.factorial(n) / math.factorial(n - k) * point ** (n - k)
            rows.append(row)
            rhs.append(vals[k])
    return np.linalg.solve(np.array(rows), np.array(rhs))


def _bridge_ok(coef, A1, A2, n=10_000):
    s = np.linspace(0.0, A2 - A1, n)
    p = np.polynomial.Polynomial(coef)
    d1, d2 = p.deriv(1)(s), p.deriv(2)(s)
    tol = 1e-12 * max(1.0, np.max(np.abs(d2)))
    return bool(np.all(d1 <= tol) and np.all(d2 <= tol) and np.all(p(s) >= 0))


def build_phi(params: ModelParams, gamma: float, L: float, epsilon: float | None = None, max_shrink: int = 40) -> SubsolutionPhi:
    sigma = 1.0 + 2.0 * params.alpha
    eps = min(0.5, 0.5 * sigma) if epsilon is None else epsilon
    if not 0.0 < eps < sigma:
        raise ConstructionError(f"epsilon must lie in (0, sigma={sigma}), got {eps}")
    g = GSpec(params.fprime0, (math.pi / L) ** 2)
    if g.gprime0 <= 0:
        raise ConstructionError(f"strip width L={L} too small: g'(0) <= 0")
    if not 0.0 < gamma <= g.gprime0 / sigma:
        raise ConstructionError(f"gamma={gamma} outside (0, g'(0)/sigma = {g.gprime0 / sigma}]")
    delta = g.delta()

    # smallest power of two meeting both largeness conditions
    need = 1.0 - g.gsecond0
    A = max(1.0, delta ** (-eps / sigma))
    while need * A ** (-(sigma - eps) / eps) > 0.5 * A * gamma * eps:
        A *= 2.0
        if A > 2.0**50:
            raise ConstructionError("no admissible amplitude A below 2^50")
    beta = 0.5 * A * gamma * eps

    A1 = A ** (1 / eps) * (1 + eps / sigma) ** (1 / eps)
    A3 = A1 * (1 + eps / (sigma + 1)) ** (1 / eps)
    tmp = SubsolutionPhi(sigma, eps, A, A1, A1, A3, np.zeros(6), beta, g, gamma, delta)
    frac = 0.5
    for _ in range(max_shrink):
        A2 = A1 + frac * (A3 - A1)
        right = [tmp.outer(A2, k) for k in range(3)]
        coef = _quintic(A1, A2, (tmp.plateau, 0.0, 0.0), right)
        if _bridge_ok(coef, A1, A2):
            return SubsolutionPhi(sigma, eps, A, A1, A2, A3, coef, beta, g, gamma, delta)
        frac *= 0.5
    raise ConstructionError("could not find a concave nonincreasing bridge")


@dataclass
class PhiReport:
    passed: bool
    outer_margin: float  # max of (residual + beta v_{sigma+eps}) for |x| >= A2; must be <= 0
    bridge_max: float  # max residual on [A1, A2]; must be < 0
    plateau_value: float  # -g(phi(A1)); must be <= 0
    D_second: float  # max of -phi'' |x|^{sigma+eps} for |x| >= A2
    D_second_analytic: float
    D_frac: float  # max of (-d_xx)^alpha phi / phi on the fractional grid
    c2_jump: float  # one-sided second-derivative mismatch at A1 and A2
    monotone: bool
    grid_max: float
    frac_grid: dict = field(default_factory=dict)


def log_grid(lo, hi, n):
    return np.geomspace(lo, hi, n)


def phi_frac_laplacian(phi: SubsolutionPhi, alpha: float, R: float | None = None, n: int = 1 << 16):
    """(-d_xx)^alpha phi on a uniform grid over [-R, R) by quadrature.

    phi is treated as zero beyond R, which can only increase the result,
    so ratios computed from it are conservative upper bounds.
    """
    R = R if R is not None else 200.0 * phi.A2
    grid = LineGrid.centered(n, 2.0 * R, boundary="truncated")
    vals = phi(grid.x)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        lap = apply_quadrature(FracOpSpec(alpha, "quadrature"), grid, vals)
    return grid, vals, lap


def verify_phi(phi: SubsolutionPhi, alpha: float, x_max: float = 1e6, n: int = 20_000) -> PhiReport:
    se = phi.sigma + phi.epsilon
    x_out = log_grid(phi.A2, x_max, n)
    res = phi.residual(x_out)
    outer_margin = float(np.max((res + phi.beta * x_out ** (-se)) * x_out**se))

    x_mid = np.linspace(phi.A1, phi.A2, 2001)[1:-1]
    bridge_max = float(np.max(phi.residual(x_mid)))
    plateau_value = float(-phi.gSpec(phi.plateau))

    # centered differences with a step relative to |x|
    hstep = 1e-4 * x_out
    d2 = (phi(x_out + hstep) - 2 * phi(x_out) + phi(x_out - hstep)) / hstep**2
    D_second = float(np.max(-d2 * x_out**se))
    D_an = phi.A * se * (se + 1) / phi.A2**2

    grid, vals, lap = phi_frac_laplacian(phi, alpha)
    inner = np.abs(grid.x) <= 0.5 * grid.length * 0.5
    D_frac = float(np.max(lap[inner] / vals[inner]))

    jumps = []
    for a in (phi.A1, phi.A2):
        hh = 1e-3 * a
        left = (phi(a) - 2 * phi(a - hh) + phi(a - 2 * hh)) / hh**2
        right = (phi(a + 2 * hh) - 2 * phi(a + hh) + phi(a)) / hh**2
        jumps.append(abs(left - right))
    xs = np.unique(np.concatenate([np.linspace(0, phi.A2 * 2, 4001), x_out]))
    monotone = bool(np.all(np.diff(phi(xs)) <= 1e-15))

    passed = outer_margin <= 0 and bridge_max < 0 and plateau_value <= 0 and D_frac > 0 and monotone
    return PhiReport(
        passed, outer_margin, bridge_max, plateau_value, D_second, D_an, D_frac, float(max(jumps)), monotone, x_max,
        {"R": float(-grid.x0), "n": grid.n, "h": grid.h},
    )


@dataclass
class StripSubsolution:
    params: ModelParams
    gamma: float
    L: float
    L_min: float
    h: float
    C: float
    phi: SubsolutionPhi
    B: float = math.nan

    @property
    def y_top(self) -> float:
        return self.L * (1.0 - self.h / math.pi)

    def profile_y(self, y):
        y = np.asarray(y, dtype=float)
        out = np.sin(math.pi * y / self.L + self.h)
        return np.where((y >= 0) & (y < self.y_top), out, 0.0)

    def underV(self, xi, y):
        """V(xi, y) on the outer product of xi (columns) and y (rows)."""
        return self.profile_y(np.asarray(y))[:, None] * self.phi(np.asarray(xi))[None, :]

    def underU(self, xi):
        return self.C * self.phi(xi)

    def boundary_value(self, xi):
        """-dV/dy(xi, 0) - mu U(xi) + V(xi, 0)."""
        p = self.params
        coef = -(math.pi / self.L) * math.cos(self.h) - self.C * p.mu + math.sin(self.h)
        return coef * self.phi(xi)

    def b(self, t):
        return self.B * np.exp(-self.gamma * np.asarray(t, dtype=float))


def strip_width_bound(params: ModelParams, gamma: float) -> float:
    gs = params.fprime0 / (1.0 + 2.0 * params.alpha)
    if not 0 < gamma < gs:
        raise ConstructionError(f"gamma={gamma} must lie in (0, {gs})")
    return math.pi / math.sqrt((1.0 + 2.0 * params.alpha) * (gs - gamma))


def build_strip_subsolution(params: ModelParams, gamma: float, epsilon: float | None = None, width_factor: float = 1.2) -> StripSubsolution:
    L_min = strip_width_bound(params, gamma)
    L = width_factor * L_min
    h = 0.5 * math.atan(math.pi / L)
    phi = build_phi(params, gamma, L, epsilon)
    # the boundary inequality bounds C from below by a negative number once
    # tan(h) < pi/L, so only the road inequality limits C
    C = 0.5 * math.sin(h) / (phi.gSpec.gprime0 + params.mu + params.k)
    lower = (math.sin(h) - (math.pi / L) * math.cos(h)) / params.mu
    if not lower < C:
        raise ConstructionError("no admissible road amplitude C")
    strip = StripSubsolution(params, gamma, L, L_min, h, C, phi)
    return strip


@dataclass
class MovingReport:
    beta_field: float
    beta_road: float
    D_field: float
    D_road: float
    B: float
    B_bound: float
    L1_max: float
    L2_max: float
    boundary_max: float
    passed: bool


def moving_constants(strip: StripSubsolution, xi_max: float = 1e6, n: int = 20_000) -> MovingReport:
    """Measure the margins of the stationary strip pair, set B at half its bound,
    and evaluate both moving-frame operator inequalities at b = 0 and b = B.
    """
    p, phi = strip.params, strip.phi
    alpha = p.alpha
    se = phi.sigma + phi.epsilon
    xi = np.concatenate([np.linspace(0.0, 2 * phi.A2, 4001), log_grid(2 * phi.A2, xi_max, n)[1:]])
    w = 1.0 + xi**se
    beta_field = float(np.min(-phi.residual(xi) * w))
    d2 = phi(xi, 2)
    D_field = max(float(np.max(-d2 * w)), 1e-300)

    grid, vals, lap = phi_frac_laplacian(phi, alpha)
    inner = np.abs(grid.x) <= 0.25 * grid.length
    D_road = max(float(np.max(lap[inner] / vals[inner])), 1e-300)
    U = strip.underU(xi)
    road_res = strip.C * (-phi.gamma * xi * phi(xi, 1) + (p.mu + p.k) * phi(xi)) - math.sin(strip.h) * phi(xi)
    beta_road = float(np.min(-road_res / U))

    B_bound = min(math.sqrt(beta_field / D_field), (beta_road / D_road) ** (1.0 / (2.0 * alpha)))
    B = 0.5 * B_bound
    strip.B = B

    # field operator over the support in y
    ys = np.linspace(0.0, strip.y_top, 200, endpoint=False)[1:]
    sy = strip.profile_y(ys)[:, None]
    Vphi = phi(xi)[None, :]
    L1_max = -np.inf
    for bb in (0.0, B):
        L1 = (-phi.gamma * xi * phi(xi, 1) - bb**2 * d2)[None, :] * sy + (math.pi / strip.L) ** 2 * Vphi * sy
        L1 -= p.reaction(Vphi * sy)
        L1_max = max(L1_max, float(np.max(L1)))

    x_in = grid.x[inner]
    phi_in = vals[inner]
    L2_max = -np.inf
    for bb in (0.0, B):
        L2 = strip.C * (-phi.gamma * x_in * phi(x_in, 1) + bb ** (2 * alpha) * lap[inner] + (p.mu + p.k) * phi_in)
        L2 -= math.sin(strip.h) * phi_in
        L2_max = max(L2_max, float(np.max(L2)))
    boundary_max = float(np.max(strip.boundary_value(xi)))
    passed = beta_field > 0 and beta_road > 0 and L1_max <= 0 and L2_max <= 0 and boundary_max <= 0
    return MovingReport(beta_field, beta_road, D_field, D_road, B, B_bound, L1_max, L2_max, boundary_max, passed)


def envelope_amplitude(state, grid, alpha: float, y_max: float) -> float:
    """Largest a with u, v >= a / (1 + |x|^{1+2 alpha}) on the grid, field rows y <= y_max."""
    w = 1.0 + np.abs(grid.x) ** (1.0 + 2.0 * alpha)
    rows = grid.y <= y_max + 1e-12
    return float(min(np.min(state.u * w), np.min(state.v[rows] * w[None, :])))


def fit_eps0(snap, grid, strip: StripSubsolution, factor: float = 0.9) -> float:
    """factor * min over the grid of (solution / subsolution) at the snapshot time, clipped to (0, 1)."""
    xi = grid.x * float(strip.b(snap.t))
    U = strip.underU(xi)
    V = strip.underV(xi, grid.y)
    ratios = [np.min(snap.u / U)]
    pos = V > 0
    if np.any(pos):
        ratios.append(np.min(snap.v[pos] / V[pos]))
    r = factor * float(min(ratios))
    return float(min(max(r, 0.0), 1.0 - 1e-12))


@dataclass
class BelowReport:
    eps0: float
    worst_u: float
    worst_v: float
    times: list
    passed: bool


def check_below(snapshots, grid, strip: StripSubsolution, eps0: float) -> BelowReport:
    """Worst value of solution - eps0 * subsolution over all probes and nodes (should be >= 0)."""
    if not 0.0 <= eps0 < 1.0:
        raise ValueError("eps0 must lie in [0, 1)")
    worst_u, worst_v = math.inf, math.inf
    times = []
    for snap in snapshots:
        xi = grid.x * float(strip.b(snap.t))
        worst_u = min(worst_u, float(np.min(snap.u - eps0 * strip.underU(xi))))
        if snap.v is not None:
            worst_v = min(worst_v, float(np.min(snap.v - eps0 * strip.underV(xi, grid.y))))
        times.append(snap.t)
    return BelowReport(eps0, worst_u, worst_v, times, worst_u >= 0 and worst_v >= 0)
