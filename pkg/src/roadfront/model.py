"""Model parameters, KPP reaction term and the derived scalar constants."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ReactionSpec:
    """Logistic nonlinearity f(v) = a v (1 - v), evaluated as-is outside [0, 1]."""

    rate: float = 1.0

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError(f"reaction rate must be positive, got {self.rate}")

    @property
    def fprime0(self) -> float:
        return self.rate

    def __call__(self, v):
        return self.rate * v * (1.0 - v)

    def derivative(self, v):
        return self.rate * (1.0 - 2.0 * v)

    def second_derivative(self, v=0.0):
        return -2.0 * self.rate * np.ones_like(np.asarray(v, dtype=float))

    def flow(self, v, tau: float, linearized: bool = False):
        """Exact time-``tau`` flow of v' = f(v) (or v' = f'(0) v)."""
        growth = math.exp(self.rate * tau)
        if linearized:
            return v * growth
        return v * growth / (1.0 + v * (growth - 1.0))


def reaction_eval(spec: ReactionSpec, v):
    return spec(v)


@dataclass(frozen=True)
class ModelParams:
    alpha: float = 0.5
    mu: float = 1.0
    k: float = 0.0
    reaction: ReactionSpec = field(default_factory=ReactionSpec)

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.k < 0:
            raise ValueError(f"k must be nonnegative, got {self.k}")

    @property
    def fprime0(self) -> float:
        return self.reaction.fprime0


@dataclass(frozen=True)
class DerivedConstants:
    cK: float
    gammaStar: float
    r0: float


class BracketError(RuntimeError):
    pass


def _r0_residual(r, alpha, rhs):
    return r * r - r ** (2 * alpha) - rhs


def r0_bracket(params: ModelParams) -> tuple[float, float]:
    """Interval [lo, hi] holding the root; hi is doubled until the residual turns positive."""
    rhs = params.fprime0 + params.k
    lo, hi = max(1.0, math.sqrt(rhs)), rhs + 2.0
    for _ in range(200):
        if _r0_residual(hi, params.alpha, rhs) >= 0:
            return lo, hi
        lo, hi = hi, 2.0 * hi
    raise BracketError("could not bracket r0")


def solve_r0(params: ModelParams, tol: float = 1e-12) -> float:
    """Root of r^2 = r^(2 alpha) + f'(0) + k by bisection.

    The residual is strictly increasing for r >= 1 and nonpositive at
    max(1, sqrt(f'(0)+k)), so the bracket holds exactly one root.
    """
    rhs = params.fprime0 + params.k
    lo, hi = r0_bracket(params)
    flo = _r0_residual(lo, params.alpha, rhs)
    fhi = _r0_residual(hi, params.alpha, rhs)
    if flo > 0 or fhi < 0:
        raise BracketError(f"r0 bracket [{lo}, {hi}] does not straddle a root")
    tol = tol * max(1.0, hi)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _r0_residual(mid, params.alpha, rhs) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def derive_constants(params: ModelParams) -> DerivedConstants:
    a = params.fprime0
    r0 = solve_r0(params)
    if not r0 > math.sqrt(a):
        raise BracketError(f"r0={r0} does not exceed sqrt(f'(0))={math.sqrt(a)}")
    return DerivedConstants(
        cK=2.0 * math.sqrt(a),
        gammaStar=a / (1.0 + 2.0 * params.alpha),
        r0=r0,
    )
