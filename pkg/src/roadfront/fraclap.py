"""One-dimensional fractional Laplacian (-d^2/dx^2)^alpha.

Two independent realizations are provided:

* :func:`apply_spectral` multiplies Fourier modes by ``|xi|^(2 alpha)`` on a
  periodic grid.
* :func:`apply_quadrature` evaluates the singular integral
  ``c_alpha * PV int (u(x) - u(y)) / |x - y|^(1 + 2 alpha) dy`` directly,
  using the symmetric second difference ``2u(x) - u(x+r) - u(x-r)`` so no
  principal value is needed.

Each serves as an oracle for the other.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special


@dataclass(frozen=True)
class LineGrid:
    n: int
    h: float
    x0: float = 0.0
    boundary: str = "periodic"

    def __post_init__(self):
        if self.n < 16:
            raise ValueError(f"need n >= 16 points, got {self.n}")
        if not self.h > 0:
            raise ValueError("grid spacing must be positive")
        if self.boundary not in ("periodic", "truncated"):
            raise ValueError(f"unknown boundary {self.boundary!r}")

    @classmethod
    def centered(cls, n: int, length: float, boundary: str = "periodic") -> "LineGrid":
        h = length / n
        return cls(n=n, h=h, x0=-0.5 * length, boundary=boundary)

    @property
    def length(self) -> float:
        return self.n * self.h

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.h * np.arange(self.n)

    @property
    def wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers of the real FFT modes."""
        return 2.0 * np.pi * np.fft.rfftfreq(self.n, d=self.h)


def c_alpha(alpha: float) -> float:
    """Normalization making the singular integral have symbol |xi|^(2 alpha)."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie strictly inside (0, 1), got {alpha}")
    return 4.0**alpha * special.gamma(alpha + 0.5) / (
        math.sqrt(math.pi) * abs(special.gamma(-alpha))
    )


@dataclass(frozen=True)
class FracOpSpec:
    alpha: float
    mode: str = "spectral"

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie strictly inside (0, 1), got {self.alpha}")
        if self.mode not in ("spectral", "quadrature"):
            raise ValueError(f"unknown mode {self.mode!r}")

    @property
    def cAlpha(self) -> float:
        return c_alpha(self.alpha)


def _is_pow2(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def lattice_symbol(xi, h: float, alpha: float):
    """Symbol of the alpha-th power of the 3-point discrete Laplacian.

    Tends to |xi|^(2 alpha) as h -> 0. Unlike the exact symbol, its
    resolvents have nonnegative kernels on the grid, which the time
    stepper relies on for a monotone scheme.
    """
    s = (2.0 / h) * np.abs(np.sin(0.5 * np.asarray(xi) * h))
    return s ** (2.0 * alpha)


def apply_spectral(spec: FracOpSpec, grid: LineGrid, u) -> np.ndarray:
    if not _is_pow2(grid.n):
        raise ValueError(f"spectral path needs a power-of-two grid, got n={grid.n}")
    u = np.asarray(u, dtype=float)
    xi = grid.wavenumbers
    return np.fft.irfft(np.fft.rfft(u, axis=-1) * xi ** (2.0 * spec.alpha), grid.n, axis=-1)


def _quadrature_weights(n: int, alpha: float) -> tuple[np.ndarray, float]:
    """Weights w_m (m = 1..n) on the second differences D_m, in units of h.

    D(r) is written as r^2 E(r) with E interpolated linearly between the
    nodes r = m h, integrated exactly against r^(1 - 2 alpha). On [0, h]
    E is extrapolated linearly from E(h), E(2h). Beyond r = n h the
    function is taken as zero, which closes the tail analytically.
    """
    p = 1.0 - 2.0 * alpha

    def m0(lo, hi):
        return (hi ** (p + 1) - lo ** (p + 1)) / (p + 1)

    def m1(lo, hi):
        return (hi ** (p + 2) - lo ** (p + 2)) / (p + 2)

    coef = np.zeros(n + 2)
    core0 = m0(0.0, 1.0) - m1(0.0, 1.0)
    core1 = m1(0.0, 1.0)
    coef[1] += core1 + 2.0 * core0
    coef[2] -= core0
    lo = np.arange(1, n, dtype=float)
    hi = lo + 1.0
    coef[1:n] += hi * m0(lo, hi) - m1(lo, hi)
    coef[2 : n + 1] += m1(lo, hi) - lo * m0(lo, hi)
    w = coef[1 : n + 1] / np.arange(1, n + 1, dtype=float) ** 2
    tail = float(n) ** (-2.0 * alpha) / (2.0 * alpha)
    return w, tail


def apply_quadrature(spec: FracOpSpec, grid: LineGrid, u, edge_tol: float = 1e-6) -> np.ndarray:
    """Direct singular-integral evaluation; u is assumed zero off the grid."""
    u = np.asarray(u, dtype=float)
    n = grid.n
    edge = max(1, n // 20)
    scale = max(np.max(np.abs(u)), 1e-300)
    if np.max(np.abs(u[..., :edge])) > edge_tol * scale or np.max(np.abs(u[..., -edge:])) > edge_tol * scale:
        warnings.warn("input does not decay at the grid edges; truncation error expected", RuntimeWarning, stacklevel=2)
    w, tail = _quadrature_weights(n, spec.alpha)
    # linear convolution via FFT; length >= 3n avoids wrap-around
    nfft = 1 << (3 * n - 1).bit_length()
    ker = np.zeros(nfft)
    ker[1 : n + 1] = w
    ker[nfft - n :] = w[::-1]
    conv = np.fft.irfft(np.fft.rfft(u, nfft, axis=-1) * np.fft.rfft(ker), nfft, axis=-1)[..., :n]
    total = 2.0 * u * (w.sum() + tail) - conv
    return spec.cAlpha * grid.h ** (-2.0 * spec.alpha) * total


def apply(spec: FracOpSpec, grid: LineGrid, u) -> np.ndarray:
    if spec.mode == "spectral":
        return apply_spectral(spec, grid, u)
    return apply_quadrature(spec, grid, u)
