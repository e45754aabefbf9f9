"""Time-sampled two-variable kernels and their convolution algebra.

A kernel series stores values F(x, y; t_j) on a uniform time grid as an
array of shape (M+1, n, n).  The graph convolution

    (F1 * F2)(x, y; t) = ∫_0^t Σ_v F1(x, v; t−r) F2(v, y; r) dr

is evaluated with the trapezoidal rule at every node; the vertex sum is a
matrix product.  On series vanishing at t = 0 the discrete operation is
exactly associative, and it is second-order accurate for smooth integrands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.fft import irfft, next_fast_len, rfft

from .errors import ContractViolation, SamplingError


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_j = j·dt for j = 0..steps, with dt = t_max/steps."""

    t_max: float
    steps: int

    def __post_init__(self):
        if not (self.t_max > 0):
            raise ContractViolation(f"t_max must be positive, got {self.t_max}")
        if self.steps < 1:
            raise ContractViolation(f"steps must be >= 1, got {self.steps}")

    @property
    def dt(self) -> float:
        return self.t_max / self.steps

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, self.steps + 1)

    def refined(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid(self.t_max, self.steps * factor)


@dataclass(frozen=True)
class KernelSeries:
    """Kernel values sampled at grid nodes; shape (steps+1, n, n)."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 3 or v.shape[1] != v.shape[2]:
            raise ContractViolation(f"values must have shape (M+1, n, n), got {v.shape}")
        if v.shape[0] != self.grid.steps + 1:
            raise ContractViolation(
                f"time axis {v.shape[0]} does not match grid with {self.grid.steps + 1} nodes"
            )
        if not np.all(np.isfinite(v)):
            raise ContractViolation("kernel series contains non-finite entries")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def __sub__(self, other: "KernelSeries") -> "KernelSeries":
        _require_compatible(self, other)
        return KernelSeries(self.grid, self.values - other.values)

    def __add__(self, other: "KernelSeries") -> "KernelSeries":
        _require_compatible(self, other)
        return KernelSeries(self.grid, self.values + other.values)


@dataclass(frozen=True)
class ClosedFormKernel:
    """Analytically evaluable kernel with an exact time derivative.

    ``evaluator`` and ``time_derivative`` map (x, y, t) to a float.  The
    optional ``matrix`` / ``matrix_time_derivative`` fast paths return whole
    n×n slices at one time and must agree with the scalar forms entrywise.
    """

    evaluator: Callable[[int, int, float], float]
    time_derivative: Callable[[int, int, float], float]
    family: str
    n: int
    matrix: Callable[[float], np.ndarray] | None = None
    matrix_time_derivative: Callable[[float], np.ndarray] | None = None

    def at(self, t: float) -> np.ndarray:
        if self.matrix is not None:
            return np.asarray(self.matrix(t), dtype=float)
        out = np.empty((self.n, self.n))
        for x in range(self.n):
            for y in range(self.n):
                out[x, y] = self.evaluator(x, y, t)
        return out

    def derivative_at(self, t: float) -> np.ndarray:
        if self.matrix_time_derivative is not None:
            return np.asarray(self.matrix_time_derivative(t), dtype=float)
        out = np.empty((self.n, self.n))
        for x in range(self.n):
            for y in range(self.n):
                out[x, y] = self.time_derivative(x, y, t)
        return out


def _require_compatible(f1: KernelSeries, f2: KernelSeries):
    if f1.grid != f2.grid:
        raise ContractViolation("kernel series live on different time grids")
    if f1.n != f2.n:
        raise ContractViolation(f"vertex counts differ: {f1.n} vs {f2.n}")


def convolve_values(a: np.ndarray, b: np.ndarray, dt: float) -> np.ndarray:
    """Trapezoid time convolution of node-sampled matrix series.

    ``a`` has shape (M+1, p, q) and ``b`` shape (M+1, q, r); the result
    (M+1, p, r) holds dt·(Σ_{s=0..j} a[j−s]b[s] − ½a[j]b[0] − ½a[0]b[j]),
    which is the trapezoidal rule for the time integral with the vertex sum
    carried out exactly.  Entry j = 0 is zero.  The full convolution sum is
    evaluated through an FFT along the time axis; this reproduces the direct
    summation up to roundoff.
    """
    m1 = a.shape[0]
    if b.shape[0] != m1:
        raise ContractViolation("time axes differ")
    if a.shape[2] != b.shape[1]:
        raise ContractViolation(f"inner dimensions differ: {a.shape} vs {b.shape}")
    nfft = next_fast_len(2 * m1 - 1)
    fa = rfft(a, n=nfft, axis=0)
    fb = rfft(b, n=nfft, axis=0)
    prod = np.einsum("fpq,fqr->fpr", fa, fb)
    # trapezoid endpoint corrections stay linear, so they transform termwise
    prod -= 0.5 * np.einsum("fpq,qr->fpr", fa, b[0])
    prod -= 0.5 * np.einsum("pq,fqr->fpr", a[0], fb)
    out = irfft(prod, n=nfft, axis=0)[:m1]
    out *= dt
    out[0] = 0.0
    return out


def convolve(f1: KernelSeries, f2: KernelSeries) -> KernelSeries:
    """Graph convolution of two kernel series on the same grid."""
    _require_compatible(f1, f2)
    return KernelSeries(f1.grid, convolve_values(f1.values, f2.values, f1.grid.dt))


def l_fold_convolve(f: KernelSeries, ell: int) -> KernelSeries:
    """Iterated convolution f^{*ell}; ell = 1 returns f itself."""
    if ell < 1:
        raise ContractViolation("fold count must be >= 1 (the identity is not on the grid)")
    out = f
    for _ in range(ell - 1):
        out = convolve(out, f)
    return out


def convolution_bound(c1: float, k: int, c2: float, ell: int, n: int, t: float) -> float:
    """Upper bound C1·C2·n·k!ℓ!/(k+ℓ+1)!·t^{k+ℓ+1} for a single convolution
    of kernels bounded by C1·t^k and C2·t^ℓ on an n-vertex graph."""
    if c1 < 0 or c2 < 0 or k < 0 or ell < 0 or n < 1:
        raise ContractViolation("bound arguments out of range")
    if c1 == 0.0 or c2 == 0.0:
        return 0.0
    log_coef = math.lgamma(k + 1) + math.lgamma(ell + 1) - math.lgamma(k + ell + 2)
    return c1 * c2 * n * math.exp(log_coef) * t ** (k + ell + 1)


def fold_bound(c: float, k: int, ell: int, n: int, t: float) -> float:
    """Upper bound (C·k!)^ℓ·n^{ℓ−1}·t^{ℓk+ℓ−1}/(ℓk+ℓ−1)! for the ℓ-fold
    convolution of a kernel bounded by C·t^k; the factor n tightens to the
    support size when the kernel is supported on a vertex subset."""
    if ell < 1 or k < 0 or n < 1 or c < 0:
        raise ContractViolation("bound arguments out of range")
    if c == 0.0:
        return 0.0
    if t == 0.0:
        return c if ell == 1 and k == 0 else 0.0
    p = ell * k + ell - 1
    log_b = (
        ell * (math.log(c) + math.lgamma(k + 1))
        + (ell - 1) * math.log(n)
        + p * math.log(t)
        - math.lgamma(p + 1)
    )
    return math.exp(log_b) if log_b < 700.0 else math.inf


def sample_closed_form(kernel: ClosedFormKernel, grid: TimeGrid) -> KernelSeries:
    """Sample a closed-form kernel at every grid node."""
    vals = np.empty((grid.steps + 1, kernel.n, kernel.n))
    for j, t in enumerate(grid.nodes):
        vals[j] = kernel.at(float(t))
        if not np.all(np.isfinite(vals[j])):
            x, y = np.argwhere(~np.isfinite(vals[j]))[0]
            raise SamplingError(
                f"{kernel.family} kernel returned a non-finite value at "
                f"(x={x}, y={y}, t={t})"
            )
    return KernelSeries(grid, vals)
