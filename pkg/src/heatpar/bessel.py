"""Integer-order modified Bessel functions I_n and the lattice heat kernels
built from them.

The evaluator uses the defining power series when the argument is small
relative to the order (x <= 2(n+1)) and a Miller-style backward recurrence
normalized by Σ I_n = e^x otherwise; forward recurrence in growing order is
unstable and is never used.  Everything is certified for 0 <= x <= x_max
to an absolute tolerance.

Two convolutions appear in this package: the one-variable time convolution
(I_m * I_n)(x) = ∫_0^x I_m(τ) I_n(x−τ) dτ implemented here, and the graph
convolution of :mod:`heatpar.series`.  They are distinct operations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, DomainError
from .series import ClosedFormKernel

_RESCALE = 1e250


@dataclass(frozen=True)
class BesselEvaluator:
    """Evaluator for I_n(x), certified on 0 <= x <= x_max to absolute ``tol``."""

    x_max: float = 40.0
    tol: float = 1e-12

    def _check(self, n: int, x: float):
        if n < 0 or int(n) != n:
            raise DomainError(f"order must be a nonnegative integer, got {n}")
        if x < 0 or x > self.x_max:
            raise DomainError(f"argument {x} outside certified range [0, {self.x_max}]")

    def value(self, n: int, x: float) -> float:
        """I_n(x) by power series for x <= 2(n+1), Miller recurrence beyond."""
        self._check(n, x)
        n = int(n)
        if x == 0.0:
            return 1.0 if n == 0 else 0.0
        if x <= 2.0 * (n + 1):
            return _power_series(n, x)
        return float(self.row(n, x)[n])

    def row(self, n_max: int, x: float) -> np.ndarray:
        """All of I_0(x) .. I_{n_max}(x) from one backward recurrence pass."""
        self._check(n_max, x)
        n_max = int(n_max)
        if x == 0.0:
            out = np.zeros(n_max + 1)
            out[0] = 1.0
            return out
        return _miller_row(n_max, x)

    def grid(self, n: int, xs: np.ndarray) -> np.ndarray:
        """Vectorized I_n over an array of arguments (power series)."""
        xs = np.asarray(xs, dtype=float)
        if np.any(xs < 0) or np.any(xs > self.x_max):
            raise DomainError("arguments outside certified range")
        if n < 0:
            raise DomainError("order must be nonnegative")
        return _power_series_grid(int(n), xs)


def _power_series(n: int, x: float) -> float:
    # all terms positive: no cancellation; geometric tail once the term
    # ratio (x/2)^2 / ((k+1)(n+k+1)) drops below one
    log_t0 = n * math.log(x / 2.0) - math.lgamma(n + 1)
    term = math.exp(log_t0)
    total = term
    q = x * x / 4.0
    for k in range(1000):
        term *= q / ((k + 1.0) * (n + k + 1.0))
        total += term
        if term <= 1e-18 * total:
            return total
    raise DomainError(f"power series for I_{n}({x}) did not converge")


def _power_series_grid(n: int, xs: np.ndarray) -> np.ndarray:
    out = np.zeros_like(xs)
    pos = xs > 0
    x = xs[pos]
    if x.size:
        term = np.exp(n * np.log(x / 2.0) - math.lgamma(n + 1))
        total = term.copy()
        q = x * x / 4.0
        for k in range(1000):
            term *= q / ((k + 1.0) * (n + k + 1.0))
            total += term
            if np.all(term <= 1e-18 * total):
                break
        else:
            raise DomainError("vectorized power series did not converge")
        out[pos] = total
    if n == 0:
        out[~pos] = 1.0
    return out


def _miller_row(n_max: int, x: float) -> np.ndarray:
    start = int(max(n_max, math.ceil(x))) + 60
    row = np.zeros(n_max + 1)
    b_hi = 0.0
    b = 1e-300
    norm = 0.0
    for k in range(start, 0, -1):
        b_lo = b_hi + (2.0 * k / x) * b
        b_hi, b = b, b_lo
        if k - 1 <= n_max:
            row[k - 1] = b
        norm += 2.0 * b if k - 1 > 0 else b
        if abs(b) > _RESCALE:
            b_hi /= _RESCALE
            b /= _RESCALE
            norm /= _RESCALE
            row /= _RESCALE
    return row * (math.exp(x) / norm)


_DEFAULT = BesselEvaluator()


def besseli(n: int, x: float, evaluator: BesselEvaluator = _DEFAULT) -> float:
    """Modified Bessel function I_n(x), n >= 0, 0 <= x <= x_max."""
    return evaluator.value(n, x)


def besseli_row(n_max: int, x: float, evaluator: BesselEvaluator = _DEFAULT) -> np.ndarray:
    return evaluator.row(n_max, x)


def besseli_grid(n: int, xs, evaluator: BesselEvaluator = _DEFAULT) -> np.ndarray:
    return evaluator.grid(n, np.asarray(xs, dtype=float))


def bessel_tail_bound(n: int, x: float) -> float:
    """Proven upper bound (x/2)^n e^x / n! for I_n(x).

    Used to certify that vertices beyond a finite window of an infinite
    lattice contribute negligibly to kernel values and mass sums.
    """
    if n < 0:
        raise DomainError("order must be nonnegative")
    if x < 0:
        raise DomainError("argument must be nonnegative")
    if x == 0.0:
        return 1.0 if n == 0 else 0.0
    return math.exp(n * math.log(x / 2.0) + x - math.lgamma(n + 1))


# ---------------------------------------------------------------------------
# closed-form lattice kernels


def kernel_Z(v: int, w: int, t: float) -> float:
    """Heat kernel on the integer line: e^{−2t} I_{|v−w|}(2t)."""
    if t < 0:
        raise DomainError("time must be nonnegative")
    return math.exp(-2.0 * t) * besseli(abs(v - w), 2.0 * t)


def kernel_halfline(v: int, w: int, t: float) -> float:
    """Heat kernel on the half-line lattice {0,1,2,...}:
    e^{−2t}(I_{|v−w|}(2t) + I_{v+w+1}(2t))."""
    if v < 0 or w < 0:
        raise DomainError("half-line vertices must be nonnegative")
    if t < 0:
        raise DomainError("time must be nonnegative")
    x = 2.0 * t
    return math.exp(-x) * (besseli(abs(v - w), x) + besseli(v + w + 1, x))


def kernel_halfline_dirichlet(x: int, y: int, t: float) -> float:
    """Dirichlet heat kernel on {0,1,2,...} with boundary vertex 0:
    e^{−2t}(I_{|x−y|}(2t) − I_{x+y}(2t)); identically zero when x or y is 0."""
    if x < 0 or y < 0:
        raise DomainError("half-line vertices must be nonnegative")
    if t < 0:
        raise DomainError("time must be nonnegative")
    a = 2.0 * t
    return math.exp(-a) * (besseli(abs(x - y), a) - besseli(x + y, a))


def _scaled_bessel_dt(m: int, x: float, row: np.ndarray) -> float:
    # d/dt [e^{−2t} I_m(2t)] at 2t = x, using I_m' = (I_{m−1} + I_{m+1})/2
    im1 = row[1] if m == 0 else row[m - 1]
    return math.exp(-x) * (im1 + row[m + 1] - 2.0 * row[m])


def z_window_kernel(offsets) -> ClosedFormKernel:
    """Closed-form integer-line kernel on a window of lattice coordinates.

    ``offsets[i]`` is the lattice coordinate of window vertex i; entries are
    e^{−2t} I_{|offsets[i]−offsets[j]|}(2t) with the exact time derivative.
    """
    offsets = np.asarray(offsets, dtype=int)
    n = offsets.size
    dist = np.abs(offsets[:, None] - offsets[None, :])
    max_order = int(dist.max())

    def matrix(t: float) -> np.ndarray:
        x = 2.0 * t
        row = besseli_row(max_order, x)
        return math.exp(-x) * row[dist]

    def evaluator(i: int, j: int, t: float) -> float:
        return kernel_Z(int(offsets[i]), int(offsets[j]), t)

    def time_derivative(i: int, j: int, t: float) -> float:
        m = int(dist[i, j])
        row = besseli_row(m + 1, 2.0 * t)
        return _scaled_bessel_dt(m, 2.0 * t, row)

    return ClosedFormKernel(evaluator, time_derivative, "integer-line", n, matrix)


def halfline_window_kernel(n: int) -> ClosedFormKernel:
    """Closed-form half-line kernel on coordinates 0..n−1 with the exact
    time derivative."""
    coords = np.arange(n)
    dist = np.abs(coords[:, None] - coords[None, :])
    refl = coords[:, None] + coords[None, :] + 1
    max_order = int(refl.max())

    def matrix(t: float) -> np.ndarray:
        x = 2.0 * t
        row = besseli_row(max_order, x)
        return math.exp(-x) * (row[dist] + row[refl])

    def evaluator(i: int, j: int, t: float) -> float:
        return kernel_halfline(i, j, t)

    def time_derivative(i: int, j: int, t: float) -> float:
        x = 2.0 * t
        row = besseli_row(int(refl[i, j]) + 1, x)
        return _scaled_bessel_dt(int(dist[i, j]), x, row) + _scaled_bessel_dt(
            int(refl[i, j]), x, row
        )

    return ClosedFormKernel(evaluator, time_derivative, "half-line", n, matrix)


def halfline_dirichlet_closed_form(n: int) -> ClosedFormKernel:
    """Closed-form Dirichlet half-line kernel on coordinates 0..n−1."""
    coords = np.arange(n)
    dist = np.abs(coords[:, None] - coords[None, :])
    refl = coords[:, None] + coords[None, :]
    max_order = int(refl.max())

    def matrix(t: float) -> np.ndarray:
        x = 2.0 * t
        row = besseli_row(max_order, x)
        return math.exp(-x) * (row[dist] - row[refl])

    def evaluator(i: int, j: int, t: float) -> float:
        return kernel_halfline_dirichlet(i, j, t)

    def time_derivative(i: int, j: int, t: float) -> float:
        x = 2.0 * t
        row = besseli_row(int(refl[i, j]) + 1, x)
        return _scaled_bessel_dt(int(dist[i, j]), x, row) - _scaled_bessel_dt(
            int(refl[i, j]), x, row
        )

    return ClosedFormKernel(evaluator, time_derivative, "half-line-dirichlet", n, matrix)


# ---------------------------------------------------------------------------
# one-variable convolution and the identities it certifies


def _conv1d(a: np.ndarray, b: np.ndarray, dx: float) -> np.ndarray:
    """Trapezoid convolution of node-sampled one-variable functions."""
    full = np.convolve(a, b)[: a.size]
    full -= 0.5 * (a * b[0] + a[0] * b)
    full *= dx
    full[0] = 0.0
    return full


def bessel_time_convolve(m: int, n: int, x: float, quad_steps: int) -> float:
    """Trapezoidal evaluation of (I_m * I_n)(x) = ∫_0^x I_m(τ) I_n(x−τ) dτ."""
    if quad_steps < 2:
        raise ContractViolation("quad_steps must be >= 2")
    if x == 0.0:
        return 0.0
    taus = np.linspace(0.0, x, quad_steps + 1)
    prod = besseli_grid(m, taus) * besseli_grid(n, taus)[::-1]
    return float((prod.sum() - 0.5 * (prod[0] + prod[-1])) * (x / quad_steps))


def watson_series(m: int, n: int, x: float, terms: int) -> tuple[float, float]:
    """Partial sum 2 Σ_{k<terms} I_{m+n+2k+1}(x) and a certified bound on the
    dropped tail.  The full sum equals (I_m * I_n)(x)."""
    if terms < 1:
        raise ContractViolation("terms must be >= 1")
    top = m + n + 2 * (terms - 1) + 1
    row = besseli_row(top, x) if x > 0 else None
    if row is None:
        return 0.0, 0.0
    total = 2.0 * sum(row[m + n + 2 * k + 1] for k in range(terms))
    # tail: 2 Σ_{k>=terms} bound(m+n+2k+1); consecutive bounds shrink by
    # (x/2)^2 / ((p+1)(p+2)) <= q < 1 once p exceeds x, giving a geometric cap
    p = m + n + 2 * terms + 1
    first = 2.0 * bessel_tail_bound(p, x)
    q = (x / 2.0) ** 2 / ((p + 1.0) * (p + 2.0))
    if q >= 1.0:
        raise ContractViolation("too few terms to certify the tail at this argument")
    return total, first / (1.0 - q)


def intro_identity_sum(
    x: int, y: int, t: float, order_cap: int, quad_steps: int
) -> float:
    """Truncated right-hand side of the alternating convolution identity

        I_{x+y}(t) = Σ_{ℓ=0}^{∞} (−1)^ℓ / 2^{ℓ+1} · (I_1^{*ℓ} * I_{x−1} * I_y)(t),

    summed through ℓ = order_cap, with each convolution evaluated on a
    trapezoid grid of quad_steps panels.  The 0-fold convolution acts as
    the identity operator.
    """
    if x < 1 or y < 0:
        raise DomainError("identity requires x >= 1 and y >= 0")
    if order_cap < 0 or quad_steps < 2:
        raise ContractViolation("order_cap must be >= 0 and quad_steps >= 2")
    if t == 0.0:
        return 0.0
    dx = t / quad_steps
    taus = np.linspace(0.0, t, quad_steps + 1)
    f1 = besseli_grid(1, taus)
    g = _conv1d(besseli_grid(x - 1, taus), besseli_grid(y, taus), dx)
    total = 0.0
    sign = 1.0
    scale = 0.5
    for _ in range(order_cap + 1):
        total += sign * scale * g[-1]
        g = _conv1d(f1, g, dx)
        sign = -sign
        scale *= 0.5
    return total


def verify_intro_identity(
    x: int, y: int, t: float, order_cap: int, quad_steps: int
) -> float:
    """Absolute residual |I_{x+y}(t) − truncated alternating sum|."""
    if t == 0.0:
        if x < 1 or y < 0:
            raise DomainError("identity requires x >= 1 and y >= 0")
        return 0.0
    return abs(besseli(x + y, t) - intro_identity_sum(x, y, t, order_cap, quad_steps))
