"""Graphs embedded in an open interval, averaged against the interval's
Dirichlet sine-series heat kernel.

Each vertex sits at a position in (0, L) and owns the Voronoi cell of
points nearer to it than to any other vertex.  A per-cell bump function
with unit plateau and a calibrated overshoot (so that ∫η² equals the cell
measure) averages the interval kernel into a graph parametrix:

    H0(v1, v2; t) = (μ_{v1} μ_{v2})^{−1/2} ∫∫ K(x, y; t) η_{v1}(x) η_{v2}(y) dy dx.

The sine series makes the double integral separable, so one 1-D quadrature
per (mode, vertex) suffices, and the time derivative is available termwise
with no numerical differentiation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import ContractViolation, DomainError, NumericalBudgetError, ResolutionError
from .graph import WeightedGraph
from .parametrix import (
    Parametrix,
    algebraic_heat_image,
    assemble_heat_kernel,
    neumann_series,
)
from .series import ClosedFormKernel, KernelSeries, TimeGrid


@dataclass(frozen=True)
class IntervalDomain:
    """The interval (0, length) with a truncated sine-series heat kernel."""

    length: float
    n_modes: int
    quad_points: int = 1600

    def __post_init__(self):
        if self.length <= 0:
            raise ContractViolation("interval length must be positive")
        if self.n_modes < 1:
            raise ContractViolation("need at least one series mode")
        if self.quad_points < 16:
            raise ContractViolation("quadrature resolution too small")

    def rates(self) -> np.ndarray:
        """Decay rates (nπ/L)² for modes n = 1..n_modes."""
        n = np.arange(1, self.n_modes + 1)
        return (n * math.pi / self.length) ** 2


def modes_for_time(length: float, t_min: float, tol: float = 1e-10) -> int:
    """Smallest mode count whose dropped sine-series tail at t_min is
    certified below ``tol``."""
    if t_min <= 0 or length <= 0:
        raise ContractViolation("length and t_min must be positive")
    alpha = (math.pi / length) ** 2 * t_min
    n = 8
    while n < 200_000:
        if series_tail_bound(length, t_min, n) < tol:
            # back off to the smallest sufficient count
            lo = n // 2
            while series_tail_bound(length, t_min, lo) >= tol:
                lo += 1
            return lo
        n *= 2
    raise ContractViolation(f"no feasible mode count for t_min={t_min}")


def series_tail_bound(length: float, t: float, n_modes: int) -> float:
    """Bound Σ_{n>N} (2/L) e^{−(nπ/L)² t} by a geometric comparison."""
    alpha = (math.pi / length) ** 2 * t
    lead = (2.0 / length) * math.exp(-alpha * (n_modes + 1) ** 2)
    ratio = math.exp(-alpha * (2 * n_modes + 3))
    return lead / (1.0 - ratio)


def interval_heat_kernel(d: IntervalDomain, x: float, y: float, t: float) -> float:
    """Dirichlet heat kernel of the interval, truncated to n_modes terms."""
    if not (0 < x < d.length) or not (0 < y < d.length):
        raise DomainError("points must lie strictly inside the interval")
    n = np.arange(1, d.n_modes + 1)
    w = n * math.pi / d.length
    return float(
        (2.0 / d.length) * np.sum(np.sin(w * x) * np.sin(w * y) * np.exp(-(w**2) * t))
    )


@dataclass(frozen=True)
class VoronoiCell1D:
    """Interval of points nearer to ``position`` than to any other vertex."""

    vertex: int
    position: float
    a: float
    b: float
    delta: float

    @property
    def measure(self) -> float:
        return self.b - self.a


def build_voronoi(positions, length: float, delta_fraction: float) -> list[VoronoiCell1D]:
    """Cells bounded by consecutive midpoints (and by the interval ends),
    with a uniform collar width delta = delta_fraction × (smallest cell
    half-width)."""
    pos = [float(p) for p in positions]
    if len(set(pos)) != len(pos) or any(
        pos[i] >= pos[i + 1] for i in range(len(pos) - 1)
    ):
        raise ContractViolation("positions must be strictly increasing")
    if not pos or pos[0] <= 0.0 or pos[-1] >= length:
        raise ContractViolation("positions must lie strictly inside (0, length)")
    if not (0.0 < delta_fraction < 0.5):
        raise ContractViolation("delta_fraction must lie in (0, 1/2)")
    bounds = [0.0]
    for i in range(len(pos) - 1):
        bounds.append(0.5 * (pos[i] + pos[i + 1]))
    bounds.append(length)
    delta = delta_fraction * min(b - a for a, b in zip(bounds, bounds[1:])) / 2.0
    return [
        VoronoiCell1D(vertex=i, position=pos[i], a=bounds[i], b=bounds[i + 1], delta=delta)
        for i in range(len(pos))
    ]


def smoothstep(u: np.ndarray) -> np.ndarray:
    """Quintic ramp 10u³ − 15u⁴ + 6u⁵ with zero first and second derivatives
    at both ends, so pieces glue to a C² bump."""
    return u * u * u * (10.0 + u * (-15.0 + 6.0 * u))


@dataclass(frozen=True)
class BumpFamily:
    """Per-cell bump functions with unit plateau and calibrated overshoot.

    Within each cell, the bump vanishes within delta/2 of the cell
    boundary, equals one at distance delta or more, and on the band in
    between rises from zero to the amplitude and settles back to one, with
    the amplitude tuned so ∫η² equals the cell measure.
    """

    cells: tuple[VoronoiCell1D, ...]
    amplitudes: tuple[float, ...]

    def evaluate(self, v: int, xs) -> np.ndarray:
        cell = self.cells[v]
        amp = self.amplitudes[v]
        xs = np.asarray(xs, dtype=float)
        d = np.minimum(xs - cell.a, cell.b - xs)
        delta = cell.delta
        out = np.zeros_like(xs)
        plateau = d >= delta
        out[plateau] = 1.0
        band = (d >= delta / 2.0) & (d < delta)
        s = 2.0 * (delta - d[band]) / delta
        rise = s <= 0.5
        vals = np.empty_like(s)
        vals[rise] = 1.0 + (amp - 1.0) * smoothstep(2.0 * s[rise])
        vals[~rise] = amp * (1.0 - smoothstep(2.0 * s[~rise] - 1.0))
        out[band] = vals
        return out


def _cell_quadrature(cell: VoronoiCell1D, quad_points: int):
    """Composite Simpson nodes/weights over the five smooth pieces of the
    bump's support, so junctions never sit inside a panel."""
    a, b, d = cell.a, cell.b, cell.delta
    cuts = [a + d / 2, a + 3 * d / 4, a + d, b - d, b - 3 * d / 4, b - d / 2]
    floor = max(4, 2 * (quad_points // 32))  # short band pieces carry the curvature
    xs_all, ws_all = [], []
    for lo, hi in zip(cuts, cuts[1:]):
        if hi <= lo:
            continue
        panels = max(floor, 2 * math.ceil(quad_points * (hi - lo) / (2.0 * cell.measure)))
        xs = np.linspace(lo, hi, panels + 1)
        ws = np.ones(panels + 1)
        ws[1:-1:2] = 4.0
        ws[2:-1:2] = 2.0
        ws *= (hi - lo) / panels / 3.0
        xs_all.append(xs)
        ws_all.append(ws)
    return np.concatenate(xs_all), np.concatenate(ws_all)


def build_bumps(cells: list[VoronoiCell1D], quad_points: int = 1600) -> BumpFamily:
    """Calibrate each cell's overshoot amplitude so that ∫η² = cell measure.

    The plateau alone integrates to less than the measure and the band
    contribution grows monotonically with the amplitude, so a bracketed
    root always exists for admissible collars.
    """
    amps = []
    for cell in cells:
        xs, ws = _cell_quadrature(cell, quad_points)

        def defect(amp: float) -> float:
            fam = BumpFamily(cells=(cell,), amplitudes=(amp,))
            eta = fam.evaluate(0, xs)
            return float(ws @ (eta * eta)) - cell.measure

        lo, hi = 1.0, 4.0
        tries = 0
        while defect(hi) < 0.0:
            hi *= 2.0
            tries += 1
            if tries > 40:
                raise NumericalBudgetError(
                    "could not bracket the bump amplitude; use a smaller delta_fraction"
                )
        if defect(lo) > 0.0:
            raise NumericalBudgetError(
                "plateau already exceeds the cell measure; use a smaller delta_fraction"
            )
        amps.append(float(brentq(defect, lo, hi, xtol=1e-14, rtol=1e-15)))
    return BumpFamily(cells=tuple(cells), amplitudes=tuple(amps))


def _mode_overlaps(
    d: IntervalDomain, cells, bumps: BumpFamily, quad_points: int
) -> np.ndarray:
    """s[m, v] = ∫ sin((m+1)πx/L) η_v(x) dx over each cell."""
    freqs = np.arange(1, d.n_modes + 1) * math.pi / d.length
    out = np.empty((d.n_modes, len(cells)))
    for v, cell in enumerate(cells):
        xs, ws = _cell_quadrature(cell, quad_points)
        weighted = ws * bumps.evaluate(v, xs)
        out[:, v] = np.sin(np.outer(freqs, xs)) @ weighted
    return out


def averaged_parametrix(
    d: IntervalDomain,
    cells: list[VoronoiCell1D],
    bumps: BumpFamily,
    grid: TimeGrid,
    graph: WeightedGraph,
    normalization: str = "symmetric",
    quad_budget: float = 1e-6,
) -> Parametrix:
    """Average the interval kernel against the bump family to obtain an
    order-zero parametrix for the embedded graph.

    ``normalization`` selects the symmetric (μ_{v1} μ_{v2})^{−1/2} scaling
    or the first-variable 1/μ_{v1} scaling; both are valid parametrices and
    must assemble to the same heat kernel.  A Richardson comparison between
    the requested quadrature resolution and its refinement guards the mode
    overlaps; if the estimated error exceeds ``quad_budget`` the resolution
    is rejected.
    """
    if len(cells) != graph.n:
        raise ContractViolation("graph size does not match the cell count")
    if normalization not in ("symmetric", "first"):
        raise ContractViolation("normalization must be 'symmetric' or 'first'")
    mu = np.array([c.measure for c in cells])
    s = _mode_overlaps(d, cells, bumps, d.quad_points)
    s_fine = _mode_overlaps(d, cells, bumps, 2 * d.quad_points)
    rates = d.rates()
    weights0 = (2.0 / d.length) * np.exp(-rates * grid.dt)
    probe = np.abs(
        (s * weights0[:, None]).T @ s - (s_fine * weights0[:, None]).T @ s_fine
    ).max() / float(np.sqrt(np.outer(mu, mu)).min())
    if probe > quad_budget:
        raise ResolutionError(
            f"quadrature self-estimate {probe:.2e} exceeds budget {quad_budget:.2e}; "
            "increase quad_points"
        )
    s = s_fine  # keep the refined overlaps

    if normalization == "symmetric":
        norm = 1.0 / np.sqrt(np.outer(mu, mu))
    else:
        norm = 1.0 / mu[:, None] * np.ones((1, len(cells)))

    def matrix(t: float) -> np.ndarray:
        w = (2.0 / d.length) * np.exp(-rates * t)
        return norm * ((s * w[:, None]).T @ s)

    def matrix_dt(t: float) -> np.ndarray:
        w = -(2.0 / d.length) * rates * np.exp(-rates * t)
        return norm * ((s * w[:, None]).T @ s)

    def evaluator(x: int, y: int, t: float) -> float:
        return float(matrix(t)[x, y])

    def time_derivative(x: int, y: int, t: float) -> float:
        return float(matrix_dt(t)[x, y])

    kernel = ClosedFormKernel(
        evaluator, time_derivative, "sine-series", graph.n, matrix, matrix_dt
    )

    # sample the kernel and its heat image over the whole grid in chunks;
    # mode sums collapse to one matrix product per chunk
    nv = graph.n
    lap = graph.laplacian_matrix()
    pair = np.einsum("nv,nw->nvw", s, s).reshape(d.n_modes, nv * nv) * (2.0 / d.length)
    pair_dt = pair * (-rates[:, None])
    nodes = grid.nodes
    h_samples = np.empty((nodes.size, nv, nv))
    lh = np.empty_like(h_samples)
    chunk = max(1, 8_388_608 // max(1, d.n_modes))
    for j0 in range(0, nodes.size, chunk):
        t_chunk = nodes[j0 : j0 + chunk]
        w = np.exp(-np.outer(t_chunk, rates))
        h_c = (w @ pair).reshape(-1, nv, nv) * norm
        dh_c = (w @ pair_dt).reshape(-1, nv, nv) * norm
        h_samples[j0 : j0 + chunk] = h_c
        lh[j0 : j0 + chunk] = np.einsum("xv,cvw->cxw", lap, h_c) + dh_c
    return Parametrix(
        kernel=kernel,
        heat_image=KernelSeries(grid, lh),
        grid=grid,
        order=0,
        kernel_samples=KernelSeries(grid, h_samples),
    )


def embed_heat_kernel(p: Parametrix, g: WeightedGraph, tol: float) -> KernelSeries:
    """Correct the averaged parametrix into the embedded graph's heat kernel
    and sanity-check that the correction vanishes at the first grid node."""
    if p.n != g.n:
        raise ContractViolation("parametrix and graph sizes differ")
    series = neumann_series(p, tol)
    out = assemble_heat_kernel(p, series)
    corr = out.values[1] - p.kernel_series().values[1]
    h_scale = float(np.abs(p.kernel_series().values[1]).max())
    limit = 4.0 * series.bound_constant * p.n * p.grid.dt * max(1.0, h_scale) + 1e-12
    if np.abs(corr).max() > limit:
        raise NumericalBudgetError(
            f"correction at the first node is {np.abs(corr).max():.2e}, "
            f"violating its O(t) bound {limit:.2e}"
        )
    return out
