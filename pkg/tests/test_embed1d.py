import math

import numpy as np
import pytest

from heatpar.embed1d import (
    IntervalDomain,
    averaged_parametrix,
    build_bumps,
    build_voronoi,
    embed_heat_kernel,
    interval_heat_kernel,
    modes_for_time,
    series_tail_bound,
    smoothstep,
)
from heatpar.errors import ContractViolation, DomainError, ResolutionError
from heatpar.graph import WeightedGraph
from heatpar.oracle import compare_kernels, spectral_kernel_series
from heatpar.series import TimeGrid

# exact overshoot amplitude for the calibrated quintic band, from the
# closed-form quadratic (plateau + band moments integrated symbolically)
EXACT_AMPLITUDE = 2.0122388733928056


def fine_integral(f, a, b, panels=200_000):
    xs = np.linspace(a, b, panels + 1)
    w = np.ones(panels + 1)
    w[1:-1:2], w[2:-1:2] = 4.0, 2.0
    return float(w @ f(xs)) * (b - a) / panels / 3.0


class TestIntervalKernel:
    def test_symmetry_and_reflection(self):
        d = IntervalDomain(length=1.0, n_modes=60, quad_points=64)
        k1 = interval_heat_kernel(d, 0.3, 0.55, 0.02)
        assert k1 == pytest.approx(interval_heat_kernel(d, 0.55, 0.3, 0.02), abs=1e-13)
        k2 = interval_heat_kernel(d, 0.7, 0.45, 0.02)
        assert k1 == pytest.approx(k2, abs=1e-12)

    def test_mass_leaks(self):
        d = IntervalDomain(length=1.0, n_modes=200, quad_points=64)
        xs = np.linspace(1e-4, 1.0 - 1e-4, 4001)
        for t in (0.01, 0.1):
            vals = np.array([interval_heat_kernel(d, 0.4, float(y), t) for y in xs])
            mass = np.trapezoid(vals, xs)
            assert mass <= 1.0 + 1e-9
            if t == 0.1:
                assert mass < 0.9  # Dirichlet absorption is visible

    def test_domain_errors(self):
        d = IntervalDomain(length=1.0, n_modes=10, quad_points=64)
        with pytest.raises(DomainError):
            interval_heat_kernel(d, 0.0, 0.5, 0.1)
        with pytest.raises(DomainError):
            interval_heat_kernel(d, 0.5, 1.5, 0.1)

    def test_mode_certificate(self):
        t_min = 1e-4 / math.pi**2
        n = modes_for_time(1.0, t_min, 1e-10)
        assert series_tail_bound(1.0, t_min, n) < 1e-10
        assert series_tail_bound(1.0, t_min, n - 1) >= 1e-10


class TestVoronoi:
    def test_two_vertices(self):
        cells = build_voronoi([0.25, 0.75], 1.0, 0.25)
        assert cells[0].a == 0.0 and cells[0].b == 0.5
        assert cells[1].a == 0.5 and cells[1].b == 1.0
        assert cells[0].measure == cells[1].measure == 0.5

    def test_single_vertex(self):
        (cell,) = build_voronoi([0.4], 1.0, 0.25)
        assert (cell.a, cell.b) == (0.0, 1.0)
        assert cell.measure == 1.0

    def test_three_equally_spaced(self):
        cells = build_voronoi([1 / 6, 0.5, 5 / 6], 1.0, 0.25)
        assert all(c.measure == pytest.approx(1 / 3) for c in cells)

    def test_validation(self):
        with pytest.raises(ContractViolation):
            build_voronoi([0.5, 0.5], 1.0, 0.25)
        with pytest.raises(ContractViolation):
            build_voronoi([0.2, 0.8], 1.0, 0.7)
        with pytest.raises(ContractViolation):
            build_voronoi([0.0, 0.5], 1.0, 0.25)

    def test_collar_inside_cells(self):
        cells = build_voronoi([0.2, 0.5, 0.8], 1.0, 0.49)
        for c in cells:
            assert 0.0 < c.delta < c.measure / 2.0
            assert c.a < c.position < c.b


class TestBumps:
    def test_smoothstep_endpoints(self):
        assert smoothstep(np.array([0.0, 1.0])).tolist() == [0.0, 1.0]
        # first and second derivatives vanish at both ends
        h = 1e-6
        for u in (0.0, 1.0):
            d1 = (smoothstep(np.array([u + h])) - smoothstep(np.array([u - h]))) / (2 * h)
            assert abs(float(d1)) <= 1e-5

    def test_square_integral_calibration(self):
        cells = build_voronoi([0.2, 0.5, 0.8], 1.0, 0.3)
        bumps = build_bumps(cells)
        for v, cell in enumerate(cells):
            val = fine_integral(lambda xs: bumps.evaluate(v, xs) ** 2, cell.a, cell.b)
            assert val == pytest.approx(cell.measure, rel=1e-8)

    def test_plain_integral_below_measure(self):
        cells = build_voronoi([0.3, 0.7], 1.0, 0.4)
        bumps = build_bumps(cells)
        for v, cell in enumerate(cells):
            val = fine_integral(lambda xs: bumps.evaluate(v, xs), cell.a, cell.b)
            assert val <= cell.measure

    def test_disjoint_supports(self):
        cells = build_voronoi([0.3, 0.7], 1.0, 0.4)
        bumps = build_bumps(cells)
        xs = np.linspace(0.0, 1.0, 20001)
        prod = bumps.evaluate(0, xs) * bumps.evaluate(1, xs)
        assert np.all(prod == 0.0)

    def test_plateau_and_zero_band(self):
        cells = build_voronoi([0.5], 1.0, 0.25)
        bumps = build_bumps(cells)
        c = cells[0]
        inner = np.linspace(c.a + c.delta, c.b - c.delta, 101)
        assert np.abs(bumps.evaluate(0, inner) - 1.0).max() == 0.0
        near_edge = np.linspace(c.a, c.a + c.delta / 2, 51)
        assert np.abs(bumps.evaluate(0, near_edge)).max() == 0.0

    def test_amplitude_matches_exact_root(self):
        # uniform geometry: the calibrated amplitude has a closed form
        cells = build_voronoi([0.25, 0.75], 1.0, 0.3)
        bumps = build_bumps(cells)
        for amp in bumps.amplitudes:
            assert amp == pytest.approx(EXACT_AMPLITUDE, abs=2e-6)


class TestAveragedParametrix:
    def setup_method(self):
        self.g = WeightedGraph.path(3)
        self.positions = [0.17, 0.5, 0.83]
        self.cells = build_voronoi(self.positions, 1.0, 0.49)
        self.bumps = build_bumps(self.cells)
        self.dom = IntervalDomain(length=1.0, n_modes=520, quad_points=1600)

    def test_dirac_at_probe_time(self):
        grid = TimeGrid(0.5, 8)
        p = averaged_parametrix(self.dom, self.cells, self.bumps, grid, self.g)
        t0 = 1e-4 / math.pi**2
        h0 = p.kernel.at(t0)
        assert np.abs(np.diag(h0) - 1.0).max() <= 0.02
        assert np.abs(h0 - np.diag(np.diag(h0))).max() <= 0.02

    def test_symmetric_normalization_is_symmetric(self):
        grid = TimeGrid(0.5, 8)
        p = averaged_parametrix(self.dom, self.cells, self.bumps, grid, self.g)
        for j in (0, 4, 8):
            m = p.kernel_series().values[j]
            assert np.abs(m - m.T).max() <= 1e-14

    def test_derivative_matches_finite_difference(self):
        grid = TimeGrid(0.5, 8)
        p = averaged_parametrix(self.dom, self.cells, self.bumps, grid, self.g)
        t, h = 0.2, 1e-6
        fd = (p.kernel.at(t + h) - p.kernel.at(t - h)) / (2.0 * h)
        assert np.abs(p.kernel.derivative_at(t) - fd).max() <= 1e-6

    def test_time_derivatives_bounded_near_zero(self):
        # first and second time derivatives stay bounded on (0, t_max];
        # the bound is recorded from the sweep, not prescribed
        mu = np.array([c.measure for c in self.cells])
        rates = self.dom.rates()
        from heatpar.embed1d import _mode_overlaps

        s = _mode_overlaps(self.dom, self.cells, self.bumps, 1600)
        norm = 1.0 / np.sqrt(np.outer(mu, mu))
        ts = np.logspace(-9, math.log10(0.5), 40)
        for order in (1, 2):
            sup = 0.0
            for t in ts:
                w = (2.0 / self.dom.length) * (-rates) ** order * np.exp(-rates * t)
                val = np.abs(norm * ((s * w[:, None]).T @ s)).max()
                sup = max(sup, val)
            limit_weights = (2.0 / self.dom.length) * (-rates) ** order
            limit = np.abs(norm * ((s * limit_weights[:, None]).T @ s)).max()
            assert math.isfinite(sup)
            assert sup <= 1.0001 * limit  # monotone approach to the t->0 limit

    def test_quadrature_budget_guard(self):
        # a fine time grid probes high modes, which a 24-point cell
        # quadrature cannot integrate
        dom = IntervalDomain(length=1.0, n_modes=520, quad_points=24)
        grid = TimeGrid(0.5, 4096)
        with pytest.raises(ResolutionError):
            averaged_parametrix(dom, self.cells, self.bumps, grid, self.g)

    def test_size_mismatch(self):
        grid = TimeGrid(0.5, 8)
        with pytest.raises(ContractViolation):
            averaged_parametrix(
                self.dom, self.cells, self.bumps, grid, WeightedGraph.path(4)
            )


@pytest.mark.slow
class TestEmbeddedKernel:
    def test_single_vertex_graph(self):
        # no edges: the embedded kernel must be constant one
        g = WeightedGraph(np.zeros((1, 1)))
        cells = build_voronoi([0.5], 1.0, 0.49)
        bumps = build_bumps(cells)
        dom = IntervalDomain(length=1.0, n_modes=520, quad_points=1600)
        grid = TimeGrid(0.5, 32768)
        p = averaged_parametrix(dom, cells, bumps, grid, g)
        assert p.kernel_series().values[0, 0, 0] == pytest.approx(1.0, abs=1e-7)
        hg = embed_heat_kernel(p, g, 1e-8)
        assert np.abs(hg.values - 1.0).max() <= 2e-3

    def test_path3_against_spectral(self):
        g = WeightedGraph.path(3)
        cells = build_voronoi([0.17, 0.5, 0.83], 1.0, 0.49)
        bumps = build_bumps(cells)
        dom = IntervalDomain(length=1.0, n_modes=520, quad_points=1600)
        grid = TimeGrid(0.5, 65536)
        p = averaged_parametrix(dom, cells, bumps, grid, g)
        hg = embed_heat_kernel(p, g, 1e-8)
        sp = spectral_kernel_series(g, grid)
        assert compare_kernels(hg, sp).sup_error <= 8e-3

    def test_normalizations_agree(self):
        g = WeightedGraph.path(3)
        cells = build_voronoi([0.17, 0.5, 0.83], 1.0, 0.49)
        bumps = build_bumps(cells)
        dom = IntervalDomain(length=1.0, n_modes=520, quad_points=1600)
        grid = TimeGrid(0.5, 32768)
        hs = []
        for normalization in ("symmetric", "first"):
            p = averaged_parametrix(
                dom, cells, bumps, grid, g, normalization=normalization
            )
            hs.append(embed_heat_kernel(p, g, 1e-8))
        assert np.abs(hs[0].values - hs[1].values).max() <= 5e-2

    def test_delta_robustness(self):
        # the assembled kernel does not depend on the bump family beyond the
        # combined numerical budgets of the two runs
        g = WeightedGraph.path(3)
        dom = IntervalDomain(length=1.0, n_modes=520, quad_points=1600)
        grid = TimeGrid(0.5, 32768)
        results = []
        for dfrac in (0.49, 0.245):
            cells = build_voronoi([0.17, 0.5, 0.83], 1.0, dfrac)
            bumps = build_bumps(cells)
            p = averaged_parametrix(dom, cells, bumps, grid, g)
            results.append(embed_heat_kernel(p, g, 1e-8).values)
        # budgets: ~2.4e-2 for the wide collar at this grid, about 8x that
        # for the halved collar (the layer energy scales like 1/delta^3)
        assert np.abs(results[0] - results[1]).max() <= 0.25
