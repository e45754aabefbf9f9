import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heatpar.errors import ContractViolation, SamplingError
from heatpar.parametrix import complete_graph_kernel
from heatpar.series import (
    ClosedFormKernel,
    KernelSeries,
    TimeGrid,
    convolution_bound,
    convolve,
    fold_bound,
    l_fold_convolve,
    sample_closed_form,
)

from conftest import besseli_oracle, naive_convolve


def constant_series(grid, n, value=1.0):
    return KernelSeries(grid, np.full((grid.steps + 1, n, n), value))


def monomial_series(grid, k):
    return KernelSeries(grid, (grid.nodes**k).reshape(-1, 1, 1))


class TestTimeGrid:
    def test_nodes(self):
        grid = TimeGrid(2.0, 4)
        assert np.allclose(grid.nodes, [0.0, 0.5, 1.0, 1.5, 2.0])
        assert grid.dt == 0.5

    def test_validation(self):
        with pytest.raises(ContractViolation):
            TimeGrid(0.0, 4)
        with pytest.raises(ContractViolation):
            TimeGrid(1.0, 0)


class TestConvolve:
    def test_ones_single_vertex_exact(self):
        grid = TimeGrid(2.0, 64)
        out = convolve(constant_series(grid, 1), constant_series(grid, 1))
        assert np.allclose(out.values[:, 0, 0], grid.nodes, atol=1e-14)

    def test_ones_scale_with_vertex_count(self):
        grid = TimeGrid(1.5, 32)
        out = convolve(constant_series(grid, 3), constant_series(grid, 3))
        assert np.allclose(out.values[:, 0, 0], 3.0 * grid.nodes, atol=1e-13)

    def test_matches_direct_summation(self, rng):
        grid = TimeGrid(1.0, 40)
        a = rng.normal(size=(41, 3, 3))
        b = rng.normal(size=(41, 3, 3))
        fa, fb = KernelSeries(grid, a), KernelSeries(grid, b)
        out = convolve(fa, fb).values
        ref = naive_convolve(a, b, grid.dt)
        assert np.abs(out - ref).max() <= 1e-12

    def test_monomials_beta_integral(self):
        # r^k * r^l convolves to k! l!/(k+l+1)! t^{k+l+1}
        k, ell = 2, 3
        grid = TimeGrid(1.0, 512)
        out = convolve(monomial_series(grid, k), monomial_series(grid, ell))
        def beta_values(g):
            return (
                math.factorial(k)
                * math.factorial(ell)
                / math.factorial(k + ell + 1)
                * g.nodes ** (k + ell + 1)
            )

        err = np.abs(out.values[:, 0, 0] - beta_values(grid)).max()
        grid2 = grid.refined()
        out2 = convolve(monomial_series(grid2, k), monomial_series(grid2, ell))
        err2 = np.abs(out2.values[:, 0, 0] - beta_values(grid2)).max()
        assert err <= 1e-5
        assert err / err2 >= 3.5  # second-order convergence

    def test_grid_mismatch(self):
        a = constant_series(TimeGrid(1.0, 8), 1)
        b = constant_series(TimeGrid(1.0, 16), 1)
        with pytest.raises(ContractViolation):
            convolve(a, b)

    def test_zero_at_origin(self, rng):
        grid = TimeGrid(1.0, 16)
        a = KernelSeries(grid, rng.normal(size=(17, 2, 2)))
        assert np.all(convolve(a, a).values[0] == 0.0)


class TestAssociativity:
    @settings(max_examples=10, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 4), steps=st.sampled_from([16, 32, 64]))
    def test_exact_for_zero_at_origin(self, seed, n, steps):
        rng = np.random.default_rng(seed)
        grid = TimeGrid(1.0, steps)
        vals = rng.normal(size=(3, steps + 1, n, n))
        vals[:, 0] = 0.0
        f1, f2, f3 = (KernelSeries(grid, v) for v in vals)
        left = convolve(convolve(f1, f2), f3).values
        right = convolve(f1, convolve(f2, f3)).values
        scale = max(np.abs(left).max(), np.abs(right).max(), 1e-30)
        assert np.abs(left - right).max() <= 1e-10 * scale

    def test_second_order_otherwise(self, rng):
        # with nonzero initial values the two orderings differ at O(dt^2)
        def defect(steps):
            grid = TimeGrid(1.0, steps)
            vals = np.stack(
                [np.cos((k + 1) * grid.nodes).reshape(-1, 1, 1) for k in range(3)]
            )
            f1, f2, f3 = (KernelSeries(grid, v) for v in vals)
            left = convolve(convolve(f1, f2), f3).values
            right = convolve(f1, convolve(f2, f3)).values
            return np.abs(left - right).max()

        assert defect(64) / defect(128) >= 3.5


class TestQuadratureOrder:
    def test_refinement_ratio(self):
        # smooth non-semigroup integrands: error vs a 4x refined reference
        # shrinks ~4x when dt halves
        def run(steps):
            grid = TimeGrid(1.0, steps)
            f1 = KernelSeries(grid, np.cos(3.0 * grid.nodes).reshape(-1, 1, 1))
            f2 = KernelSeries(grid, np.exp(-2.0 * grid.nodes).reshape(-1, 1, 1))
            return convolve(f1, f2)

        fine = run(512)
        errs = []
        for steps in (64, 128):
            coarse = run(steps)
            stride = 512 // steps
            errs.append(np.abs(coarse.values - fine.values[::stride]).max())
        assert errs[0] / errs[1] >= 3.5


class TestBounds:
    def test_convolution_bound_examples(self):
        assert convolution_bound(2.0, 0, 3.0, 0, 4, 0.5) == pytest.approx(12.0)
        assert convolution_bound(0.0, 2, 1.0, 3, 5, 1.0) == 0.0
        assert convolution_bound(1.0, 1, 1.0, 1, 1, 1.0) == pytest.approx(1.0 / 6.0)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_computed_convolution_respects_bound(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 4))
        grid = TimeGrid(float(rng.uniform(0.5, 2.0)), 64)
        k, ell = int(rng.integers(0, 3)), int(rng.integers(0, 3))
        c1, c2 = float(rng.uniform(0.1, 2.0)), float(rng.uniform(0.1, 2.0))
        a = c1 * rng.uniform(-1, 1, size=(65, n, n)) * (grid.nodes**k).reshape(-1, 1, 1)
        b = c2 * rng.uniform(-1, 1, size=(65, n, n)) * (grid.nodes**ell).reshape(-1, 1, 1)
        out = convolve(KernelSeries(grid, a), KernelSeries(grid, b))
        for j in (16, 32, 64):
            t = grid.nodes[j]
            bound = convolution_bound(c1, k, c2, ell, n, t)
            assert np.abs(out.values[j]).max() <= bound + 1e-10

    def test_fold_bound_consistency(self):
        # ell = 1 reduces to C t^k
        assert fold_bound(2.0, 1, 1, 5, 0.5) == pytest.approx(2.0 * 0.5)
        assert fold_bound(0.0, 0, 3, 5, 1.0) == 0.0


class TestLFold:
    def test_single_fold_is_identity(self, rng):
        grid = TimeGrid(1.0, 16)
        f = KernelSeries(grid, rng.normal(size=(17, 2, 2)))
        assert l_fold_convolve(f, 1) is f

    def test_triple_fold_of_ones(self):
        grid = TimeGrid(1.0, 256)
        out = l_fold_convolve(constant_series(grid, 1), 3)
        expected = grid.nodes**2 / 2.0
        assert np.abs(out.values[:, 0, 0] - expected).max() <= 1e-5

    def test_zero_fold_rejected(self):
        grid = TimeGrid(1.0, 4)
        with pytest.raises(ContractViolation):
            l_fold_convolve(constant_series(grid, 1), 0)

    def test_fold_respects_factorial_bound(self, rng):
        grid = TimeGrid(1.0, 128)
        vals = 0.7 * rng.uniform(-1.0, 1.0, size=(129, 2, 2))
        f = KernelSeries(grid, vals)
        for ell in (2, 3, 4):
            out = l_fold_convolve(f, ell)
            for j in (64, 128):
                t = grid.nodes[j]
                assert (
                    np.abs(out.values[j]).max()
                    <= fold_bound(0.7, 0, ell, 2, t) + 1e-10
                )


class TestSampling:
    def test_complete_graph_dirac(self):
        grid = TimeGrid(1.0, 4)
        out = sample_closed_form(complete_graph_kernel(2), grid)
        assert np.array_equal(out.values[0], np.eye(2))

    def test_complete_graph_equilibrium(self):
        grid = TimeGrid(40.0, 4)
        out = sample_closed_form(complete_graph_kernel(2), grid)
        assert np.abs(out.values[-1] - 0.5).max() <= 1e-12

    def test_z_kernel_diagonal(self):
        from heatpar.bessel import z_window_kernel

        kernel = z_window_kernel(np.arange(5))
        grid = TimeGrid(0.5, 2)
        out = sample_closed_form(kernel, grid)
        expected = math.exp(-1.0) * besseli_oracle(0, 1.0)
        assert out.values[-1, 2, 2] == pytest.approx(expected, abs=1e-12)

    def test_non_finite_sampling_error(self):
        bad = ClosedFormKernel(
            evaluator=lambda x, y, t: math.inf if t > 0.5 else 1.0,
            time_derivative=lambda x, y, t: 0.0,
            family="bad",
            n=1,
        )
        with pytest.raises(SamplingError):
            sample_closed_form(bad, TimeGrid(1.0, 4))
