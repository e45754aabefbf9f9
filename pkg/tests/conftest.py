import math

import numpy as np
import pytest

from heatpar.graph import WeightedGraph


def besseli_oracle(n: int, x: float) -> float:
    """Independent reference for I_n(x): defining power series with a
    geometric remainder cap.

    All terms are positive, so there is no cancellation; summation stops
    once the geometric tail of the remaining terms is below 1e-17 of the
    running sum.
    """
    if x == 0.0:
        return 1.0 if n == 0 else 0.0
    term = math.exp(n * math.log(x / 2.0) - math.lgamma(n + 1))
    total = term
    q = x * x / 4.0
    for k in range(2000):
        term *= q / ((k + 1.0) * (n + k + 1.0))
        total += term
        ratio = q / ((k + 2.0) * (n + k + 2.0))
        if ratio < 1.0 and term * ratio / (1.0 - ratio) < 1e-17 * total:
            return total
    raise RuntimeError("oracle did not converge")


def random_graph(rng: np.random.Generator, n_max: int = 10, w_max: float = 2.0,
                 p_range=(0.2, 0.7)) -> WeightedGraph:
    """Erdős–Rényi-style weighted graph with weights in [0, w_max]."""
    n = int(rng.integers(2, n_max + 1))
    w = rng.uniform(0.0, w_max, size=(n, n))
    w = (w + w.T) / 2.0
    np.fill_diagonal(w, 0.0)
    p_edge = rng.uniform(*p_range)
    mask = np.triu(rng.uniform(size=(n, n)) < p_edge, 1)
    return WeightedGraph(w * (mask + mask.T))


def naive_convolve(a: np.ndarray, b: np.ndarray, dt: float) -> np.ndarray:
    """Direct-sum trapezoid convolution; reference for the FFT evaluation."""
    m1 = a.shape[0]
    out = np.zeros((m1, a.shape[1], b.shape[2]))
    for j in range(1, m1):
        acc = np.zeros((a.shape[1], b.shape[2]))
        for r in range(j + 1):
            w = 0.5 if r in (0, j) else 1.0
            acc += w * (a[j - r] @ b[r])
        out[j] = dt * acc
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
