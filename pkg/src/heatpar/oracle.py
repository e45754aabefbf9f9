"""Independent ground truth: spectral heat kernels via a cyclic Jacobi
eigensolver, a Taylor scaling-and-squaring matrix exponential, and kernel
comparison reports.

The two kernel routes here share no machinery, so their mutual agreement
(checked in the test suite to 1e−10) certifies both; the rest of the
package is validated against them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ContractViolation
from .graph import WeightedGraph
from .series import KernelSeries


def jacobi_eigh(a: np.ndarray, tol: float = 1e-15, max_sweeps: int = 60):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps run until the off-diagonal Frobenius norm drops below
    tol·max(1, ||A||_F); convergence is quadratic once rotations are small.
    Returns (eigenvalues ascending, eigenvectors as columns).
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n) or not np.array_equal(a, a.T):
        raise ContractViolation("jacobi_eigh requires an exactly symmetric matrix")
    m = a.copy()
    v = np.eye(n)
    scale = max(1.0, float(np.linalg.norm(m)))
    prev_off = math.inf
    diag_mask = ~np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        off = float(np.linalg.norm(m[diag_mask]))
        if off <= tol * scale:
            break
        if off >= 0.5 * prev_off and off <= 1e-12 * scale:
            break  # stalled at the roundoff plateau, which is good enough
        prev_off = off
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = m[p, q]
                if apq == 0.0:
                    continue
                if abs(apq) <= 1e-300 or 100.0 * abs(apq) <= 1e-16 * (
                    abs(m[p, p]) + abs(m[q, q])
                ):
                    # negligible against the diagonal: annihilating it would
                    # only add roundoff elsewhere
                    m[p, q] = m[q, p] = 0.0
                    continue
                h = m[q, q] - m[p, p]
                if abs(h) > 1e12 * abs(apq):
                    t = apq / h  # small-angle limit of the stable root
                else:
                    theta = h / (2.0 * apq)
                    # smaller-magnitude root of t^2 + 2 t theta − 1 = 0
                    t = math.copysign(1.0, theta) / (
                        abs(theta) + math.sqrt(theta * theta + 1.0)
                    )
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rp, rq = m[p, :].copy(), m[q, :].copy()
                m[p, :] = c * rp - s * rq
                m[q, :] = s * rp + c * rq
                cp, cq = m[:, p].copy(), m[:, q].copy()
                m[:, p] = c * cp - s * cq
                m[:, q] = s * cp + c * cq
                m[p, q] = m[q, p] = 0.0
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        raise ContractViolation("jacobi_eigh failed to converge")
    lam = np.diag(m).copy()
    order = np.argsort(lam)
    return lam[order], v[:, order]


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues (ascending) and orthonormal eigenvectors of a graph
    Laplacian."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def heat_matrix(self, t: float) -> np.ndarray:
        w = np.exp(-self.eigenvalues * t)
        return (self.eigenvectors * w) @ self.eigenvectors.T


def spectral_decomposition(g: WeightedGraph) -> SpectralDecomposition:
    lam, psi = jacobi_eigh(g.laplacian_matrix())
    return SpectralDecomposition(eigenvalues=lam, eigenvectors=psi)


def spectral_heat_kernel(
    g: WeightedGraph, t: float, decomp: SpectralDecomposition | None = None
) -> np.ndarray:
    """Heat kernel Σ_j e^{−λ_j t} ψ_j ψ_jᵀ from the Laplacian eigensystem."""
    if t < 0:
        raise ContractViolation("time must be nonnegative")
    if decomp is None:
        decomp = spectral_decomposition(g)
    return decomp.heat_matrix(t)


def _expm_taylor(a: np.ndarray, terms: int = 25) -> np.ndarray:
    out = np.eye(a.shape[0])
    term = np.eye(a.shape[0])
    for k in range(1, terms + 1):
        term = term @ a / k
        out = out + term
    return out


def expm_heat_kernel(g: WeightedGraph, t: float) -> np.ndarray:
    """Heat kernel exp(−tΔ) by scaling and squaring around a 25-term Taylor
    core, scaled so the halved matrix has sup-norm at most 0.5.

    At that norm the dropped Taylor tail is below 0.5^26/26! ≈ 4e−35, so
    the result is limited by roundoff, not truncation.
    """
    if t < 0:
        raise ContractViolation("time must be nonnegative")
    a = -t * g.laplacian_matrix()
    norm = float(np.abs(a).sum(axis=1).max())
    s = max(0, math.ceil(math.log2(norm / 0.5))) if norm > 0.5 else 0
    core = _expm_taylor(a / 2.0**s)
    for _ in range(s):
        core = core @ core
    return core


def spectral_kernel_series(g: WeightedGraph, grid) -> KernelSeries:
    """Spectral kernel sampled on every node of a time grid."""
    decomp = spectral_decomposition(g)
    w = np.exp(-np.outer(grid.nodes, decomp.eigenvalues))  # (M+1, n)
    v = decomp.eigenvectors
    vals = np.einsum("ab,jb,cb->jac", v, w, v, optimize=True)
    return KernelSeries(grid, vals)


@dataclass(frozen=True)
class OracleReport:
    """Sup-norm comparison of two kernel families over common time nodes."""

    times: np.ndarray
    per_time_error: np.ndarray
    sup_error: float
    argmax_time: float
    budget: float | None = None
    first_over_budget: float | None = None

    @property
    def within_budget(self) -> bool:
        return self.budget is None or self.sup_error <= self.budget

    def to_dict(self) -> dict:
        return {
            "sup_error": self.sup_error,
            "argmax_time": self.argmax_time,
            "budget": self.budget,
            "within_budget": self.within_budget,
            "first_over_budget": self.first_over_budget,
            "times": [float(t) for t in self.times],
            "per_time_error": [float(e) for e in self.per_time_error],
        }


def compare_kernels(a, b, times: Sequence[float] | None = None, budget: float | None = None) -> OracleReport:
    """Compare two kernels given as KernelSeries or stacked (T, n, n) arrays."""
    if isinstance(a, KernelSeries) and isinstance(b, KernelSeries):
        if a.grid != b.grid:
            raise ContractViolation("kernel series grids differ")
        times = a.grid.nodes
        va, vb = a.values, b.values
    else:
        va = a.values if isinstance(a, KernelSeries) else np.asarray(a, dtype=float)
        vb = b.values if isinstance(b, KernelSeries) else np.asarray(b, dtype=float)
        if times is None:
            raise ContractViolation("times are required for raw kernel stacks")
        times = np.asarray(times, dtype=float)
    if va.shape != vb.shape:
        raise ContractViolation(f"kernel shapes differ: {va.shape} vs {vb.shape}")
    if len(times) != va.shape[0]:
        raise ContractViolation("time axis does not match the kernel stacks")
    per_time = np.abs(va - vb).reshape(va.shape[0], -1).max(axis=1)
    sup = float(per_time.max()) if per_time.size else 0.0
    argmax = float(times[int(per_time.argmax())]) if per_time.size else 0.0
    first_over = None
    if budget is not None:
        over = np.nonzero(per_time > budget)[0]
        if over.size:
            first_over = float(times[int(over[0])])
    return OracleReport(
        times=np.asarray(times, dtype=float),
        per_time_error=per_time,
        sup_error=sup,
        argmax_time=argmax,
        budget=budget,
        first_over_budget=first_over,
    )
