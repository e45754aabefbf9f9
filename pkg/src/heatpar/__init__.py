"""Heat kernels on weighted graphs built from parametrices and corrected by
an alternating convolution series, with spectral and closed-form oracles."""

from .bessel import (
    BesselEvaluator,
    bessel_tail_bound,
    bessel_time_convolve,
    besseli,
    besseli_grid,
    besseli_row,
    halfline_dirichlet_closed_form,
    halfline_window_kernel,
    intro_identity_sum,
    kernel_Z,
    kernel_halfline,
    kernel_halfline_dirichlet,
    verify_intro_identity,
    watson_series,
    z_window_kernel,
)
from .embed1d import (
    BumpFamily,
    IntervalDomain,
    VoronoiCell1D,
    averaged_parametrix,
    build_bumps,
    build_voronoi,
    embed_heat_kernel,
    interval_heat_kernel,
    modes_for_time,
    series_tail_bound,
)
from .graph import (
    DegreeProfile,
    SubgraphEmbedding,
    WeightedGraph,
    adjacency_complement,
    boundary_sets,
    laplacian_apply,
)
from .oracle import (
    OracleReport,
    SpectralDecomposition,
    compare_kernels,
    expm_heat_kernel,
    jacobi_eigh,
    spectral_decomposition,
    spectral_heat_kernel,
    spectral_kernel_series,
)
from .parametrix import (
    NeumannSeriesResult,
    Parametrix,
    algebraic_heat_image,
    assemble_heat_kernel,
    b_matrix,
    complete_graph_kernel,
    diagonal_parametrix,
    dirichlet_parametrix,
    heat_kernel_via_parametrix,
    neumann_series,
    restriction_parametrix,
    subgraph_kernel_closed_form,
)
from .series import (
    ClosedFormKernel,
    KernelSeries,
    TimeGrid,
    convolution_bound,
    convolve,
    convolve_values,
    fold_bound,
    l_fold_convolve,
    sample_closed_form,
)

__version__ = "0.1.0"
