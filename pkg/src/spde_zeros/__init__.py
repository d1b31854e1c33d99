"""Solvers and statistics for stochastic heat equations kept nonnegative by
reflection or by a singular repulsion, plus the Gaussian pinned string and
zero-set (contact-set) analysis tools."""

from .bessel import (
    BesselParams,
    BesselPath,
    bridge_marginal_cdf,
    bridge_marginal_density,
    couple_bessel_in_delta,
    modified_bessel_i,
    modified_bessel_i_scaled,
    repulsion_strength,
    sample_bessel_bridge,
    sample_bessel_process,
    tilted_density,
    transition_cdf,
    transition_density,
)
from .heat_kernel import (
    DirichletKernelSpec,
    deterministic_convolution,
    dirichlet_green,
    gaussian_kernel,
    truncation_bound,
)
from .mc_harness import (
    ExperimentConfig,
    ExperimentReport,
    TestResult,
    derive_seed,
    ks_statistic,
    run_experiment,
    summarize,
)
from .pinned_string import (
    StringField,
    StringSpec,
    exact_increment_variance,
    sample_initial_string,
    scaling_transform,
    simulate_string,
    translate_and_reverse,
)
from .spde_solver import (
    FieldPath,
    GridSpec,
    NoiseRealization,
    SolverConfig,
    penalty_drift,
    solve_coupled_family,
    solve_monotone_limit,
    solve_penalized,
    solve_reflected,
    solve_vector_dirichlet,
    step_penalized,
)
from .zero_analysis import (
    ClusterConfig,
    HolderReport,
    ZeroReport,
    count_zero_clusters,
    count_zero_clusters_block,
    default_threshold,
    holder_estimate,
    reflection_measure_profile,
    string_zero_bound,
    zero_count_bound,
    zeta_sup,
)

__version__ = "0.1.0"
