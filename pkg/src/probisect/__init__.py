"""Probabilistic bisection for stochastic root finding with noisy sign
oracles of unknown, location-dependent accuracy.

The knowledge state is a piecewise-constant density over the search
interval; batched oracle responses update it through Bayes factors built
from an estimated response accuracy, and sampling policies choose where to
query next.  The harness reproduces synthetic and option-exercise-boundary
benchmarks end to end.
"""

from .density import PiecewiseDensity, uniform_prior
from .driver import (
    MetricsRecord,
    RunConfig,
    TraceRecord,
    default_checkpoints,
    metrics_snapshot,
    run_gpba,
    run_tpo_pba,
    trace_to_text,
)
from .estimators import (
    BatchStats,
    boost_majority,
    clamp_estimate,
    clt_prob,
    empirical_majority,
    exact_bias,
    majority_likelihood,
    minority_count,
    posterior_mean,
    posterior_median,
    posterior_mode,
    posterior_pdf_unnorm,
    tpo_boundary,
)
from .harness import (
    ExperimentConfig,
    ExperimentResult,
    SchemeSpec,
    build_oracle,
    derive_seeds,
    parse_config,
    run_design_quality,
    run_experiment,
    run_tpo_table,
    write_records,
)
from .oracles import (
    BermudanPutOracle,
    SyntheticOracle,
    export_boundary_csv,
    lattice_boundary,
    make_synthetic,
    preaveraged_batch,
)
from .policies import (
    PolicySpec,
    baseline_next,
    ids_candidates,
    ids_select,
    info_gain,
    rand_q_next,
    syst_q_next,
    tpo_query,
)
from .updating import (
    DegenerateUpdateError,
    UpdateSignal,
    apply_update,
    batched_update,
    boosted_update,
    gamma_prob,
    right_scaling_factor,
    step_update,
)

__version__ = "0.1.0"

__all__ = [
    "BatchStats",
    "BermudanPutOracle",
    "DegenerateUpdateError",
    "ExperimentConfig",
    "ExperimentResult",
    "MetricsRecord",
    "PiecewiseDensity",
    "PolicySpec",
    "RunConfig",
    "SchemeSpec",
    "SyntheticOracle",
    "TraceRecord",
    "UpdateSignal",
    "apply_update",
    "baseline_next",
    "batched_update",
    "boost_majority",
    "boosted_update",
    "build_oracle",
    "clamp_estimate",
    "clt_prob",
    "default_checkpoints",
    "derive_seeds",
    "empirical_majority",
    "exact_bias",
    "export_boundary_csv",
    "gamma_prob",
    "ids_candidates",
    "ids_select",
    "info_gain",
    "lattice_boundary",
    "majority_likelihood",
    "make_synthetic",
    "metrics_snapshot",
    "minority_count",
    "parse_config",
    "posterior_mean",
    "posterior_median",
    "posterior_mode",
    "posterior_pdf_unnorm",
    "preaveraged_batch",
    "rand_q_next",
    "right_scaling_factor",
    "run_design_quality",
    "run_experiment",
    "run_gpba",
    "run_tpo_pba",
    "run_tpo_table",
    "step_update",
    "syst_q_next",
    "tpo_boundary",
    "tpo_query",
    "trace_to_text",
    "uniform_prior",
    "write_records",
]
