"""Simulation and verification toolkit for the two-choices dynamics on
clustered regular graphs."""

from .graph import (
    ClusteredRegularGraph,
    GraphFormatError,
    GraphGenerationError,
    ValidationReport,
    generate_clustered_regular,
    generate_regular_community,
    generate_regular_cut,
    load_graph,
    save_graph,
    structure_report,
    validate,
)
from .dynamics import (
    ALMOST_CLUSTERED,
    BLUE,
    MIXED,
    MONOCHROMATIC,
    RED,
    BiasPair,
    RngContext,
    StopCriteria,
    Trajectory,
    biases,
    classify,
    minority_counts,
    random_init,
    run,
    seeded_init,
    step_two_choices,
    step_voter,
)
from .spectral import (
    HypothesisConstants,
    SpectralReport,
    check_hypotheses,
    community_lambda,
    dense_community_lambda,
    hypothesis_constants,
    spectral_report,
)
from .analysis import (
    EventEstimate,
    MetastabilityWindow,
    MinorityFlipProfile,
    estimate_event_probability,
    exact_expected_color_count,
    exact_expected_minority,
    expected_minority_bound,
    metastability_window,
    minority_flip_profile,
    normal_upper_tail,
    poisson_binomial_pmf,
    poisson_tail,
    poisson_total_variation,
    wilson_interval,
)
from .csl import CslScore, csl_predicate, csl_run, csl_score
from .harness import ExperimentConfig, run_experiment

__version__ = "0.1.0"
