"""k-type LIFO inventory model: exact word semantics, stationary-law
simulation, scaling-limit statistics, and small-size verification oracles."""

from .engine import (
    BackwardConstruction,
    ModelParams,
    PastStack,
    Trajectory,
    final_counts,
    record_sequences,
    sample_excursion,
    sample_J,
    simulate_trajectory,
)
from .estimators import (
    Estimate,
    ExperimentConfig,
    estimate_chi,
    estimate_cov_D,
    estimate_EDD,
    flex_fraction,
    ks_normality,
    past_type_fractions,
    tail_curve,
)
from .oracle import (
    EnumerationSpec,
    exact_expectation,
    verify_increment_bound,
    verify_M_relation,
    verify_neighbor_closure,
    verify_reduction,
)
from .theory import alpha, chi_prediction, covariance_model, critical_p, m_matrix
from .words import (
    FLEX,
    B,
    O,
    ReducedWord,
    Symbol,
    concat,
    counts,
    discrepancy,
    parse_word,
    reduce_naive,
)

__version__ = "0.1.0"
