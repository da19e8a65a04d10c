"""Label-efficient selection of the best classifier from hard predictions."""

from .data import (
    LabelVector,
    PredictionMatrix,
    accuracies,
    best_model_set,
    load_labels,
    load_predictions,
    write_labels,
    write_predictions,
)
from .engine import (
    PoolScorer,
    class_distribution,
    expected_posterior_entropy,
    posterior_entropy,
    posterior_from_counts,
    posterior_probs,
    uniform_log_posterior,
    update_posterior,
)
from .errors import ConfigError, DataError, ModelPickError
from .evaluation import (
    ExperimentConfig,
    ExperimentReport,
    RealizationResult,
    run_experiment,
    run_realization,
    sample_pool,
)
from .policies import (
    FinalSelection,
    PolicySpec,
    SelectionState,
    final_selection,
    init_state,
    next_query,
    record_label,
)
from .synth import SyntheticSpec, drift_collection, generate
from .tuning import (
    NoisyOracleConfig,
    TuningReport,
    best_model_accuracy_gap,
    build_noisy_oracle,
    epsilon_grid_search,
    noisy_labels,
    tune_epsilon,
    tune_epsilon_against,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DataError",
    "ExperimentConfig",
    "ExperimentReport",
    "FinalSelection",
    "LabelVector",
    "ModelPickError",
    "NoisyOracleConfig",
    "PolicySpec",
    "PoolScorer",
    "PredictionMatrix",
    "RealizationResult",
    "SelectionState",
    "SyntheticSpec",
    "TuningReport",
    "accuracies",
    "best_model_accuracy_gap",
    "best_model_set",
    "build_noisy_oracle",
    "class_distribution",
    "drift_collection",
    "epsilon_grid_search",
    "expected_posterior_entropy",
    "final_selection",
    "generate",
    "init_state",
    "load_labels",
    "load_predictions",
    "next_query",
    "noisy_labels",
    "posterior_entropy",
    "posterior_from_counts",
    "posterior_probs",
    "record_label",
    "run_experiment",
    "run_realization",
    "sample_pool",
    "tune_epsilon",
    "tune_epsilon_against",
    "uniform_log_posterior",
    "update_posterior",
    "write_labels",
    "write_predictions",
]
