"""Random survival forests with trained tree weights."""

from .dataset import (
    PairSet,
    Sample,
    SurvivalDataset,
    admissible_pairs,
    bootstrap_sample,
    load_csv,
    load_veteran,
    simulate_proportional_hazards,
    train_test_split,
)
from .stepfunction import StepFunction
from .tree import (
    LeafEstimate,
    SplitCandidate,
    SurvivalTree,
    approx_log_rank_statistic,
    best_split,
    conservation_statistic,
    grow_tree,
    log_rank_statistic,
    predict_chf,
)
from .forest import (
    Forest,
    GroupedForest,
    ensemble_chf,
    fit_forest,
    group_trees,
    load_model,
    oob_ensemble_chf,
    save_model,
)
from .metrics import CIndexReport, c_index, c_index_of_weights
from .weights import (
    PairDifferenceMatrix,
    QPSolution,
    build_pair_differences,
    optimize_weights_qp,
    optimize_weights_sigmoid,
    project_simplex,
    sample_constraints,
    weighted_chf,
)

__version__ = "0.1.0"
