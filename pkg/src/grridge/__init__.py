"""Adaptive group-regularized (logistic) ridge regression driven by co-data."""

__version__ = "0.1.0"

from ._kernels import BACKEND as KERNEL_BACKEND
from .codata import (
    CoDataVector,
    Partition,
    filter_features,
    isotonic_fit,
    partition_by_labels,
    partition_by_quantiles,
    partition_by_rank,
    partition_by_rank_nonuniform,
)
from .data import DataError, DesignMatrix, Response
from .eb import (
    EBSystem,
    MultiplierSet,
    adaptive_ridge_multipliers,
    calibrate,
    compose_multipliers,
    group_B,
    rescale_estimates,
    solve_system,
    tau_global,
    tau_group_iterative,
)
from .engine import (
    GRridgeModel,
    GRridgeOptions,
    SelectionConfig,
    grridge,
    load_model,
    predict,
    save_model,
    select_posthoc,
)
from .evaluation import FoldPlan, brier, cvl, make_folds, roc_auc, tune_lambda
from .ridge import (
    MomentFactors,
    PenaltyConfig,
    RidgeFit,
    alpha_matrix,
    irls_fit,
    linear_fit,
    moment_factors,
    ridge_solve,
)
from .simulate import SimScenario, simulate_scenario
