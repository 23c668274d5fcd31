"""Pool-based active learning with an incrementally updated sparse GP
surrogate tracking the classifier between retrains."""

from .acquisition import (
    AccuracyEstimator,
    CalibrationState,
    combine_utilities,
    hypothetical_entropy_utility,
    influence_utility,
    record_prediction_outcome,
    select_next,
    snapshot_entropy,
    surrogate_softmax_entropy,
    update_calibration,
)
from .datasets import Dataset, DatasetError, load_dataset_csv
from .dense_gp import DenseGPModel, fit_dense, predict_dense
from .driver import (
    RunConfig,
    RunResult,
    evaluate,
    run,
    run_baseline_max_entropy,
    run_baseline_random,
)
from .kernel import (
    KernelParams,
    default_params,
    estimate_sigma_x,
    gaussian_base,
    product_kernel,
)
from .learner import (
    ExternalPredictions,
    LearnerConfig,
    LearnerSnapshot,
    make_snapshot,
    predict_proba,
    train,
)
from .sparse_gp import (
    BasisSet,
    SparseSurrogate,
    build_basis,
    sample_basis_outputs,
    select_basis_inputs,
)

__version__ = "0.1.0"

__all__ = [
    "AccuracyEstimator",
    "BasisSet",
    "CalibrationState",
    "Dataset",
    "DatasetError",
    "DenseGPModel",
    "ExternalPredictions",
    "KernelParams",
    "LearnerConfig",
    "LearnerSnapshot",
    "RunConfig",
    "RunResult",
    "SparseSurrogate",
    "build_basis",
    "combine_utilities",
    "default_params",
    "estimate_sigma_x",
    "evaluate",
    "fit_dense",
    "gaussian_base",
    "hypothetical_entropy_utility",
    "influence_utility",
    "load_dataset_csv",
    "make_snapshot",
    "predict_dense",
    "predict_proba",
    "product_kernel",
    "record_prediction_outcome",
    "run",
    "run_baseline_max_entropy",
    "run_baseline_random",
    "sample_basis_outputs",
    "select_basis_inputs",
    "select_next",
    "snapshot_entropy",
    "surrogate_softmax_entropy",
    "train",
    "update_calibration",
]
