"""Top-k multiclass SVM: losses, projections, dual coordinate ascent solver."""

from .io import Dataset, read_libsvm, read_model, write_libsvm, write_model
from .losses import (
    LossSpec,
    MarginVector,
    loss_conjugate,
    loss_primal,
    loss_primal_via_lp,
    topk_error,
)
from .projections import (
    ProjectionResult,
    TopKSimplexSpec,
    oracle_project,
    project_knapsack,
    project_knapsack_sorted,
    project_topk_box,
    project_topk_cone,
    project_topk_simplex,
)
from .solver import (
    DualState,
    Model,
    SolverConfig,
    TrainReport,
    dual_objective,
    predict_scores,
    primal_objective,
    sdca_update,
    train,
)

__all__ = [
    "Dataset",
    "DualState",
    "LossSpec",
    "MarginVector",
    "Model",
    "ProjectionResult",
    "SolverConfig",
    "TopKSimplexSpec",
    "TrainReport",
    "dual_objective",
    "loss_conjugate",
    "loss_primal",
    "loss_primal_via_lp",
    "oracle_project",
    "predict_scores",
    "primal_objective",
    "project_knapsack",
    "project_knapsack_sorted",
    "project_topk_box",
    "project_topk_cone",
    "project_topk_simplex",
    "read_libsvm",
    "read_model",
    "sdca_update",
    "topk_error",
    "train",
    "write_libsvm",
    "write_model",
]

__version__ = "0.1.0"
