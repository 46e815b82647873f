from .metrics import (
    CLASSIFICATION_METRICS,
    DIRECTION,
    METRICS,
    REGRESSION_METRICS,
    holdout_score,
    kfold_cv,
    metric,
)
from .models import (
    FAMILIES,
    ModelSpec,
    Predictions,
    TrainedModel,
    load_model,
    logistic_loss_and_grad,
    predict,
    predictions_to_csv,
    save_model,
    train,
)
from .search import (
    Choice,
    IntRange,
    LogUniform,
    SearchSpace,
    TuneResult,
    Uniform,
    random_search,
    sample_specs,
    successive_halving,
)

__all__ = [
    "CLASSIFICATION_METRICS", "DIRECTION", "METRICS", "REGRESSION_METRICS",
    "holdout_score", "kfold_cv", "metric", "FAMILIES", "ModelSpec",
    "Predictions", "TrainedModel", "load_model", "logistic_loss_and_grad",
    "predict", "predictions_to_csv", "save_model", "train", "Choice",
    "IntRange", "LogUniform", "SearchSpace", "TuneResult", "Uniform",
    "random_search", "sample_specs", "successive_halving",
]
