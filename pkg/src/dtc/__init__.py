"""Multistage darknet traffic classifier toolkit."""

from .data import (
    ClassTaxonomy,
    Dataset,
    ImputeStrategy,
    NormMethod,
    NormalizationParams,
    RawTable,
    SplitPlan,
    Stage,
    apply_normalizer,
    fit_normalizer,
    impute_missing,
    kfold,
    load_flow_csv,
    stratified_split,
    to_dataset,
)
from .features import (
    BinningSpec,
    FeatureScore,
    ScoreMethod,
    chi_square_stat,
    entropy,
    equal_frequency_bins,
    fisher_score,
    information_gain,
    rank_features,
    select_top_k,
)
from .learners import (
    TrainedModel,
    TreeParams,
    predict,
    predict_proba,
    samme_alpha,
    train_adaboost,
    train_decision_tree,
    train_gaussian_nb,
    train_gradient_boosting,
    train_knn,
    train_random_forest,
)
from .metrics import (
    ConfusionMatrix,
    MetricsReport,
    ReportFormat,
    confusion_matrix,
    cross_validate,
    emit_comparison,
    metrics_from_confusion,
)
from .pipeline import (
    PipelineModel,
    RoutedPrediction,
    Routing,
    StageSpec,
    load_pipeline,
    predict_routed,
    save_pipeline,
    train_pipeline,
    train_stage,
)

__version__ = "0.1.0"
