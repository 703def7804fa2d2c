"""Metric learning for categorical data via value-difference projections."""

from ._core import (
    CategoricalDataset,
    DataError,
    ExperimentReport,
    MetricKind,
    MetricModel,
    Method,
    NumericalError,
    ProjectedData,
    RademacherEstimate,
    TrainConfig,
    TrainReport,
    VdmModel,
    classification_accuracy,
    dual_exponent,
    empirical_rademacher,
    generate_synthetic,
    knn_predict,
    load_csv,
    load_csv_index,
    noisy_ratio,
    psd_project,
    run_experiment,
    schatten_subgrad,
    schatten_value,
    theorem1_bound,
    theorem2_bound,
    train,
    triplet_accuracy,
    x_star,
)

__version__ = "0.1.0"
