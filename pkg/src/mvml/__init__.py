"""Spectral metric learning from multi-view data and distance-based downstream tasks."""

from .errors import DegenerateModelError, IdxFormatError, InvalidArgument
from .kmeans import ClusteringResult, init_oracle, init_random, kmeans_fit, miscluster_rate
from .knn import KnnConfig, excess_risk, knn_classify, knn_predict, misclassification_rate, select_k_cv
from .model import (
    FactorModelSpec,
    LabeledDataset,
    ModelConfig,
    MultiViewDataset,
    bayes_classify,
    bayes_error,
    build_model,
    sample_labeled,
    sample_multiview,
    target_metrics,
)
from .sampleid import IdThreshold, estimate_threshold, id_power, identify
from .spectral import (
    MahalanobisMetric,
    SpectralEstimate,
    compute_rhat_linear,
    compute_rhat_ustat,
    jacobi_eigh,
    metric_discrepancy,
    spectral_learn,
    sym_eig_top_k,
)
from .twosample import TestResult, asymptotic_test, energy_statistic, permutation_test

__version__ = "0.1.0"

__all__ = [
    "DegenerateModelError",
    "IdxFormatError",
    "InvalidArgument",
    "ClusteringResult",
    "init_oracle",
    "init_random",
    "kmeans_fit",
    "miscluster_rate",
    "KnnConfig",
    "excess_risk",
    "knn_classify",
    "knn_predict",
    "misclassification_rate",
    "select_k_cv",
    "FactorModelSpec",
    "LabeledDataset",
    "ModelConfig",
    "MultiViewDataset",
    "bayes_classify",
    "bayes_error",
    "build_model",
    "sample_labeled",
    "sample_multiview",
    "target_metrics",
    "IdThreshold",
    "estimate_threshold",
    "id_power",
    "identify",
    "MahalanobisMetric",
    "SpectralEstimate",
    "compute_rhat_linear",
    "compute_rhat_ustat",
    "jacobi_eigh",
    "metric_discrepancy",
    "spectral_learn",
    "sym_eig_top_k",
    "TestResult",
    "asymptotic_test",
    "energy_statistic",
    "permutation_test",
]
