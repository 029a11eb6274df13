"""Cross-project prediction: per-project simplified models, pairwise evaluation, heatmaps."""

from mention_lab.xeval.cluster import Merge, average_linkage, impute_absent
from mention_lab.xeval.cross import (
    SIMPLE_COUNT_COLUMNS,
    SIMPLE_ZERO_COLUMNS,
    CrossMatrix,
    ProjectModelPair,
    ProjectTable,
    auc,
    cluster_order,
    coefficient_table,
    cross_predict,
    fit_project_models,
    mae,
    tables_from_features,
)
from mention_lab.xeval.heatmap import export_coefficients, export_heatmap

__all__ = [
    "Merge", "average_linkage", "impute_absent", "SIMPLE_COUNT_COLUMNS", "SIMPLE_ZERO_COLUMNS",
    "CrossMatrix", "ProjectModelPair", "ProjectTable", "auc", "cluster_order", "coefficient_table",
    "cross_predict", "fit_project_models", "mae", "tables_from_features", "export_coefficients",
    "export_heatmap",
]
