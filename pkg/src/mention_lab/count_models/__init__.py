"""GLM engine: logistic, Poisson, zero-truncated Poisson and negative binomial fits,
hurdle composition, model comparison, VIF screening and BH adjustment."""

from mention_lab.count_models.families import FAMILIES, trunc_mean, trunc_poisson_pmf
from mention_lab.count_models.glm import (
    INTERCEPT,
    DegenerateResponseError,
    DesignMatrix,
    FitResult,
    ModelError,
    RankDeficientError,
    SeparationError,
    aic,
    fit_glm,
)
from mention_lab.count_models.hurdle import (
    COUNT_ONLY_COLUMNS,
    ZERO_ONLY_COLUMNS,
    HurdleFit,
    check_table_columns,
    fit_hurdle,
    predict_from_coefficients,
)
from mention_lab.count_models.multitest import bh_adjust
from mention_lab.count_models.selection import SelectionReport, model_selection, vif_screen, vif_table, vuong_test

__all__ = [
    "FAMILIES", "trunc_mean", "trunc_poisson_pmf", "INTERCEPT", "DegenerateResponseError",
    "DesignMatrix", "FitResult", "ModelError", "RankDeficientError", "SeparationError", "aic",
    "fit_glm", "COUNT_ONLY_COLUMNS", "ZERO_ONLY_COLUMNS", "HurdleFit", "check_table_columns",
    "fit_hurdle", "predict_from_coefficients", "bh_adjust", "SelectionReport", "model_selection",
    "vif_screen", "vif_table", "vuong_test",
]
