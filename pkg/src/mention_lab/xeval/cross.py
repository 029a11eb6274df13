"""Per-project simplified models and the pairwise cross-project prediction protocol."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from mention_lab.count_models import DesignMatrix, FitResult, ModelError, fit_glm
from mention_lab.xeval.cluster import average_linkage, impute_absent

logger = logging.getLogger(__name__)

SIMPLE_ZERO_COLUMNS = ("oss_rho", "log_social_outdegree", "log_buggy_commits", "log_commits",
                       "github_age_days")
SIMPLE_COUNT_COLUMNS = ("oss_rho", "iss_kappa", "log_social_outdegree", "log_buggy_commits",
                        "log_commits", "log_responsiveness", "github_age_days")


@dataclass
class ProjectTable:
    """Covariate columns and the future-mention response for one project."""

    project: str
    columns: dict[str, np.ndarray]
    y: np.ndarray

    def design(self, names, rows=None) -> DesignMatrix:
        X = np.column_stack([np.ones(len(self.y))] + [np.asarray(self.columns[c], float) for c in names])
        y = np.asarray(self.y, float)
        if rows is not None:
            X, y = X[rows], y[rows]
        return DesignMatrix(X, y, ("intercept", *names))

    def matrix(self, names, rows=None) -> np.ndarray:
        X = np.column_stack([np.ones(len(self.y))] + [np.asarray(self.columns[c], float) for c in names])
        return X if rows is None else X[rows]


def tables_from_features(rows) -> list[ProjectTable]:
    """Group feature rows by project (sorted by project name)."""
    grouped: dict[str, list] = {}
    for r in rows:
        grouped.setdefault(r.project, []).append(r)
    out = []
    for project in sorted(grouped):
        rs = grouped[project]
        names = set(SIMPLE_ZERO_COLUMNS) | set(SIMPLE_COUNT_COLUMNS)
        cols = {c: np.array([getattr(r, c) for r in rs], dtype=float) for c in sorted(names)}
        out.append(ProjectTable(project, cols, np.array([r.future_mentions for r in rs], dtype=float)))
    return out


@dataclass
class ProjectModelPair:
    project: str
    zero: FitResult
    count: FitResult
    table: ProjectTable
    zero_columns: tuple[str, ...] = SIMPLE_ZERO_COLUMNS
    count_columns: tuple[str, ...] = SIMPLE_COUNT_COLUMNS

    def zero_scores(self, table: ProjectTable) -> np.ndarray:
        return self.zero.predict(table.matrix(self.zero_columns))

    def count_predictions(self, table: ProjectTable) -> tuple[np.ndarray, np.ndarray]:
        """Predicted E[y | y > 0] and observed y on ``table``'s positive rows."""
        pos = table.y > 0
        return self.count.predict(table.matrix(self.count_columns, pos)), table.y[pos]


def fit_project_models(tables: list[ProjectTable], min_rows: int = 30,
                       zero_columns=SIMPLE_ZERO_COLUMNS, count_columns=SIMPLE_COUNT_COLUMNS):
    """Fit a logistic zero model and a truncated-Poisson count model per project.

    Returns ``(pairs, excluded)`` where ``excluded`` maps project to the reason it was dropped.
    """
    pairs = []
    excluded: dict[str, str] = {}
    for t in tables:
        n = len(t.y)
        pos = t.y > 0
        if n < min_rows:
            excluded[t.project] = f"only {n} rows (min_rows={min_rows})"
            continue
        if not pos.any() or pos.all():
            excluded[t.project] = "degenerate response"
            continue
        if pos.sum() <= len(count_columns) + 1:
            excluded[t.project] = f"only {int(pos.sum())} positive rows for the count model"
            continue
        try:
            zero = fit_glm(t.design(zero_columns).with_response(pos.astype(float)), "logistic")
            count = fit_glm(t.design(count_columns, pos), "trunc_poisson")
        except ModelError as exc:
            excluded[t.project] = str(exc)
            continue
        if not (zero.converged and count.converged):
            excluded[t.project] = "; ".join(zero.diagnostics + count.diagnostics) or "no convergence"
            continue
        pairs.append(ProjectModelPair(t.project, zero, count, t, tuple(zero_columns), tuple(count_columns)))
    for project, reason in excluded.items():
        logger.info("excluding %s from cross-project evaluation: %s", project, reason)
    return pairs, excluded


def auc(labels, scores) -> float | None:
    """ROC AUC by the Mann-Whitney rank formula; tied scores share their average rank."""
    labels = np.asarray(labels) > 0
    scores = np.asarray(scores, dtype=float)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = rankdata(scores, method="average")
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def mae(y, yhat) -> float:
    y = np.asarray(y, dtype=float)
    return float(np.mean(np.abs(y - np.asarray(yhat, dtype=float))))


@dataclass
class CrossMatrix:
    projects: list[str]
    values: np.ndarray  # NaN marks an absent cell
    metric: str  # "mean_mae" or "mean_auc"
    directed: np.ndarray = field(default=None, repr=False)  # directed[i, j]: model i on data j
    dendrogram_order: list[int] = field(default_factory=list)

    def distances(self) -> np.ndarray:
        v = impute_absent(self.values)
        return v if self.metric == "mean_mae" else 1.0 - v

    def off_diagonal(self) -> np.ndarray:
        mask = ~np.eye(len(self.projects), dtype=bool)
        return self.values[mask]


def cross_predict(pairs: list[ProjectModelPair]) -> tuple[CrossMatrix, CrossMatrix]:
    """Symmetric count-MAE and zero-AUC matrices over every ordered pair of projects.

    Cell (i, j) averages model i on project j's data with model j on project i's data;
    the diagonal holds in-sample values. MAE uses positive-response rows only.
    """
    if len(pairs) < 2:
        raise ValueError("cross-project prediction needs at least two projects")
    n = len(pairs)
    mae_d = np.full((n, n), np.nan)
    auc_d = np.full((n, n), np.nan)
    for i, model in enumerate(pairs):
        for j, target in enumerate(pairs):
            pred, obs = model.count_predictions(target.table)
            if obs.size:
                mae_d[i, j] = mae(obs, pred)
            a = auc(target.table.y > 0, model.zero_scores(target.table))
            if a is not None:
                auc_d[i, j] = a
    names = [p.project for p in pairs]
    count = CrossMatrix(names, (mae_d + mae_d.T) / 2.0, "mean_mae", mae_d)
    zero = CrossMatrix(names, (auc_d + auc_d.T) / 2.0, "mean_auc", auc_d)
    count.dendrogram_order = cluster_order(count)
    zero.dendrogram_order = cluster_order(zero)
    return count, zero


def cluster_order(matrix: CrossMatrix) -> list[int]:
    """Leaf order of an average-linkage clustering of the projects."""
    if len(matrix.projects) < 2:
        return list(range(len(matrix.projects)))
    order, _ = average_linkage(matrix.distances(), matrix.projects)
    return order


def coefficient_table(pairs: list[ProjectModelPair], component: str) -> tuple[list[str], list[str], np.ndarray]:
    """Projects x coefficients matrix for the ``"zero"`` or ``"count"`` component."""
    fits = [getattr(p, component) for p in pairs]
    names = list(fits[0].columns) if fits else []
    values = np.array([[f.coefficients.get(c, np.nan) for c in names] for f in fits])
    return [p.project for p in pairs], names, values.reshape(len(fits), len(names))
