"""Model comparison (AIC, Vuong) and VIF-based covariate screening."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from mention_lab.count_models.glm import INTERCEPT, DesignMatrix, fit_glm
from mention_lab.count_models.hurdle import fit_hurdle

logger = logging.getLogger(__name__)

VIF_THRESHOLD = 4.0
VIF_TIE_RTOL = 0.01


def vuong_test(ll_a, ll_b) -> tuple[float, float] | None:
    """Vuong statistic and two-sided p-value from per-observation log-likelihoods.

    Positive values favour model A. Returns ``None`` when the differences have no variance.
    """
    d = np.asarray(ll_a, dtype=float) - np.asarray(ll_b, dtype=float)
    n = d.size
    sd = d.std(ddof=1) if n > 1 else 0.0
    if not np.isfinite(sd) or sd <= 1e-12 * max(1.0, float(np.abs(d).max(initial=0.0))):
        return None
    v = math.sqrt(n) * float(d.mean()) / float(sd)
    return v, math.erfc(abs(v) / math.sqrt(2.0))


@dataclass
class SelectionReport:
    aic: dict[str, float]
    n_params: dict[str, int]
    log_likelihood: dict[str, float]
    vuong: dict[str, tuple[float, float] | None] = field(default_factory=dict)
    preferred: str = ""
    fits: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"aic": self.aic, "n_params": self.n_params, "log_likelihood": self.log_likelihood,
                "vuong": {k: (list(v) if v else None) for k, v in self.vuong.items()},
                "preferred": self.preferred}


def model_selection(design: DesignMatrix, candidates=("poisson", "negbin", "hurdle"),
                    zero_columns=None, count_columns=None) -> SelectionReport:
    """Fit each candidate on the same rows; prefer the lowest AIC.

    Vuong statistics are keyed ``"A vs B"`` (positive favours A).
    """
    covs = [c for c in design.columns if c != INTERCEPT]
    fits = {}
    ll_obs = {}
    for name in candidates:
        if name == "hurdle":
            fit = fit_hurdle(design, zero_columns or covs, count_columns or covs)
            ll_obs[name] = fit.loglik_obs(design)
        else:
            fit = fit_glm(design, name)
            ll_obs[name] = fit.loglik_obs(design)
        fits[name] = fit
    report = SelectionReport(
        aic={k: f.aic for k, f in fits.items()},
        n_params={k: f.n_params for k, f in fits.items()},
        log_likelihood={k: f.log_likelihood for k, f in fits.items()},
        fits=fits,
    )
    names = list(candidates)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            report.vuong[f"{a} vs {b}"] = vuong_test(ll_obs[a], ll_obs[b])
    report.preferred = min(names, key=lambda k: (report.aic[k], names.index(k)))
    return report


def vif_table(X: np.ndarray, names) -> dict[str, float]:
    """VIF of each column from an OLS regression (with intercept) on the remaining columns."""
    X = np.asarray(X, dtype=float)
    out = {}
    n = X.shape[0]
    for j, name in enumerate(names):
        target = X[:, j]
        others = np.delete(X, j, axis=1)
        A = np.column_stack([np.ones(n), others])
        coef, *_ = np.linalg.lstsq(A, target, rcond=None)
        resid = target - A @ coef
        tss = float(np.sum((target - target.mean()) ** 2))
        rss = float(np.sum(resid ** 2))
        if tss <= 0 or rss <= 1e-12 * tss:
            out[name] = math.inf
        else:
            out[name] = tss / rss
    return out


def vif_screen(X, names, protected=(), threshold: float = VIF_THRESHOLD):
    """Iteratively drop the highest-VIF unprotected column until all unprotected VIF <= threshold.

    Returns ``(kept_names, table)``; ``table`` has one row per original column with its
    initial VIF, final VIF (None if dropped) and the step at which it was dropped.
    """
    X = np.asarray(X, dtype=float)
    names = [n for n in names]
    if len([n for n in names if n != INTERCEPT]) < 2:
        raise ValueError("VIF screening needs at least two non-intercept columns")
    if INTERCEPT in names:
        keep_idx = [i for i, n in enumerate(names) if n != INTERCEPT]
        X = X[:, keep_idx]
        names = [names[i] for i in keep_idx]
    protected = set(protected)
    initial = vif_table(X, names)
    kept = list(names)
    dropped_at: dict[str, int] = {}
    step = 0
    current = dict(initial)
    while len(kept) > 1:
        cands = [n for n in kept if n not in protected]
        if not cands:
            break
        worst = max(cands, key=lambda n: (current[n], kept.index(n)))
        top = current[worst]
        # near-equal VIFs (within 1%, e.g. a near-duplicate pair): drop the later column
        tied = [n for n in cands if math.isinf(top) and math.isinf(current[n])
                or (not math.isinf(top) and abs(current[n] - top) <= VIF_TIE_RTOL * top)]
        worst = max(tied, key=kept.index)
        if current[worst] <= threshold:
            break
        if math.isinf(current[worst]):
            logger.warning("column %s is exactly collinear with others; dropping it", worst)
        step += 1
        dropped_at[worst] = step
        kept.remove(worst)
        idx = [names.index(n) for n in kept]
        current = vif_table(X[:, idx], kept) if len(kept) > 1 else {kept[0]: 1.0}
    table = [{"column": n, "vif_initial": initial[n], "vif_final": current.get(n) if n in kept else None,
              "dropped_at_step": dropped_at.get(n), "protected": n in protected} for n in names]
    return kept, table
