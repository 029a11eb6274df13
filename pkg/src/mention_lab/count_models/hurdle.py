"""Two-part hurdle model: logistic for y > 0, zero-truncated Poisson for the positive counts."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from mention_lab.count_models.glm import (
    DegenerateResponseError,
    DesignMatrix,
    FitResult,
    aic,
    fit_glm,
)
from mention_lab.count_models.multitest import bh_adjust

# Column roles in the pooled future-@-mention model. The zero part has no
# responsiveness, inward call focus, or observed-mention terms, and is the
# only part with the squared age term.
ZERO_ONLY_COLUMNS = ("github_age_days_sq",)
COUNT_ONLY_COLUMNS = ("log_observed_mentions", "iss_kappa", "log_responsiveness")


@dataclass(frozen=True)
class HurdleFit:
    zero: FitResult
    count: FitResult
    zero_columns: tuple[str, ...]
    count_columns: tuple[str, ...]

    @property
    def log_likelihood(self) -> float:
        return self.zero.log_likelihood + self.count.log_likelihood

    @property
    def n_params(self) -> int:
        return self.zero.n_params + self.count.n_params

    @property
    def aic(self) -> float:
        return aic(self.n_params, self.log_likelihood)

    @property
    def converged(self) -> bool:
        return self.zero.converged and self.count.converged

    def p_first(self, design: DesignMatrix) -> np.ndarray:
        return self.zero.predict(design.select(self.zero_columns))

    def count_mean(self, design: DesignMatrix) -> np.ndarray:
        return self.count.predict(design.select(self.count_columns))

    def predict(self, design: DesignMatrix) -> np.ndarray:
        """E[y] = P(y > 0) * E[y | y > 0]."""
        return self.p_first(design) * self.count_mean(design)

    def loglik_obs(self, design: DesignMatrix) -> np.ndarray:
        y = design.y
        pos = y > 0
        zero_ll = self.zero.loglik_obs(design.select(self.zero_columns), pos.astype(float))
        out = zero_ll.copy()
        if pos.any():
            out[pos] += self.count.loglik_obs(design.select(self.count_columns).X[pos], y[pos])
        return out

    def to_dict(self) -> dict:
        return {"model": "hurdle", "zero": self.zero.to_dict(), "count": self.count.to_dict(),
                "zero_columns": list(self.zero_columns), "count_columns": list(self.count_columns),
                "log_likelihood": self.log_likelihood, "aic": self.aic, "converged": self.converged}

    @classmethod
    def from_dict(cls, d: dict) -> "HurdleFit":
        return cls(FitResult.from_dict(d["zero"]), FitResult.from_dict(d["count"]),
                   tuple(d["zero_columns"]), tuple(d["count_columns"]))


def fit_hurdle(design: DesignMatrix, zero_columns, count_columns, **kwargs) -> HurdleFit:
    """Fit the zero component on every row and the count component on rows with y > 0.

    The two parts share no parameters, so they are fitted independently. p-values are
    BH-adjusted jointly over both components.
    """
    y = design.y
    pos = y > 0
    if not pos.any():
        raise DegenerateResponseError("degenerate response: every y is 0")
    if pos.all():
        raise DegenerateResponseError("degenerate response: no zeros for the zero component")
    zero_cols = tuple(c for c in zero_columns if c != "intercept")
    count_cols = tuple(c for c in count_columns if c != "intercept")
    zero = fit_glm(design.select(zero_cols).with_response(pos.astype(float)), "logistic", **kwargs)
    count = fit_glm(design.select(count_cols, rows=pos), "trunc_poisson", **kwargs)

    raw = [zero.p_values[c] for c in zero.columns] + [count.p_values[c] for c in count.columns]
    adj = bh_adjust(raw)
    nz = len(zero.columns)
    zero = replace(zero, p_adjusted={c: float(adj[i]) for i, c in enumerate(zero.columns)})
    count = replace(count, p_adjusted={c: float(adj[nz + i]) for i, c in enumerate(count.columns)})
    return HurdleFit(zero, count, zero_cols, count_cols)


def check_table_columns(zero_columns, count_columns) -> None:
    """Enforce the pooled-model column roles; raises ``ValueError`` on a violation."""
    zero, count = set(zero_columns), set(count_columns)
    for c in ZERO_ONLY_COLUMNS:
        if c not in zero:
            raise ValueError(f"zero component must include {c}")
        if c in count:
            raise ValueError(f"{c} belongs only in the zero component")
    for c in COUNT_ONLY_COLUMNS:
        if c not in count:
            raise ValueError(f"count component must include {c}")
        if c in zero:
            raise ValueError(f"{c} belongs only in the count component")


def predict_from_coefficients(zero_coef: dict, count_coef: dict, row: dict) -> dict:
    """Closed-form hurdle prediction for one feature row from coefficient maps."""
    missing = sorted({c for c in list(zero_coef) + list(count_coef) if c != "intercept"} - set(row))
    if missing:
        raise KeyError(f"feature row is missing columns: {', '.join(missing)}")
    eta_z = sum(v * (1.0 if c == "intercept" else float(row[c])) for c, v in zero_coef.items())
    eta_c = sum(v * (1.0 if c == "intercept" else float(row[c])) for c, v in count_coef.items())
    p = 1.0 / (1.0 + math.exp(-eta_z)) if eta_z >= 0 else math.exp(eta_z) / (1.0 + math.exp(eta_z))
    lam = math.exp(min(max(eta_c, math.log(1e-10)), math.log(1e10)))
    count = lam / -math.expm1(-lam)
    return {"p_first_mention": p, "expected_count": count, "expected_mentions": p * count}
