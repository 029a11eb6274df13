"""Simulators drawing data from known generating parameters (the oracle for recovery tests)."""

from __future__ import annotations

import numpy as np

from mention_lab.count_models import DesignMatrix

TRUTH = {
    "logistic": np.array([0.1, 0.5, -0.3]),
    "poisson": np.array([0.5, 0.3, -0.2]),
    "trunc_poisson": np.array([0.7, 0.3, -0.2]),
    "negbin": np.array([0.5, 0.3, -0.2]),
}
NEGBIN_THETA = 2.0
HURDLE_ZERO = np.array([0.2, 0.6, -0.4])
HURDLE_COUNT = np.array([0.8, 0.25, -0.3])


def trunc_poisson(rng, lam):
    """Zero-truncated Poisson draws by rejection."""
    y = rng.poisson(lam)
    bad = y == 0
    while bad.any():
        y[bad] = rng.poisson(lam[bad])
        bad = y == 0
    return y


def _covariates(rng, n):
    X = rng.standard_normal((n, 2))
    return X, np.column_stack([np.ones(n), X])


def simulate_family(family: str, seed: int, n: int = 20_000) -> DesignMatrix:
    rng = np.random.default_rng(seed)
    X, Z = _covariates(rng, n)
    eta = Z @ TRUTH[family]
    if family == "logistic":
        y = (rng.random(n) < 1.0 / (1.0 + np.exp(-eta))).astype(float)
    elif family == "poisson":
        y = rng.poisson(np.exp(eta))
    elif family == "trunc_poisson":
        y = trunc_poisson(rng, np.exp(eta))
    elif family == "negbin":
        mu = np.exp(eta)
        y = rng.poisson(rng.gamma(NEGBIN_THETA, mu / NEGBIN_THETA))
    else:
        raise ValueError(family)
    return DesignMatrix.build({"x1": X[:, 0], "x2": X[:, 1]}, y)


def simulate_hurdle(seed: int, n: int = 20_000) -> DesignMatrix:
    """Two-stage draw: a logistic hurdle, then zero-truncated Poisson counts past it."""
    rng = np.random.default_rng(seed)
    X, Z = _covariates(rng, n)
    passed = rng.random(n) < 1.0 / (1.0 + np.exp(-(Z @ HURDLE_ZERO)))
    y = np.zeros(n)
    y[passed] = trunc_poisson(rng, np.exp(Z[passed] @ HURDLE_COUNT))
    return DesignMatrix.build({"x1": X[:, 0], "x2": X[:, 1]}, y)


def within(fit, truth, tol=0.05, n_se=3.0) -> bool:
    est = np.array([fit.coefficients[c] for c in fit.columns])
    se = np.array([fit.std_errors[c] for c in fit.columns])
    err = np.abs(est - truth)
    return bool(fit.converged and np.all(err <= tol) and np.all(err <= n_se * se))


# ------------------------------------------------------------------ cross-project tables

XEVAL_ZERO = {"intercept": 0.0, "oss_rho": 1.8, "log_social_outdegree": 1.2, "log_buggy_commits": -1.2,
              "log_commits": 1.2, "github_age_days": 1.0}
XEVAL_COUNT = {"intercept": 0.5, "oss_rho": 0.3, "iss_kappa": -0.2, "log_social_outdegree": 0.2,
               "log_buggy_commits": 0.1, "log_commits": -0.1, "log_responsiveness": 0.2,
               "github_age_days": 0.1}


def simulate_project(name: str, seed: int, n: int = 2000, invert: bool = False):
    """A ProjectTable drawn from the shared hurdle parameters (slopes negated if ``invert``)."""
    from mention_lab.xeval import ProjectTable

    rng = np.random.default_rng(seed)
    names = sorted(set(XEVAL_ZERO) | set(XEVAL_COUNT) - {"intercept"})
    cols = {c: rng.standard_normal(n) for c in names}
    sign = -1.0 if invert else 1.0

    def eta(params):
        return params["intercept"] + sign * sum(v * cols[c] for c, v in params.items() if c != "intercept")

    passed = rng.random(n) < 1.0 / (1.0 + np.exp(-eta(XEVAL_ZERO)))
    y = np.zeros(n)
    y[passed] = trunc_poisson(rng, np.exp(eta(XEVAL_COUNT)[passed]))
    return ProjectTable(name, cols, y)
