"""Log-likelihoods with analytic gradients and Hessians for each GLM family.

All functions take the design ``X`` (n x p), response ``y`` and a parameter vector.
Only the negative binomial carries an extra parameter: ``log(theta)`` in the last slot.
"""

from __future__ import annotations

import numpy as np
from scipy.special import digamma, expit, gammaln, polygamma

FAMILIES = ("logistic", "poisson", "trunc_poisson", "negbin")

LAMBDA_MIN, LAMBDA_MAX = 1e-10, 1e10
ETA_MIN, ETA_MAX = np.log(LAMBDA_MIN), np.log(LAMBDA_MAX)
LOG_THETA_MIN, LOG_THETA_MAX = np.log(1e-8), np.log(1e8)


def n_extra(family: str) -> int:
    return 1 if family == "negbin" else 0


def _log1mexp(x):
    """log(1 - exp(-x)) for x > 0, accurate at both ends."""
    x = np.asarray(x, dtype=float)
    return np.where(x < np.log(2.0), np.log(-np.expm1(-x)), np.log1p(-np.exp(-x)))


def _rate(X, beta):
    eta = np.clip(X @ beta, ETA_MIN, ETA_MAX)
    return eta, np.exp(eta)


def trunc_mean(lam):
    """E[Y | Y > 0] for Poisson(lam): lam / (1 - exp(-lam))."""
    lam = np.asarray(lam, dtype=float)
    return lam / -np.expm1(-lam)


def trunc_var(lam):
    """Var[Y | Y > 0] = mu (1 + lam - mu) with mu the truncated mean."""
    lam = np.asarray(lam, dtype=float)
    mu = trunc_mean(lam)
    # small-lam series avoids cancellation in 1 + lam - mu
    small = lam < 1e-4
    v = mu * (1.0 + lam - mu)
    return np.where(small, lam / 2.0 + lam ** 2 / 6.0, v)


def trunc_poisson_pmf(k, lam):
    """P(Y = k | Y > 0) for Poisson(lam), k >= 1."""
    k = np.asarray(k, dtype=float)
    return np.exp(k * np.log(lam) - lam - gammaln(k + 1) - _log1mexp(lam))


def loglik_obs(family: str, X, y, params) -> np.ndarray:
    """Per-observation log-likelihood."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if family == "logistic":
        eta = X @ params
        return y * eta - np.logaddexp(0.0, eta)
    if family == "poisson":
        eta, lam = _rate(X, params)
        return y * eta - lam - gammaln(y + 1)
    if family == "trunc_poisson":
        eta, lam = _rate(X, params)
        return y * eta - lam - gammaln(y + 1) - _log1mexp(lam)
    if family == "negbin":
        beta, alpha = params[:-1], params[-1]
        theta = np.exp(alpha)
        eta, mu = _rate(X, beta)
        log_tm = np.logaddexp(alpha, eta)  # log(theta + mu)
        return (gammaln(y + theta) - gammaln(theta) - gammaln(y + 1)
                + theta * (alpha - log_tm) + y * (eta - log_tm))
    raise ValueError(f"unknown family {family!r}")


def loglik(family: str, X, y, params) -> float:
    return float(np.sum(loglik_obs(family, X, y, params)))


def grad_hess(family: str, X, y, params) -> tuple[np.ndarray, np.ndarray]:
    """Gradient and Hessian of the total log-likelihood."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if family == "logistic":
        p = expit(X @ params)
        w = p * (1.0 - p)
        return X.T @ (y - p), -(X.T * w) @ X
    if family == "poisson":
        _, lam = _rate(X, params)
        return X.T @ (y - lam), -(X.T * lam) @ X
    if family == "trunc_poisson":
        _, lam = _rate(X, params)
        return X.T @ (y - trunc_mean(lam)), -(X.T * trunc_var(lam)) @ X
    if family == "negbin":
        beta, alpha = params[:-1], params[-1]
        theta = np.exp(alpha)
        _, mu = _rate(X, beta)
        tm = theta + mu
        s_eta = (y - mu) * theta / tm
        d_eta2 = -mu * theta * (theta + y) / tm ** 2
        # derivatives with respect to theta, then chain rule to alpha = log(theta)
        s_theta = digamma(y + theta) - digamma(theta) + np.log(theta / tm) + 1.0 - (y + theta) / tm
        h_theta = (polygamma(1, y + theta) - polygamma(1, theta) + 1.0 / theta - 1.0 / tm
                   - (mu - y) / tm ** 2)
        d_eta_theta = (y - mu) * mu / tm ** 2
        g_alpha = theta * np.sum(s_theta)
        h_alpha = theta ** 2 * np.sum(h_theta) + g_alpha
        k = X.shape[1]
        g = np.empty(k + 1)
        g[:k] = X.T @ s_eta
        g[k] = g_alpha
        H = np.empty((k + 1, k + 1))
        H[:k, :k] = (X.T * d_eta2) @ X
        cross = theta * (X.T @ d_eta_theta)
        H[:k, k] = cross
        H[k, :k] = cross
        H[k, k] = h_alpha
        return g, H
    raise ValueError(f"unknown family {family!r}")


def mean(family: str, X, params) -> np.ndarray:
    """Model mean of the response for each row."""
    X = np.asarray(X, dtype=float)
    if family == "logistic":
        return expit(X @ params)
    if family == "negbin":
        return _rate(X, params[:-1])[1]
    _, lam = _rate(X, params)
    if family == "trunc_poisson":
        return trunc_mean(lam)
    return lam
