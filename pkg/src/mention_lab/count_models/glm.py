"""Maximum-likelihood GLM fitting by guarded Newton-Raphson."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from mention_lab.count_models import families as fam
from mention_lab.count_models.multitest import bh_adjust

INTERCEPT = "intercept"


class ModelError(ValueError):
    pass


class RankDeficientError(ModelError):
    pass


class SeparationError(ModelError):
    def __init__(self, column: str):
        super().__init__(f"perfect separation by column {column!r}")
        self.column = column


class DegenerateResponseError(ModelError):
    pass


@dataclass(frozen=True)
class DesignMatrix:
    """Covariates (with a leading intercept column) and a nonnegative integer response."""

    X: np.ndarray
    y: np.ndarray
    columns: tuple[str, ...]

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "columns", tuple(self.columns))
        if X.ndim != 2 or X.shape[1] != len(self.columns):
            raise ModelError("design shape does not match column names")
        if len(set(self.columns)) != len(self.columns):
            raise ModelError("column names must be unique")
        if y.shape != (X.shape[0],):
            raise ModelError("response length does not match design rows")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ModelError("design contains non-finite values")
        if np.any(y < 0) or np.any(y != np.round(y)):
            raise ModelError("response must be nonnegative integers")
        if X.shape[0] <= X.shape[1]:
            raise ModelError(f"need more rows than columns ({X.shape[0]} <= {X.shape[1]})")

    @classmethod
    def build(cls, covariates: dict[str, np.ndarray] | np.ndarray, y, names=None) -> "DesignMatrix":
        """Prepend an intercept to named covariate columns."""
        if isinstance(covariates, dict):
            names = list(covariates)
            cols = [np.asarray(covariates[n], dtype=float) for n in names]
            mat = np.column_stack(cols) if cols else np.empty((len(y), 0))
        else:
            mat = np.asarray(covariates, dtype=float)
            if mat.ndim == 1:
                mat = mat[:, None]
            names = list(names) if names is not None else [f"x{i + 1}" for i in range(mat.shape[1])]
        X = np.column_stack([np.ones(mat.shape[0]), mat])
        return cls(X, np.asarray(y, dtype=float), (INTERCEPT, *names))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def select(self, columns, rows=None) -> "DesignMatrix":
        """Sub-design keeping the intercept plus ``columns`` (and optionally a row mask)."""
        names = [INTERCEPT] + [c for c in columns if c != INTERCEPT]
        missing = [c for c in names if c not in self.columns]
        if missing:
            raise ModelError(f"unknown columns {missing}")
        idx = [self.columns.index(c) for c in names]
        X = self.X[:, idx]
        y = self.y
        if rows is not None:
            X, y = X[rows], y[rows]
        return DesignMatrix(X, y, tuple(names))

    def with_response(self, y) -> "DesignMatrix":
        return DesignMatrix(self.X, np.asarray(y, dtype=float), self.columns)


@dataclass(frozen=True)
class FitResult:
    family: str
    columns: tuple[str, ...]
    coefficients: dict[str, float]
    std_errors: dict[str, float]
    p_values: dict[str, float]
    p_adjusted: dict[str, float]
    log_likelihood: float
    aic: float
    converged: bool
    iterations: int
    n_obs: int
    theta: float | None = None
    grad_norm: float = float("nan")
    scaling: dict[str, tuple[float, float]] = field(default_factory=dict)
    diagnostics: tuple[str, ...] = ()

    @property
    def n_params(self) -> int:
        return len(self.columns) + fam.n_extra(self.family)

    @property
    def params(self) -> np.ndarray:
        vec = [self.coefficients[c] for c in self.columns]
        if self.family == "negbin":
            vec.append(math.log(self.theta))
        return np.array(vec)

    def _design(self, X) -> np.ndarray:
        if isinstance(X, DesignMatrix):
            if X.columns[:len(self.columns)] != self.columns:
                X = X.select(self.columns[1:])
            return X.X
        return np.asarray(X, dtype=float)

    def predict(self, X) -> np.ndarray:
        """Mean response: P(y=1) for logistic, E[y | y>0] for trunc_poisson, E[y] otherwise."""
        return fam.mean(self.family, self._design(X), self.params)

    def loglik_obs(self, X, y=None) -> np.ndarray:
        if y is None:
            y = X.y
        return fam.loglik_obs(self.family, self._design(X), y, self.params)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "columns": list(self.columns),
            "coefficients": dict(self.coefficients),
            "std_errors": dict(self.std_errors),
            "p_values": dict(self.p_values),
            "p_adjusted": dict(self.p_adjusted),
            "log_likelihood": self.log_likelihood,
            "aic": self.aic,
            "converged": self.converged,
            "iterations": self.iterations,
            "n_obs": self.n_obs,
            "theta": self.theta,
            "grad_norm": self.grad_norm,
            "scaling": {k: list(v) for k, v in self.scaling.items()},
            "diagnostics": list(self.diagnostics),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FitResult":
        return cls(
            family=d["family"], columns=tuple(d["columns"]), coefficients=dict(d["coefficients"]),
            std_errors=dict(d["std_errors"]), p_values=dict(d["p_values"]),
            p_adjusted=dict(d["p_adjusted"]), log_likelihood=d["log_likelihood"], aic=d["aic"],
            converged=d["converged"], iterations=d["iterations"], n_obs=d["n_obs"],
            theta=d.get("theta"), grad_norm=d.get("grad_norm", float("nan")),
            scaling={k: tuple(v) for k, v in d.get("scaling", {}).items()},
            diagnostics=tuple(d.get("diagnostics", ())),
        )


def aic(n_params: int, log_likelihood: float) -> float:
    return 2.0 * n_params - 2.0 * log_likelihood


def _scaling(X: np.ndarray, columns) -> tuple[np.ndarray, np.ndarray]:
    """Center/scale continuous columns; intercept and 0/1 columns are left alone."""
    center = np.zeros(X.shape[1])
    scale = np.ones(X.shape[1])
    for j, name in enumerate(columns):
        if name == INTERCEPT:
            continue
        col = X[:, j]
        if np.all((col == 0) | (col == 1)):
            continue
        sd = col.std()
        if sd > 0:
            center[j] = col.mean()
            scale[j] = sd
    return center, scale


def _unscale_matrix(center, scale, columns, extra: int) -> np.ndarray:
    """Linear map from scaled-coordinate parameters to original-coordinate parameters."""
    k = len(columns)
    T = np.eye(k + extra)
    icpt = columns.index(INTERCEPT) if INTERCEPT in columns else None
    for j in range(k):
        T[j, j] = 1.0 / scale[j]
        if icpt is not None and j != icpt:
            T[icpt, j] = -center[j] / scale[j]
    return T


def _check_separation(X, y, columns):
    pos, neg = y > 0.5, y <= 0.5
    for j, name in enumerate(columns):
        if name == INTERCEPT:
            continue
        col = X[:, j]
        if col[pos].min() > col[neg].max() or col[pos].max() < col[neg].min():
            raise SeparationError(name)


def _start(family, X, y, columns):
    k = X.shape[1]
    beta = np.zeros(k)
    icpt = columns.index(INTERCEPT) if INTERCEPT in columns else None
    ybar = float(y.mean())
    if icpt is not None:
        if family == "logistic":
            beta[icpt] = math.log(ybar / (1.0 - ybar))
        elif family == "trunc_poisson":
            beta[icpt] = math.log(max(ybar - 0.5, 0.1))
        else:
            beta[icpt] = math.log(max(ybar, 1e-3))
    return beta


def _newton(family, X, y, params, max_iter, tol, fixed_tail: int = 0):
    """Guarded Newton ascent. ``fixed_tail`` trailing parameters are held constant."""
    free = len(params) - fixed_tail
    ll = fam.loglik(family, X, y, params)
    it = 0
    gnorm = float("inf")
    for it in range(1, max_iter + 1):
        g, H = fam.grad_hess(family, X, y, params)
        g, H = g[:free], H[:free, :free]
        gnorm = float(np.linalg.norm(g))
        if gnorm < tol:
            return params, ll, it - 1, gnorm, True
        step = _ascent_step(g, H)
        t = 1.0
        improved = False
        for _ in range(40):
            cand = params.copy()
            cand[:free] = params[:free] + t * step
            if family == "negbin" and fixed_tail == 0:
                cand[-1] = np.clip(cand[-1], fam.LOG_THETA_MIN, fam.LOG_THETA_MAX)
            cll = fam.loglik(family, X, y, cand)
            if np.isfinite(cll) and cll >= ll - 1e-12 * max(1.0, abs(ll)):
                improved = True
                break
            t *= 0.5
        if not improved:
            # no ascent possible at machine precision; accept if the Newton decrement is negligible
            dec = float(g @ step)
            return params, ll, it, gnorm, dec < 1e-12 * max(1.0, abs(ll))
        params, prev, ll = cand, ll, cll
        if abs(ll - prev) <= 1e-15 * max(1.0, abs(ll)) and float(np.linalg.norm(t * step)) < 1e-12:
            g, _ = fam.grad_hess(family, X, y, params)
            gnorm = float(np.linalg.norm(g[:free]))
            return params, ll, it, gnorm, gnorm < tol or gnorm < 1e-6
    g, _ = fam.grad_hess(family, X, y, params)
    gnorm = float(np.linalg.norm(g[:free]))
    return params, ll, it, gnorm, gnorm < tol


def _ascent_step(g, H):
    """Newton direction for maximization, ridged until -H is positive definite."""
    A = -H
    ridge = 0.0
    eye = np.eye(len(g))
    for _ in range(30):
        try:
            L = np.linalg.cholesky(A + ridge * eye)
            return np.linalg.solve(L.T, np.linalg.solve(L, g))
        except np.linalg.LinAlgError:
            ridge = max(ridge * 10.0, 1e-8 * max(1.0, float(np.abs(np.diag(A)).max())))
    return g / max(1.0, float(np.linalg.norm(g)))


def _validate_response(family, y):
    if family == "logistic":
        if not np.all((y == 0) | (y == 1)):
            raise ModelError("logistic response must be 0/1")
        if y.min() == y.max():
            raise DegenerateResponseError("degenerate response: all outcomes identical")
    elif family == "trunc_poisson":
        if np.any(y < 1):
            raise ModelError("trunc_poisson response must be >= 1")
    elif family not in fam.FAMILIES:
        raise ModelError(f"unknown family {family!r}")


def fit_glm(design: DesignMatrix, family: str, *, max_iter: int = 100, tol: float = 1e-8,
            scale: bool = True) -> FitResult:
    """Fit one GLM by maximum likelihood.

    Continuous covariates are standardized for the optimization and the estimates are
    mapped back, so reported coefficients and standard errors are on the original scale.
    Standard errors come from the inverse observed information; p-values are two-sided
    Wald tests, BH-adjusted across the model's coefficients.
    """
    X, y, columns = design.X, design.y, design.columns
    _validate_response(family, y)
    if scale:
        center, spread = _scaling(X, columns)
    else:
        center, spread = np.zeros(X.shape[1]), np.ones(X.shape[1])
    Z = (X - center) / spread
    if np.linalg.matrix_rank(Z) < Z.shape[1]:
        raise RankDeficientError("rank deficient: design columns are linearly dependent")
    if family == "logistic":
        _check_separation(X, y, columns)

    diagnostics = []
    beta = _start(family, Z, y, columns)
    if family == "negbin":
        params, ll, iters, gnorm, ok = _fit_negbin(Z, y, beta, max_iter, tol)
    else:
        params, ll, iters, gnorm, ok = _newton(family, Z, y, beta, max_iter, tol)
    if not ok:
        diagnostics.append(f"no convergence after {iters} iterations (gradient norm {gnorm:.3g})")
    if family == "logistic" and not ok:
        eta = Z @ params
        if np.max(np.abs(eta)) > 25:
            worst = int(np.argmax(np.abs(params) * (np.array(columns) != INTERCEPT)))
            raise SeparationError(columns[worst])

    _, H = fam.grad_hess(family, Z, y, params)
    try:
        cov = _inverse_information(H)
    except np.linalg.LinAlgError:
        if family != "negbin":
            raise RankDeficientError("rank deficient: observed information is singular") from None
        # theta drifting to infinity (equidispersed data) leaves no curvature in log(theta);
        # report beta standard errors conditional on the fitted theta
        try:
            cov = np.zeros_like(H)
            cov[:-1, :-1] = _inverse_information(H[:-1, :-1])
        except np.linalg.LinAlgError:
            raise RankDeficientError("rank deficient: observed information is singular") from None
        diagnostics.append("no curvature in theta (data look equidispersed); "
                           "standard errors are conditional on theta")
    extra = fam.n_extra(family)
    T = _unscale_matrix(center, spread, columns, extra)
    est = T @ params
    cov = T @ cov @ T.T
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    k = len(columns)
    coef = {c: float(est[j]) for j, c in enumerate(columns)}
    ses = {c: float(se[j]) for j, c in enumerate(columns)}
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.abs(est[:k] / se[:k])
    pvals = np.array([math.erfc(v / math.sqrt(2.0)) if np.isfinite(v) else 1.0 for v in z])
    padj = bh_adjust(pvals)
    theta = float(math.exp(params[-1])) if family == "negbin" else None
    n_params = k + extra
    return FitResult(
        family=family, columns=columns, coefficients=coef, std_errors=ses,
        p_values={c: float(pvals[j]) for j, c in enumerate(columns)},
        p_adjusted={c: float(padj[j]) for j, c in enumerate(columns)},
        log_likelihood=float(ll), aic=aic(n_params, float(ll)), converged=bool(ok),
        iterations=int(iters), n_obs=int(len(y)), theta=theta, grad_norm=float(gnorm),
        scaling={c: (float(center[j]), float(spread[j])) for j, c in enumerate(columns)
                 if c != INTERCEPT},
        diagnostics=tuple(diagnostics),
    )


def _inverse_information(H: np.ndarray) -> np.ndarray:
    """Inverse of the observed information ``-H``; raises LinAlgError unless it is positive definite."""
    L = np.linalg.cholesky(-H)
    inv_l = np.linalg.inv(L)
    return inv_l.T @ inv_l


def _fit_negbin(Z, y, beta0, max_iter, tol):
    """Profile fit: alternate beta Newton steps at fixed theta with a theta line search,
    then polish jointly."""
    pois, _, it0, _, _ = _newton("poisson", Z, y, beta0, max_iter, 1e-6)
    mu = fam.mean("poisson", Z, pois)
    excess = float(np.sum((y - mu) ** 2 - y))
    theta0 = float(np.sum(mu ** 2)) / excess if excess > 0 else 1e4
    params = np.append(pois, np.clip(math.log(theta0), fam.LOG_THETA_MIN, fam.LOG_THETA_MAX))
    iters = it0
    ll = fam.loglik("negbin", Z, y, params)
    for _ in range(50):
        params, _, it, _, _ = _newton("negbin", Z, y, params, 5, tol, fixed_tail=1)
        iters += it
        params = _theta_search(Z, y, params)
        new_ll = fam.loglik("negbin", Z, y, params)
        if abs(new_ll - ll) < 1e-9 * max(1.0, abs(ll)):
            ll = new_ll
            break
        ll = new_ll
    params, ll, it, gnorm, ok = _newton("negbin", Z, y, params, max_iter, tol)
    return params, ll, iters + it, gnorm, ok


def _theta_search(Z, y, params):
    """One-dimensional Newton on log(theta) with step halving, beta held fixed."""
    params = params.copy()
    ll = fam.loglik("negbin", Z, y, params)
    for _ in range(30):
        g, H = fam.grad_hess("negbin", Z, y, params)
        ga, ha = g[-1], H[-1, -1]
        step = -ga / ha if ha < 0 else np.sign(ga)
        t = 1.0
        for _ in range(40):
            cand = params.copy()
            cand[-1] = np.clip(params[-1] + t * step, fam.LOG_THETA_MIN, fam.LOG_THETA_MAX)
            cll = fam.loglik("negbin", Z, y, cand)
            if cll >= ll:
                break
            t *= 0.5
        else:
            return params
        if abs(cand[-1] - params[-1]) < 1e-10:
            return cand
        params, ll = cand, cll
    return params
