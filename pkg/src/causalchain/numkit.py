"""Dense least squares and logistic maximum likelihood.

Both fitters scale the design columns internally (exactly undone afterwards) so
that raw covariates such as birth weight squared do not wreck the conditioning.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NonConvergence, RankDeficient, Separation

RANK_TOL = 1e-10
PIN_TOL = 1e-10


@dataclass
class DesignMatrix:
    values: np.ndarray
    column_labels: list

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise DimensionMismatch("design matrix must be two-dimensional")
        if len(self.column_labels) != self.values.shape[1]:
            raise DimensionMismatch(
                f"{len(self.column_labels)} labels for {self.values.shape[1]} columns")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("design matrix has non-finite entries")

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def columns(self) -> int:
        return self.values.shape[1]

    @classmethod
    def build(cls, *blocks, labels=None, intercept=True) -> "DesignMatrix":
        """Stack 1-d or 2-d blocks column-wise, optionally behind an intercept."""
        cols = []
        for b in blocks:
            b = np.asarray(b, dtype=float)
            cols.append(b[:, None] if b.ndim == 1 else b)
        n = cols[0].shape[0] if cols else 0
        if intercept:
            cols.insert(0, np.ones((n, 1)))
        values = np.hstack(cols) if cols else np.empty((n, 0))
        if labels is None:
            labels = [f"x{j}" for j in range(values.shape[1] - intercept)]
        labels = (["(intercept)"] if intercept else []) + list(labels)
        return cls(values, labels)


@dataclass
class RegressionFit:
    coefficients: np.ndarray
    covariance: np.ndarray
    link: str
    converged: bool = True
    n_iterations: int = 0
    column_labels: list = field(default_factory=list)
    loglik_path: list = field(default_factory=list)
    sigma2: float = float("nan")

    def coef(self, label: str) -> float:
        return float(self.coefficients[self.column_labels.index(label)])

    def se(self, label: str) -> float:
        j = self.column_labels.index(label)
        return float(np.sqrt(self.covariance[j, j]))


def _scales(X):
    s = np.sqrt(np.mean(X * X, axis=0))
    s[s == 0] = 1.0
    return s


def _check_rank(R, labels, piv):
    d = np.abs(np.diag(R))
    if d.size == 0:
        return
    bad = d < RANK_TOL * max(d[0], 1e-300)
    if bad.any():
        names = [labels[piv[j]] for j in np.flatnonzero(bad)]
        raise RankDeficient(f"collinear design columns: {', '.join(names)}", names)


def _as_design(X):
    if isinstance(X, DesignMatrix):
        return X
    X = np.asarray(X, dtype=float)
    return DesignMatrix(X, [f"x{j}" for j in range(X.shape[1])])


def ols_fit(X, y, weights=None) -> RegressionFit:
    """Least squares by pivoted QR; covariance is sigma^2 (X'X)^-1.

    With ``weights`` the fit is weighted least squares and ``sigma2`` the weighted
    residual mean square.
    """
    X = _as_design(X)
    y = np.asarray(y, dtype=float)
    n, p = X.values.shape
    if y.shape != (n,):
        raise DimensionMismatch(f"y has shape {y.shape}, design has {n} rows")
    if n <= p:
        raise DimensionMismatch(f"need more rows ({n}) than columns ({p})")
    s = _scales(X.values)
    Xs = X.values / s
    if weights is not None:
        rw = np.sqrt(np.asarray(weights, dtype=float))
        Xs, yw = Xs * rw[:, None], y * rw
    else:
        yw = y
    Q, R, piv = scipy.linalg.qr(Xs, mode="economic", pivoting=True)
    _check_rank(R, X.column_labels, piv)
    b_piv = scipy.linalg.solve_triangular(R, Q.T @ yw)
    beta_s = np.empty(p)
    beta_s[piv] = b_piv
    resid = yw - Xs @ beta_s
    sigma2 = float(resid @ resid) / (n - p)
    Rinv = scipy.linalg.solve_triangular(R, np.eye(p))
    cov_piv = Rinv @ Rinv.T
    cov_s = np.empty((p, p))
    cov_s[np.ix_(piv, piv)] = cov_piv
    beta = beta_s / s
    cov = sigma2 * cov_s / np.outer(s, s)
    return RegressionFit(beta, cov, "identity", True, 1, list(X.column_labels), sigma2=sigma2)


def _loglik(eta, y):
    # log(1 + exp(eta)) computed stably
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def logistic_fit(X, y, max_iter: int = 100, score_tol: float = 1e-8, rel_tol: float = 1e-10) -> RegressionFit:
    """Bernoulli maximum likelihood by IRLS with step halving."""
    X = _as_design(X)
    y = np.asarray(y, dtype=float)
    n, p = X.values.shape
    if y.shape != (n,):
        raise DimensionMismatch(f"y has shape {y.shape}, design has {n} rows")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("logistic response must be 0/1")
    if y.min() == y.max():
        raise Separation("response has a single class")
    s = _scales(X.values)
    Xs = X.values / s
    # rank check on the unweighted design
    _, R0, piv0 = scipy.linalg.qr(Xs, mode="economic", pivoting=True)
    _check_rank(R0, X.column_labels, piv0)

    beta = np.zeros(p)
    eta = Xs @ beta
    ll = _loglik(eta, y)
    path = [ll]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        mu = 1.0 / (1.0 + np.exp(-eta))
        w = mu * (1.0 - mu)
        score = Xs.T @ (y - mu)
        rw = np.sqrt(w)
        step, *_ = np.linalg.lstsq(Xs * rw[:, None], (y - mu) / np.where(rw > 0, rw, 1.0), rcond=None)
        t = 1.0
        for _ in range(60):
            cand = beta + t * step
            eta_c = Xs @ cand
            ll_c = _loglik(eta_c, y)
            if ll_c >= ll - 1e-12 * abs(ll):
                break
            t *= 0.5
        else:
            raise NonConvergence("step halving failed to increase the likelihood")
        change = abs(ll_c - ll) / (abs(ll) + 1e-300)
        beta, eta, ll = cand, eta_c, max(ll_c, ll)
        path.append(ll)
        mu = 1.0 / (1.0 + np.exp(-eta))
        score = Xs.T @ (y - mu)
        if np.max(np.abs(score)) < score_tol or change < rel_tol:
            converged = True
            break
    if np.any(mu < PIN_TOL) or np.any(mu > 1.0 - PIN_TOL):
        raise Separation("fitted probabilities pinned at 0 or 1: the classes are (quasi-)separated")
    if not converged:
        raise NonConvergence(f"IRLS did not converge in {max_iter} iterations")
    w = mu * (1.0 - mu)
    info = (Xs * w[:, None]).T @ Xs
    cov_s = np.linalg.inv(info)
    cov_s = 0.5 * (cov_s + cov_s.T)
    return RegressionFit(beta / s, cov_s / np.outer(s, s), "logit", True, it,
                         list(X.column_labels), loglik_path=path)


def expit(x):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=float)))


def predict(fit: RegressionFit, X) -> np.ndarray:
    X = X.values if isinstance(X, DesignMatrix) else np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != len(fit.coefficients):
        raise DimensionMismatch(
            f"design has {X.shape[-1]} columns, fit has {len(fit.coefficients)} coefficients")
    eta = X @ fit.coefficients
    if fit.link == "identity":
        return eta
    return expit(eta)
