"""Poisson-model primitives: data container, likelihood, score, weighted score.

Everything here is a pure function of immutable inputs; nothing mutates the
arrays it receives, so concurrent use needs no synchronization.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import DimensionMismatch, OverflowDomain

# Hard guard for exp() evaluation: beyond this the likelihood overflows float64.
ETA_LIMIT = 700.0
# Working bound enforced during optimization; iterates violating it are
# rejected by the solvers' line searches (keeps fitted rates in a sane range).
ETA_FIT_LIMIT = 30.0


@dataclass
class Dataset:
    """Design matrix X (n x p) with count responses y (length n).

    y must be non-negative integers; X must be finite with n >= 2, p >= 1.
    """

    X: np.ndarray
    y: np.ndarray
    columns: list | None = None

    def __post_init__(self):
        self.X = np.ascontiguousarray(self.X, dtype=np.float64)
        if self.X.ndim != 2:
            raise DimensionMismatch("X must be a 2-d matrix")
        self.y = np.asarray(self.y)
        if self.y.ndim != 1 or self.y.shape[0] != self.X.shape[0]:
            raise DimensionMismatch("y must be a vector with one entry per row of X")
        if not np.isfinite(self.X).all():
            raise ValueError("X contains non-finite entries")
        yf = np.asarray(self.y, dtype=np.float64)
        if np.any(yf < 0) or np.any(yf != np.floor(yf)):
            raise ValueError("y must contain non-negative integers")
        self.y = yf
        n, p = self.X.shape
        if n < 2 or p < 1:
            raise ValueError(f"need n >= 2 and p >= 1, got n={n}, p={p}")
        if self.columns is not None and len(self.columns) != p:
            raise DimensionMismatch("column names must match the number of columns")

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]


@dataclass
class LassoFit:
    """L1-penalized Poisson fit: coefficients, penalty, predictors, diagnostics."""

    beta_hat: np.ndarray
    lam: float
    eta_hat: np.ndarray
    active_set: np.ndarray
    objective: float
    converged: bool = True
    n_iter: int = 0
    obj_history: np.ndarray = field(default=None, repr=False)


def linear_predictor(data: Dataset, beta: np.ndarray, limit: float = ETA_LIMIT) -> np.ndarray:
    """X @ beta, guarded: raises OverflowDomain when any |eta_i| exceeds `limit`."""
    beta = np.asarray(beta, dtype=np.float64)
    if beta.shape != (data.p,):
        raise DimensionMismatch(f"beta has length {beta.shape}, expected ({data.p},)")
    if not np.isfinite(beta).all():
        raise OverflowDomain("beta contains non-finite entries")
    eta = data.X @ beta
    amax = np.max(np.abs(eta)) if eta.size else 0.0
    if amax > limit:
        raise OverflowDomain(f"linear predictor magnitude {amax:.3g} exceeds guard {limit:g}")
    return eta


def neg_log_likelihood(data: Dataset, beta: np.ndarray) -> float:
    """(1/n) sum_i [exp(eta_i) - y_i eta_i + log(y_i!)], eta = X beta."""
    eta = linear_predictor(data, beta)
    return float(np.mean(np.exp(eta) - data.y * eta + gammaln(data.y + 1.0)))


def nll_from_eta(y: np.ndarray, eta: np.ndarray) -> float:
    """Likelihood value when the linear predictor is already available."""
    return float(np.mean(np.exp(eta) - y * eta + gammaln(y + 1.0)))


def score(data: Dataset, beta: np.ndarray) -> np.ndarray:
    """Gradient of the averaged negative log-likelihood: (1/n) X^T (exp(eta) - y)."""
    eta = linear_predictor(data, beta)
    return data.X.T @ (np.exp(eta) - data.y) / data.n


def weighted_score(data: Dataset, beta_hat: np.ndarray) -> np.ndarray:
    """(1/n) sum_i exp(-eta_i) X_i (y_i - exp(eta_i)).

    Reweighting by exp(-eta) turns the error analysis into one driven by the
    plain sample covariance X^T X / n, independent of beta_hat. Guarded on
    both signs of eta since the weight is exp(-eta).
    """
    eta = linear_predictor(data, beta_hat)
    w = np.exp(-eta)
    resid = data.y - np.exp(eta)
    return data.X.T @ (w * resid) / data.n


def weighted_quadratic(data: Dataset, eta_hat: np.ndarray, u: np.ndarray) -> float:
    """(1/n^2) sum_i exp(-eta_i) (X_i . u)^2 — the sandwich piece of every variance."""
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (data.p,):
        raise DimensionMismatch(f"u has shape {u.shape}, expected ({data.p},)")
    xu = data.X @ u
    amax = np.max(np.abs(eta_hat)) if eta_hat.size else 0.0
    if amax > ETA_LIMIT:
        raise OverflowDomain(f"eta magnitude {amax:.3g} exceeds guard {ETA_LIMIT:g}")
    return float(np.sum(np.exp(-eta_hat) * xu * xu)) / data.n**2
