"""L1-penalized Poisson regression: proximal gradient solver, path, and CV.

The smooth part is the averaged Poisson negative log-likelihood; the solver
is proximal gradient with backtracking and soft-thresholding. By default an
accelerated (FISTA-style) candidate is tried each iteration and kept only if
it does not increase the objective, so the recorded objective sequence is
always non-increasing.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import OverflowDomain
from .model import Dataset, ETA_FIT_LIMIT, LassoFit, nll_from_eta

_BT_SHRINK = 0.5  # backtracking factor for the step size
_MIN_STEP = 1e-18


@dataclass
class LassoConfig:
    """Solver and cross-validation settings.

    lambda_grid: explicit strictly-descending grid, or None for an automatic
    geometric grid of `n_lambda` values from lambda_max down to
    `lambda_min_ratio * lambda_max`.
    """

    lambda_grid: np.ndarray = None
    n_lambda: int = 100
    lambda_min_ratio: float = 1e-3
    cv_folds: int = 10
    max_iter: int = 10_000
    tol: float = 1e-8
    rng_seed: int = 0
    accelerate: bool = True
    unpenalized_cols: tuple = ()

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.cv_folds < 2:
            raise ValueError("cv_folds must be at least 2")
        if self.lambda_grid is not None:
            g = np.asarray(self.lambda_grid, dtype=np.float64)
            if g.ndim != 1 or g.size == 0:
                raise ValueError("lambda_grid must be a non-empty vector")
            if g.size > 1 and not np.all(np.diff(g) < 0):
                raise ValueError("lambda_grid must be strictly descending")
            if np.any(g < 0):
                raise ValueError("lambda values must be non-negative")
            self.lambda_grid = g


def lambda_max(data: Dataset, unpenalized_cols: tuple = ()) -> float:
    """Smallest penalty at which the all-zero solution satisfies the KKT check.

    At beta = 0 the fitted rate is 1 for every row; with an unpenalized ones
    column the null model instead fits the mean count, so the residual is
    y - mean(y).
    """
    has_free_intercept = any(
        np.allclose(data.X[:, j], data.X[0, j]) and data.X[0, j] != 0
        for j in unpenalized_cols
    )
    mu0 = np.mean(data.y) if has_free_intercept else 1.0
    g = data.X.T @ (data.y - mu0) / data.n
    if unpenalized_cols:
        g = np.delete(g, list(unpenalized_cols))
    return float(np.max(np.abs(g))) if g.size else 0.0


def _soft_threshold(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def _penalty_weights(p, lam, unpenalized_cols):
    w = np.full(p, lam, dtype=np.float64)
    if unpenalized_cols:
        w[list(unpenalized_cols)] = 0.0
    return w


def _penalized_objective(y, eta, beta, pen):
    return nll_from_eta(y, eta) + float(pen @ np.abs(beta))


def kkt_violation(data: Dataset, beta: np.ndarray, lam: float,
                  unpenalized_cols: tuple = ()) -> float:
    """Max subgradient-stationarity violation of the penalized objective."""
    eta = data.X @ beta
    g = data.X.T @ (np.exp(np.clip(eta, -ETA_FIT_LIMIT, ETA_FIT_LIMIT)) - data.y) / data.n
    pen = _penalty_weights(data.p, lam, unpenalized_cols)
    active = beta != 0
    viol = np.maximum(np.abs(g) - pen, 0.0)          # inactive: |g_j| <= lam
    viol[active] = np.abs(g + pen * np.sign(beta))[active]  # active: g_j = -lam sign
    return float(np.max(viol)) if viol.size else 0.0


def fit_lasso(data: Dataset, lam: float, config: LassoConfig = None,
              beta0: np.ndarray = None) -> LassoFit:
    """Solve min (1/n) sum_i [exp(eta_i) - y_i eta_i + log y_i!] + lam ||beta||_1.

    Proximal gradient with backtracking; columns listed in
    config.unpenalized_cols carry no penalty. `beta0` warm-starts the solve.
    Returns the best iterate with converged=False instead of raising when the
    iteration cap is hit.
    """
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    config = config or LassoConfig()
    n, p = data.n, data.p
    X, y = data.X, data.y
    pen = _penalty_weights(p, lam, config.unpenalized_cols)
    kkt_tol = 1e-4 * max(1.0, lam)

    beta = np.zeros(p) if beta0 is None else np.array(beta0, dtype=np.float64)
    eta = X @ beta
    if np.max(np.abs(eta), initial=0.0) > ETA_FIT_LIMIT:
        beta = np.zeros(p)
        eta = np.zeros(n)
    obj = _penalized_objective(y, eta, beta, pen)

    # Step size 1/L with L = ||X^T X / n||_2 * exp-weight bound, estimated by a
    # few deterministic power iterations and refined by backtracking.
    col_sq = np.sum(X * X, axis=0) / n
    v = col_sq + 1.0
    lam_sig = 1e-12
    for _ in range(6):
        v = X.T @ (X @ v) / n
        lam_sig = float(np.linalg.norm(v))
        if lam_sig <= 1e-300:
            lam_sig = 1e-12
            break
        v /= lam_sig
    weight_bound = float(np.exp(np.clip(np.max(eta, initial=0.0), 0.0, 5.0)))
    step = 1.0 / max(lam_sig * weight_bound, 1e-12)

    beta_prev = beta.copy()
    t_momentum = 1.0
    history = [obj]
    converged = False
    it = 0

    for it in range(1, config.max_iter + 1):
        if config.accelerate and it > 1:
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_momentum**2))
            z = beta + ((t_momentum - 1.0) / t_next) * (beta - beta_prev)
            t_momentum = t_next
        else:
            z = beta

        accepted = None
        for point in (z, beta) if z is not beta else (beta,):
            eta_pt = eta if point is beta else X @ point
            if np.max(np.abs(eta_pt), initial=0.0) > ETA_FIT_LIMIT:
                continue
            mu = np.exp(eta_pt)
            f_pt = nll_from_eta(y, eta_pt)
            grad = X.T @ (mu - y) / n
            s = step * 2.0  # allow the step to recover after past shrinkage
            while s >= _MIN_STEP:
                cand = _soft_threshold(point - s * grad, s * pen)
                eta_c = X @ cand
                if np.max(np.abs(eta_c), initial=0.0) > ETA_FIT_LIMIT:
                    s *= _BT_SHRINK
                    continue
                f_c = nll_from_eta(y, eta_c)
                d = cand - point
                if f_c <= f_pt + grad @ d + (d @ d) / (2.0 * s) + 1e-12:
                    break
                s *= _BT_SHRINK
            else:
                continue
            obj_c = f_c + float(pen @ np.abs(cand))
            if obj_c <= obj + 1e-15:
                accepted = (cand, eta_c, obj_c, s)
                break
            # accelerated candidate increased the objective: retry from beta
            t_momentum = 1.0

        if accepted is None:
            raise OverflowDomain("line search could not keep the predictors in range")
        cand, eta_c, obj_c, step = accepted
        beta_prev, beta, eta = beta, cand, eta_c
        rel_change = abs(obj - obj_c) / max(1.0, abs(obj))
        obj = obj_c
        history.append(obj)

        if rel_change < config.tol:
            if kkt_violation(data, beta, lam, config.unpenalized_cols) <= kkt_tol:
                converged = True
                break

    active = np.flatnonzero(beta)
    return LassoFit(beta_hat=beta, lam=float(lam), eta_hat=eta, active_set=active,
                    objective=obj, converged=converged, n_iter=it,
                    obj_history=np.asarray(history))


def auto_lambda_grid(data: Dataset, config: LassoConfig) -> np.ndarray:
    lmax = lambda_max(data, config.unpenalized_cols)
    if lmax <= 0:
        return np.array([0.0])
    return np.geomspace(lmax, config.lambda_min_ratio * lmax, config.n_lambda)


def fit_lasso_path(data: Dataset, grid: np.ndarray, config: LassoConfig) -> list:
    """Warm-started fits along a descending penalty grid."""
    fits = []
    warm = None
    for lam in grid:
        fit = fit_lasso(data, float(lam), config, beta0=warm)
        warm = fit.beta_hat
        fits.append(fit)
    return fits


def poisson_deviance(y: np.ndarray, eta: np.ndarray) -> float:
    """Mean Poisson deviance 2[y log(y/mu) - (y - mu)], with 0 log 0 = 0."""
    eta = np.clip(eta, -ETA_FIT_LIMIT, ETA_FIT_LIMIT)
    mu = np.exp(eta)
    ylog = np.zeros_like(mu)
    pos = y > 0
    ylog[pos] = y[pos] * (np.log(y[pos]) - eta[pos])
    return float(np.mean(2.0 * (ylog - (y - mu))))


def fit_lasso_cv(data: Dataset, config: LassoConfig = None):
    """K-fold CV over the penalty grid, minimizing held-out Poisson deviance.

    Fold assignment is a seeded permutation. Returns the full-data fit at the
    deviance-minimizing penalty plus the CV table: one row per penalty value,
    (lambda, mean held-out deviance, sd across folds).
    """
    config = config or LassoConfig()
    if data.n < config.cv_folds:
        raise ValueError("need at least one observation per fold")
    grid = config.lambda_grid if config.lambda_grid is not None else auto_lambda_grid(data, config)

    rng = np.random.default_rng(config.rng_seed)
    perm = rng.permutation(data.n)
    folds = np.array_split(perm, config.cv_folds)

    dev = np.empty((config.cv_folds, len(grid)))
    for k, heldout in enumerate(folds):
        mask = np.ones(data.n, dtype=bool)
        mask[heldout] = False
        train = Dataset(data.X[mask], data.y[mask])
        Xh, yh = data.X[heldout], data.y[heldout]
        for j, fit in enumerate(fit_lasso_path(train, grid, config)):
            dev[k, j] = poisson_deviance(yh, Xh @ fit.beta_hat)

    mean_dev = dev.mean(axis=0)
    sd_dev = dev.std(axis=0, ddof=1) if config.cv_folds > 1 else np.zeros_like(mean_dev)
    best = int(np.argmin(mean_dev))
    cv_table = np.column_stack([grid, mean_dev, sd_dev])

    final = fit_lasso_path(data, grid[: best + 1], config)[-1]
    return final, cv_table
