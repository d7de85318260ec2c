"""Bias-corrected point estimates, confidence intervals, and tests for x*'beta."""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import DimensionMismatch
from .lasso import LassoConfig, fit_lasso_cv
from .model import Dataset, LassoFit, weighted_quadratic, weighted_score
from .projection import ProjectionDirection, projection_direction


@dataclass
class InferenceConfig:
    """Knobs for the full linear-inference pipeline."""

    lasso: LassoConfig = field(default_factory=LassoConfig)
    eta_n: float = None  # None -> sqrt(log n)


@dataclass
class InferenceResult:
    """Debiased estimate with its normal-approximation interval and test."""

    estimate: float
    se: float
    ci_low: float
    ci_high: float
    alpha: float
    statistic: float
    reject: bool
    degenerate_variance: bool = False
    diagnostics: ProjectionDirection = None

    @property
    def p_value(self):
        if self.se == 0.0:
            return 0.0 if self.estimate != 0.0 else 1.0
        return float(2.0 * ndtr(-abs(self.estimate) / self.se))


def debias_linear(data: Dataset, fit: LassoFit, x_star: np.ndarray,
                  proj: ProjectionDirection) -> float:
    """x*'beta-hat plus the projection-weighted reweighted score correction."""
    x_star = np.asarray(x_star, dtype=np.float64)
    if x_star.shape != (data.p,) or proj.u_hat.shape != (data.p,):
        raise DimensionMismatch("loading/direction length must equal the column count")
    return float(x_star @ fit.beta_hat + proj.u_hat @ weighted_score(data, fit.beta_hat))


def variance_linear(data: Dataset, fit: LassoFit, proj: ProjectionDirection) -> float:
    """(1/n^2) sum_i exp(-eta_i) (X_i . u)^2 for the debiased linear estimate."""
    return weighted_quadratic(data, fit.eta_hat, proj.u_hat)


def normal_quantile(alpha_tail: float) -> float:
    """Upper-tail standard normal quantile z with P(Z > z) = alpha_tail."""
    return float(ndtri(1.0 - alpha_tail))


def build_result(estimate: float, variance: float, alpha: float,
                 diagnostics=None) -> InferenceResult:
    if variance < 0:
        variance = 0.0
    se = float(np.sqrt(variance))
    z = normal_quantile(alpha / 2.0)
    degenerate = se == 0.0
    if degenerate:
        statistic = 0.0 if estimate == 0.0 else float(np.sign(estimate)) * np.inf
    else:
        statistic = estimate / se
    return InferenceResult(
        estimate=float(estimate), se=se,
        ci_low=float(estimate - z * se), ci_high=float(estimate + z * se),
        alpha=float(alpha), statistic=float(statistic),
        reject=bool(abs(estimate) - z * se > 0.0),
        degenerate_variance=degenerate, diagnostics=diagnostics)


def infer_linear(data: Dataset, x_star: np.ndarray, alpha: float = 0.05,
                 config: InferenceConfig = None, fit: LassoFit = None,
                 proj: ProjectionDirection = None) -> InferenceResult:
    """Full pipeline: CV lasso, projection direction, debiasing, interval, test.

    A precomputed fit and/or direction may be passed to reuse work across
    several loadings on the same data.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    config = config or InferenceConfig()
    if fit is None:
        fit, _ = fit_lasso_cv(data, config.lasso)
    if proj is None:
        proj = projection_direction(data.X, x_star, eta_n=config.eta_n)
    est = debias_linear(data, fit, x_star, proj)
    var = variance_linear(data, fit, proj)
    return build_result(est, var, alpha, diagnostics=proj)
