"""Inference for quadratic group functionals beta_G' A beta_G.

Supports a known positive-definite weighting matrix A or the population
covariance block Sigma_{G,G} (estimated by its sample version). The variance
carries the tau/n enlargement that keeps the test valid near the null, where
the natural variance collapses faster than the bias bound.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch
from .lasso import LassoConfig, fit_lasso_cv
from .linear import normal_quantile
from .model import Dataset, LassoFit, weighted_quadratic, weighted_score
from .projection import ProjectionDirection, group_projection_direction


@dataclass
class GroupSpec:
    """Index set G, weighting choice, tau enlargement, optional sample splitting.

    weighting: a |G| x |G| symmetric positive-definite array (known-A case)
    or the string "sigma" for the population-covariance block.
    """

    indices: np.ndarray
    weighting: object = "sigma"
    tau: float = 0.5
    split: bool = False

    def __post_init__(self):
        idx = np.unique(np.asarray(self.indices, dtype=np.intp))
        if idx.size == 0 or idx[0] < 0:
            raise ValueError("group indices must be non-negative and non-empty")
        self.indices = idx
        if self.tau < 0:
            raise ValueError("tau must be non-negative")
        if isinstance(self.weighting, str):
            if self.weighting != "sigma":
                raise ValueError("weighting must be an array or the string 'sigma'")
        else:
            A = np.asarray(self.weighting, dtype=np.float64)
            g = idx.size
            if A.shape != (g, g):
                raise DimensionMismatch(f"A must be {g} x {g}")
            if not np.allclose(A, A.T, atol=1e-10):
                raise ValueError("A must be symmetric")
            if np.linalg.eigvalsh(A)[0] <= 1e-10:
                raise ValueError("A must be positive definite")
            self.weighting = A

    def validate_against(self, p):
        if self.indices[-1] >= p:
            raise DimensionMismatch(f"group index {self.indices[-1]} out of range for p={p}")


@dataclass
class GroupResult:
    """Debiased quadratic-functional estimate with CI and one-sided test."""

    q_hat: float
    variance: float
    ci_low: float
    ci_high: float
    alpha: float
    reject: bool
    zero_loading: bool = False
    negative_estimate: bool = False
    diagnostics: ProjectionDirection = None


def weighting_matrix(data: Dataset, spec: GroupSpec) -> np.ndarray:
    """The A-hat actually used: A itself, or the sample covariance block."""
    spec.validate_against(data.p)
    if isinstance(spec.weighting, str):
        XG = data.X[:, spec.indices]
        return XG.T @ XG / data.n
    return spec.weighting


def group_loading(data: Dataset, fit: LassoFit, spec: GroupSpec) -> np.ndarray:
    """Length-p loading with A-hat beta-hat_G on G and zeros elsewhere."""
    A = weighting_matrix(data, spec)
    loading = np.zeros(data.p)
    loading[spec.indices] = A @ fit.beta_hat[spec.indices]
    return loading


def estimate_q(data: Dataset, fit: LassoFit, spec: GroupSpec, eta_n=None):
    """Bias-corrected estimate of beta_G' A beta_G.

    Returns (q_hat, direction); direction is None when the loading vanishes
    (beta-hat_G = 0 up to the weighting), in which case the correction term is
    identically zero and the plug-in is returned unchanged.
    """
    spec.validate_against(data.p)
    A = weighting_matrix(data, spec)
    bG = fit.beta_hat[spec.indices]
    plug_in = float(bG @ A @ bG)
    loading = np.zeros(data.p)
    loading[spec.indices] = A @ bG
    if not np.any(loading):
        return plug_in, None
    proj = group_projection_direction(data.X, loading, eta_n=eta_n)
    correction = 2.0 * float(proj.u_hat @ weighted_score(data, fit.beta_hat))
    return plug_in + correction, proj


def variance_q(data: Dataset, fit: LassoFit, spec: GroupSpec,
               proj: ProjectionDirection) -> float:
    """tau-enlarged variance of the corrected estimate.

    Known-A case: 4 x the weighted quadratic form plus tau/n. The population
    case adds the empirical variance of beta_G' X_G X_G' beta_G.
    """
    spec.validate_against(data.p)
    base = 0.0 if proj is None else 4.0 * weighted_quadratic(data, fit.eta_hat, proj.u_hat)
    if isinstance(spec.weighting, str):
        s = data.X[:, spec.indices] @ fit.beta_hat[spec.indices]
        sq = s * s
        base += float(np.sum((sq - sq.mean()) ** 2)) / data.n**2
    return base + spec.tau / data.n


@dataclass
class GroupConfig:
    lasso: LassoConfig = field(default_factory=LassoConfig)
    eta_n: float = None
    split_seed: int = 0


def _split_halves(n, seed):
    perm = np.random.default_rng(seed).permutation(n)
    half = n // 2
    return perm[:half], perm[half:]


def test_group(data: Dataset, spec: GroupSpec, alpha: float = 0.05,
               config: GroupConfig = None) -> GroupResult:
    """Full pipeline for the one-sided group-significance test.

    With spec.split the initial fit uses one seeded random half and the
    correction the other, making the initial estimator independent of the
    correction data; by default everything runs on the full sample.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    config = config or GroupConfig()
    if spec.split:
        idx_fit, idx_corr = _split_halves(data.n, config.split_seed)
        fit_data = Dataset(data.X[idx_fit], data.y[idx_fit])
        corr_data = Dataset(data.X[idx_corr], data.y[idx_corr])
    else:
        fit_data = corr_data = data
    fit, _ = fit_lasso_cv(fit_data, config.lasso)
    if spec.split:
        fit = LassoFit(beta_hat=fit.beta_hat, lam=fit.lam,
                       eta_hat=corr_data.X @ fit.beta_hat,
                       active_set=fit.active_set, objective=fit.objective,
                       converged=fit.converged, n_iter=fit.n_iter)
    q, proj = estimate_q(corr_data, fit, spec, eta_n=config.eta_n)
    var = variance_q(corr_data, fit, spec, proj)
    return summarize_group(q, var, alpha, spec, proj)


def summarize_group(q: float, var: float, alpha: float, spec: GroupSpec,
                    proj=None) -> GroupResult:
    """CI (two-sided) and one-sided rejection from an estimate/variance pair."""
    sd = float(np.sqrt(var))
    z_half = normal_quantile(alpha / 2.0)
    z_one = normal_quantile(alpha)
    return GroupResult(
        q_hat=float(q), variance=float(var),
        ci_low=float(q - z_half * sd), ci_high=float(q + z_half * sd),
        alpha=float(alpha), reject=bool(q - z_one * sd > 0.0),
        zero_loading=proj is None, negative_estimate=bool(q < 0.0),
        diagnostics=proj)
