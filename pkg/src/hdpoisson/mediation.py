"""Mediation analysis with a count outcome.

The outcome follows a Poisson regression on (mediators, treatment, optional
treatment x mediator interactions); mediators follow a linear model in the
treatment. Two inferential targets: joint significance of the interaction
block, and the indirect effect gamma' beta_0.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateTreatment, DimensionMismatch
from .group import GroupConfig, GroupResult, GroupSpec, test_group
from .lasso import LassoConfig, fit_lasso_cv
from .linear import (InferenceConfig, InferenceResult, build_result,
                     debias_linear, variance_linear)
from .model import Dataset
from .projection import projection_direction


@dataclass
class MediationData:
    """Treatment vector T, mediator matrix M (n x p), count outcome y."""

    T: np.ndarray
    M: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.T = np.asarray(self.T, dtype=np.float64)
        self.M = np.asarray(self.M, dtype=np.float64)
        if self.T.ndim != 1 or self.M.ndim != 2 or self.M.shape[0] != self.T.shape[0]:
            raise DimensionMismatch("M must be n x p aligned with T")
        if float(self.T @ self.T) <= 0.0:
            raise DegenerateTreatment("treatment has zero sum of squares")
        self.y = np.asarray(self.y)
        if self.y.shape != self.T.shape:
            raise DimensionMismatch("y must align with T")

    @property
    def n(self):
        return self.T.shape[0]

    @property
    def p(self):
        return self.M.shape[1]


@dataclass
class MediationDesign:
    """Poisson design assembled from mediation data, with block bookkeeping."""

    data: Dataset
    n_mediators: int
    with_interaction: bool

    @property
    def interaction_indices(self):
        p = self.n_mediators
        if not self.with_interaction:
            raise ValueError("design was assembled without an interaction block")
        return np.arange(p + 1, 2 * p + 1)

    def mediator_block(self):
        return self.data.X[:, : self.n_mediators]

    def treatment_column(self):
        return self.data.X[:, self.n_mediators]

    def interaction_block(self):
        return self.data.X[:, self.interaction_indices]


def assemble_design(md: MediationData, with_interaction: bool) -> MediationDesign:
    """Stack (M, T) or (M, T, T*M) column blocks into one Poisson design."""
    cols = [md.M, md.T[:, None]]
    names = [f"m{j + 1}" for j in range(md.p)] + ["t"]
    if with_interaction:
        cols.append(md.T[:, None] * md.M)
        names += [f"t_x_m{j + 1}" for j in range(md.p)]
    X = np.hstack(cols)
    return MediationDesign(data=Dataset(X, md.y, columns=names),
                           n_mediators=md.p, with_interaction=with_interaction)


def estimate_gamma(md: MediationData) -> np.ndarray:
    """Column-wise OLS slopes of the mediators on the treatment."""
    tt = float(md.T @ md.T)
    if tt <= 0.0:
        raise DegenerateTreatment("treatment has zero sum of squares")
    return md.M.T @ md.T / tt


def mediator_noise_variance(md: MediationData, gamma_hat: np.ndarray,
                            beta0_hat: np.ndarray) -> float:
    """beta_0' Cov-hat(M - gamma T) beta_0, accumulated row-wise.

    Only the scalar projections (M_i - gamma T_i)' beta_0 are formed; the
    p x p residual covariance never materializes.
    """
    gamma_hat = np.asarray(gamma_hat, dtype=np.float64)
    beta0_hat = np.asarray(beta0_hat, dtype=np.float64)
    if gamma_hat.shape != (md.p,) or beta0_hat.shape != (md.p,):
        raise DimensionMismatch("gamma and beta_0 must have one entry per mediator")
    s = md.M @ beta0_hat - md.T * float(gamma_hat @ beta0_hat)
    return float(s @ s) / md.n


def interaction_test(md: MediationData, tau: float = 0.5, alpha: float = 0.05,
                     config: GroupConfig = None) -> GroupResult:
    """Joint significance test of the treatment x mediator block.

    Reduces to the quadratic-functional test with G = the interaction columns
    and the population-covariance weighting.
    """
    design = assemble_design(md, with_interaction=True)
    spec = GroupSpec(indices=design.interaction_indices, weighting="sigma", tau=tau)
    return test_group(design.data, spec, alpha=alpha, config=config)


def indirect_effect_test(md: MediationData, alpha: float = 0.05,
                         config: InferenceConfig = None) -> InferenceResult:
    """Debiased inference for the indirect effect gamma' beta_0 (no interaction).

    The loading is the estimated (gamma-hat, 0); the variance adds
    sigma2-hat / sum(T^2) for the uncertainty in gamma-hat itself.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    config = config or InferenceConfig()
    design = assemble_design(md, with_interaction=False)
    fit, _ = fit_lasso_cv(design.data, config.lasso)
    gamma_hat = estimate_gamma(md)
    x_star = np.concatenate([gamma_hat, [0.0]])
    beta0_hat = fit.beta_hat[: md.p]
    sigma2 = mediator_noise_variance(md, gamma_hat, beta0_hat)
    tt = float(md.T @ md.T)

    proj = projection_direction(design.data.X, x_star, eta_n=config.eta_n)
    est = debias_linear(design.data, fit, x_star, proj)
    var = variance_linear(design.data, fit, proj) + sigma2 / tt
    return build_result(est, var, alpha, diagnostics=proj)
