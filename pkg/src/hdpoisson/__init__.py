"""Bias-corrected inference for high-dimensional Poisson regression.

Point estimates, confidence intervals, and tests for linear functionals
x*'beta and quadratic group functionals beta_G' A beta_G, plus mediation
applications (interaction and indirect-effect tests) and a seeded Monte
Carlo benchmark harness.
"""

__version__ = "0.1.0"

from .errors import (AllUnbounded, CsvError, DegenerateTreatment,
                     DimensionMismatch, HdpError, InvalidLoading,
                     NoConvergence, OverflowDomain, Unbounded, ZeroLoading)
from .model import (Dataset, LassoFit, neg_log_likelihood, score,
                    weighted_score)
from .lasso import LassoConfig, fit_lasso, fit_lasso_cv, lambda_max
from .projection import (ProjectionDirection, group_projection_direction,
                         projection_direction, solve_dual, tune_lambda_n)
from .linear import (InferenceConfig, InferenceResult, debias_linear,
                     infer_linear, variance_linear)
from .group import GroupConfig, GroupResult, GroupSpec, estimate_q, test_group, variance_q
from .mediation import (MediationData, MediationDesign, assemble_design,
                        estimate_gamma, indirect_effect_test, interaction_test,
                        mediator_noise_variance)
from .simulation import (SimReport, SimScenario, gen_group, gen_linear,
                         gen_mediation, run_scenario)

__all__ = [name for name in dir() if not name.startswith("_")]
