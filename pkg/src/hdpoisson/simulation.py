"""Data generators and a replication harness for the benchmark designs.

Six scenario kinds: two linear-functional designs (exactly sparse and
approximately sparse coefficients), three group designs (null, weak-dense,
strong-dense), and the mediation design. Replication r draws from a stream
seeded rng_seed + r; scenario-level frozen quantities (the loading basis,
frozen coefficient blocks) use a separate keyed stream so the two can never
collide. Aggregation is done in replication order, so reports do not depend
on how many workers ran.
"""

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.linalg import toeplitz

from .group import GroupSpec, estimate_q, summarize_group, variance_q
from .lasso import LassoConfig, fit_lasso_cv
from .linear import InferenceConfig, build_result, debias_linear, variance_linear
from .mediation import MediationData, indirect_effect_test
from .model import Dataset
from .projection import projection_direction

KINDS = ("linear-sparse", "linear-approx", "group-r1", "group-r2", "group-r3", "mediation")
_SETUP_STREAM = 314159  # keyed sub-stream for per-scenario frozen draws

_KIND_DEFAULTS = {
    "linear-sparse": dict(n=500, p=501),
    "linear-approx": dict(n=500, p=501),
    "group-r1": dict(n=500, p=500),
    "group-r2": dict(n=500, p=500),
    "group-r3": dict(n=500, p=500),
    "mediation": dict(n=600, p=500),
}

# Replication-scale solver settings: smaller grid and fold count than the
# library defaults, chosen for throughput; statistically interchangeable at
# the benchmark scales.
_SIM_LASSO = dict(n_lambda=40, lambda_min_ratio=5e-3, cv_folds=5,
                  max_iter=4000, tol=1e-7)


@dataclass
class SimScenario:
    """One benchmark configuration: design, size, tuning, and replication plan."""

    kind: str
    n: int = None
    p: int = None
    r: float = 0.2
    tau: float = 1.0
    alpha: float = 0.05
    n_reps: int = 200
    rng_seed: int = 0
    group: tuple = None
    weightings: tuple = ("sigma", "identity")
    freeze_beta: bool = False
    lasso_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}; choose from {KINDS}")
        defaults = _KIND_DEFAULTS[self.kind]
        if self.n is None:
            self.n = defaults["n"]
        if self.p is None:
            self.p = defaults["p"]
        if self.n < 2 or self.p < 1 or self.n_reps < 1:
            raise ValueError("n, p, and n_reps must be positive (n >= 2)")
        if not 0.0 < self.r <= 1.0:
            raise ValueError("r must lie in (0, 1]")
        if self.group is not None:
            self.group = tuple(int(j) for j in self.group)

    def lasso_config(self, rep_seed: int) -> LassoConfig:
        opts = dict(_SIM_LASSO)
        opts.update(self.lasso_overrides)
        return LassoConfig(rng_seed=rep_seed, **opts)

    def cache_key(self):
        return (self.kind, self.n, self.p, self.r, self.rng_seed,
                self.freeze_beta, self.group)


def _setup_rng(seed):
    return np.random.default_rng([seed, _SETUP_STREAM])


def ar_cholesky(p, rho, scale):
    """Lower Cholesky factor of scale * rho^|i-j| (returns None for p = 0)."""
    if p == 0:
        return None
    return np.linalg.cholesky(toeplitz(scale * rho ** np.arange(p)))


def ar_covariance(p, rho, scale):
    return toeplitz(scale * rho ** np.arange(p))


# ---------------------------------------------------------------- linear ----

def _linear_setup(sc: SimScenario):
    rng = _setup_rng(sc.rng_seed)
    p = sc.p
    chol_x = ar_cholesky(p - 1, 0.5, 0.08)
    chol_b = ar_cholesky(p - 1, 0.75, 0.04)
    basis = np.empty(p)
    basis[0] = 1.0
    if p > 1:
        basis[1:] = chol_b @ rng.standard_normal(p - 1)
    x_star = basis.copy()
    x_star[11:] *= sc.r  # shrink every coordinate past the 11th
    x_star[0] = 0.0      # the loading excludes the intercept coordinate

    beta_fixed = np.zeros(p)
    if sc.kind == "linear-sparse":
        coords = np.arange(3, 18, 2)  # eight coordinates: 4th, 6th, ..., 18th
        beta_fixed[coords] = np.linspace(1.0, 2.0, 8)
        random_block = None
    else:
        beta_fixed[0] = 0.2
        idx = np.arange(10, p)
        beta_fixed[idx] = 1.0 / np.sqrt(idx.astype(np.float64))
        random_block = rng.standard_normal(9) if sc.freeze_beta else None
    return dict(chol_x=chol_x, x_star=x_star, beta_fixed=beta_fixed,
                random_block=random_block)


def gen_linear(sc: SimScenario, rep: int = 0, setup=None):
    """One replication of a linear-functional design: (Dataset, x_star, truth)."""
    setup = setup or _linear_setup(sc)
    rng = np.random.default_rng(sc.rng_seed + rep)
    n, p = sc.n, sc.p
    X = np.empty((n, p))
    X[:, 0] = 1.0
    if p > 1:
        X[:, 1:] = rng.standard_normal((n, p - 1)) @ setup["chol_x"].T
    beta = setup["beta_fixed"].copy()
    if sc.kind == "linear-approx":
        block = setup["random_block"]
        hi = min(10, p)
        beta[1:hi] = (block if block is not None else rng.standard_normal(9))[: hi - 1]
    y = rng.poisson(np.exp(X @ beta))
    x_star = setup["x_star"]
    return Dataset(X, y), x_star, float(x_star @ beta)


# ----------------------------------------------------------------- group ----

def group_coefficients(kind: str, p: int) -> np.ndarray:
    """Frozen coefficient vectors for the three group settings.

    Slot convention (resolved against the published truth values): slots are
    0-based, slots 1..20 carry 1/slot (weak-dense) or slot/50 (strong-dense).
    """
    beta = np.zeros(p)
    if kind == "group-r1":
        return beta
    hi = min(20, p - 1)
    idx = np.arange(1, hi + 1)
    beta[idx] = 1.0 / idx if kind == "group-r2" else idx / 50.0
    return beta


def default_group_indices(p: int) -> np.ndarray:
    return np.arange(15, min(201, p))


def _group_setup(sc: SimScenario):
    p = sc.p
    chol = ar_cholesky(p, 0.5, 0.5)  # covariance 0.5^(1+|i-j|)
    sigma = ar_covariance(p, 0.5, 0.5)
    beta = group_coefficients(sc.kind, p)
    G = np.asarray(sc.group, dtype=np.intp) if sc.group else default_group_indices(p)
    bG = beta[G]
    truths = {"sigma": float(bG @ sigma[np.ix_(G, G)] @ bG), "identity": float(bG @ bG)}
    return dict(chol=chol, beta=beta, G=G, truths=truths)


def gen_group(sc: SimScenario, rep: int = 0, setup=None):
    """One replication of a group design: (Dataset, G, truths-by-weighting)."""
    setup = setup or _group_setup(sc)
    rng = np.random.default_rng(sc.rng_seed + rep)
    X = rng.standard_normal((sc.n, sc.p)) @ setup["chol"].T
    y = rng.poisson(np.exp(X @ setup["beta"]))
    return Dataset(X, y), setup["G"], setup["truths"]


# ------------------------------------------------------------- mediation ----

def mediation_effects(p: int):
    """The frozen treatment->mediator and mediator->outcome coefficients."""
    gamma = np.zeros(p)
    beta0 = np.zeros(p)
    shared = [0.20, 0.25, 0.15, 0.30, 0.35]
    gamma[: 5] = shared
    beta0[: 5] = shared
    if p > 6:
        gamma[6] = 0.10
    if p > 5:
        beta0[5] = 0.10
    return gamma, beta0


def _mediation_setup(sc: SimScenario):
    gamma, beta0 = mediation_effects(sc.p)
    return dict(chol=ar_cholesky(sc.p, 0.75, 1.0), gamma=gamma, beta0=beta0,
                beta1=0.5, truth=float(gamma @ beta0))


def gen_mediation(sc: SimScenario, rep: int = 0, setup=None):
    """One replication of the mediation design: (MediationData, truth)."""
    setup = setup or _mediation_setup(sc)
    rng = np.random.default_rng(sc.rng_seed + rep)
    n = sc.n
    T = rng.normal(0.0, np.sqrt(2.0), n)
    E = rng.standard_normal((n, sc.p)) @ setup["chol"].T
    M = np.outer(T, setup["gamma"]) + E
    y = rng.poisson(np.exp(M @ setup["beta0"] + setup["beta1"] * T))
    return MediationData(T=T, M=M, y=y), setup["truth"]


# ------------------------------------------------------------ replication ----

_setup_cache = {}


def _scenario_setup(sc: SimScenario):
    key = sc.cache_key()
    if key not in _setup_cache:
        if sc.kind.startswith("linear"):
            _setup_cache[key] = _linear_setup(sc)
        elif sc.kind.startswith("group"):
            _setup_cache[key] = _group_setup(sc)
        else:
            _setup_cache[key] = _mediation_setup(sc)
        if len(_setup_cache) > 8:
            _setup_cache.pop(next(iter(_setup_cache)))
    return _setup_cache[key]


def run_replication(sc: SimScenario, rep: int) -> dict:
    """Run one seeded replication of the scenario's full pipeline."""
    import warnings
    warnings.filterwarnings("ignore", message=".*normal-approximation quality.*")
    t0 = time.perf_counter()
    setup = _scenario_setup(sc)
    seed = sc.rng_seed + rep
    lasso = sc.lasso_config(seed)
    try:
        if sc.kind.startswith("linear"):
            data, x_star, truth = gen_linear(sc, rep, setup)
            fit, _ = fit_lasso_cv(data, lasso)
            proj = projection_direction(data.X, x_star)
            res = build_result(debias_linear(data, fit, x_star, proj),
                               variance_linear(data, fit, proj), sc.alpha)
            row = dict(rep=rep, estimate=res.estimate, se=res.se,
                       ci_low=res.ci_low, ci_high=res.ci_high, truth=truth,
                       covered=bool(res.ci_low <= truth <= res.ci_high),
                       reject=res.reject, length=res.ci_high - res.ci_low)
        elif sc.kind.startswith("group"):
            data, G, truths = gen_group(sc, rep, setup)
            fit, _ = fit_lasso_cv(data, lasso)
            row = dict(rep=rep, truths=truths)
            for w in sc.weightings:
                spec = GroupSpec(indices=G, tau=0.0,
                                 weighting="sigma" if w == "sigma" else np.eye(len(G)))
                q, proj = estimate_q(data, fit, spec)
                row[f"q_{w}"] = q
                row[f"var0_{w}"] = variance_q(data, fit, spec, proj)
        else:
            md, truth = gen_mediation(sc, rep, setup)
            res = indirect_effect_test(md, alpha=sc.alpha,
                                       config=InferenceConfig(lasso=lasso))
            row = dict(rep=rep, estimate=res.estimate, se=res.se,
                       ci_low=res.ci_low, ci_high=res.ci_high, truth=truth,
                       covered=bool(res.ci_low <= truth <= res.ci_high),
                       reject=res.reject, length=res.ci_high - res.ci_low)
        row["error"] = None
    except Exception as exc:  # recorded, not fatal
        row = dict(rep=rep, error=f"{type(exc).__name__}: {exc}")
    row["seconds"] = time.perf_counter() - t0
    return row


@dataclass
class SimReport:
    """Aggregated replication metrics plus the raw per-replication rows."""

    scenario: SimScenario
    rows: list
    aggregates: dict
    n_failures: int
    elapsed_seconds: float

    def statistical_payload(self) -> dict:
        """Everything deterministic under (scenario, seed): rows and aggregates
        with timing fields stripped."""
        rows = [{k: v for k, v in r.items() if k != "seconds"} for r in self.rows]
        agg = {k: v for k, v in self.aggregates.items() if k != "mean_seconds"}
        return dict(scenario=_scenario_dict(self.scenario), rows=rows, aggregates=agg)

    def to_dict(self) -> dict:
        return dict(scenario=_scenario_dict(self.scenario), rows=self.rows,
                    aggregates=self.aggregates, n_failures=self.n_failures,
                    elapsed_seconds=self.elapsed_seconds)

    def table(self):
        """(header, rows) in the benchmark-table layout for CSV output."""
        sc, agg = self.scenario, self.aggregates
        if sc.kind.startswith("group"):
            header = ["kind", "n", "p", "reps", "failures", "weighting", "tau",
                      "truth", "coverage", "rejection_rate", "mean_seconds"]
            rows = []
            for w, block in agg["weightings"].items():
                for tau, cell in block["taus"].items():
                    rows.append([sc.kind, sc.n, sc.p, sc.n_reps, self.n_failures,
                                 w, tau, block["truth"], cell["coverage"],
                                 cell["rejection_rate"], agg["mean_seconds"]])
            return header, rows
        header = ["kind", "n", "p", "r", "reps", "failures", "coverage",
                  "avg_length", "bias", "se", "rmse", "rejection_rate",
                  "mean_seconds"]
        r_val = sc.r if sc.kind.startswith("linear") else ""
        return header, [[sc.kind, sc.n, sc.p, r_val, sc.n_reps, self.n_failures,
                         agg["coverage"], agg["avg_length"], agg["bias"],
                         agg["se"], agg["rmse"], agg["rejection_rate"],
                         agg["mean_seconds"]]]


def _scenario_dict(sc: SimScenario) -> dict:
    d = asdict(sc)
    d["group"] = list(sc.group) if sc.group else None
    d["weightings"] = list(sc.weightings)
    return d


def _interval_metrics(rows, alpha):
    est = np.array([r["estimate"] for r in rows])
    truth = np.array([r["truth"] for r in rows])
    err = est - truth
    bias = float(err.mean())
    se = float(err.std(ddof=0))
    return dict(
        coverage=float(np.mean([r["covered"] for r in rows])),
        avg_length=float(np.mean([r["length"] for r in rows])),
        bias=bias, se=se, rmse=float(np.sqrt(np.mean(err**2))),
        rejection_rate=float(np.mean([r["reject"] for r in rows])),
        n_used=len(rows), alpha=alpha)


def _group_metrics(sc: SimScenario, rows):
    from .linear import normal_quantile
    z_half = normal_quantile(sc.alpha / 2.0)
    z_one = normal_quantile(sc.alpha)
    taus = sorted({0.0, 1.0, float(sc.tau)})
    out = {}
    truths = rows[0]["truths"]
    for w in sc.weightings:
        q = np.array([r[f"q_{w}"] for r in rows])
        v0 = np.array([r[f"var0_{w}"] for r in rows])
        cells = {}
        for tau in taus:
            sd = np.sqrt(v0 + tau / sc.n)
            cells[f"{tau:g}"] = dict(
                coverage=float(np.mean((q - z_half * sd <= truths[w])
                                       & (truths[w] <= q + z_half * sd))),
                rejection_rate=float(np.mean(q - z_one * sd > 0.0)))
        out[w] = dict(truth=truths[w], taus=cells)
    return dict(weightings=out, n_used=len(rows), alpha=sc.alpha)


_BLAS_ENV = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
             "NUMEXPR_NUM_THREADS")


def run_scenario(sc: SimScenario, threads: int = 1) -> SimReport:
    """Run every replication (optionally across processes) and aggregate.

    Replication failures are recorded in their rows and excluded from the
    aggregates; the report carries the failure count.
    """
    t0 = time.perf_counter()
    reps = range(sc.n_reps)
    if threads <= 1 or sc.n_reps == 1:
        rows = [run_replication(sc, r) for r in reps]
    else:
        import multiprocessing as mp
        saved = {k: os.environ.get(k) for k in _BLAS_ENV}
        for k in _BLAS_ENV:
            os.environ[k] = "1"
        try:
            with ProcessPoolExecutor(max_workers=threads,
                                     mp_context=mp.get_context("spawn")) as pool:
                rows = list(pool.map(run_replication, [sc] * sc.n_reps, reps,
                                     chunksize=max(1, sc.n_reps // (4 * threads))))
        finally:
            for k, old in saved.items():
                if old is None:
                    os.environ.pop(k, None)
                else:
                    os.environ[k] = old
    rows.sort(key=lambda r: r["rep"])

    good = [r for r in rows if r["error"] is None]
    n_failures = len(rows) - len(good)
    if not good:
        aggregates = dict(n_used=0)
    elif sc.kind.startswith("group"):
        aggregates = _group_metrics(sc, good)
    else:
        aggregates = _interval_metrics(good, sc.alpha)
    aggregates["mean_seconds"] = float(np.mean([r["seconds"] for r in rows]))
    return SimReport(scenario=sc, rows=rows, aggregates=aggregates,
                     n_failures=n_failures,
                     elapsed_seconds=time.perf_counter() - t0)
