"""Synthetic benchmark harness: nine response models over Gaussian designs,
TPR/FPR scoring, and a replication runner.

Per-replication seeds are base_seed + rep. Within a replication, the
design draw, the noise draw, and the CV fold shuffle use distinct
deterministic substreams of that seed, so no stream is reused across
purposes.
"""

from __future__ import annotations

import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from .detect import fit_pipeline
from .moments import DataSet
from .solver import SolverConfig

# Truth sets: which (i, j) pairs each model's mean function actually
# couples. Model 8's noise-multiplying pair (2, 3) affects the variance,
# not the mean, so it is excluded here and recorded per-rep instead.
MODEL_TRUTH = {
    1: frozenset(),
    2: frozenset({(1, 2), (4, 5)}),
    3: frozenset({(1, 2), (2, 3)}),
    4: frozenset({(1, 1), (5, 8)}),
    5: frozenset({(1, 1), (5, 8), (9, 9)}),
    6: frozenset({(1, 5)}),
    7: frozenset({(1, 5)}),
    8: frozenset({(1, 5)}),
    9: frozenset({(j, j + 1) for j in range(1, 10)}),
}

MODEL_MIN_P = {1: 5, 2: 5, 3: 3, 4: 8, 5: 9, 6: 5, 7: 5, 8: 5, 9: 10}

_DESIGN_STREAM = 0
_NOISE_STREAM = 1
_CV_STREAM = 2


@dataclass(frozen=True)
class DesignSpec:
    """Gaussian design: n rows of N(0, Sigma), Sigma = I or AR(1) Toeplitz."""

    n: int
    p: int
    rho: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 2 or self.p < 1:
            raise ValueError("need n >= 2 and p >= 1")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must be in [0, 1)")


@dataclass(frozen=True)
class ModelSpec:
    """One of the nine response models, with its noise level."""

    model_id: int
    noise_sd: float = 1.0

    def __post_init__(self):
        if self.model_id not in MODEL_TRUTH:
            raise ValueError(f"model_id must be 1..9, got {self.model_id}")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")

    @property
    def truth(self) -> frozenset:
        return MODEL_TRUTH[self.model_id]

    @property
    def min_p(self) -> int:
        return MODEL_MIN_P[self.model_id]


@dataclass
class RepRecord:
    rep: int
    seed: int
    tpr: float | None = None
    fpr: float | None = None
    n_selected: int = 0
    selected_lam: float | None = None
    fit_seconds: float | None = None
    converged: bool | None = None
    error: str | None = None
    extra: dict = field(default_factory=dict)


@dataclass
class MetricsReport:
    """Aggregate recovery rates with per-replication records."""

    tpr: float | None
    fpr: float
    tpr_se: float | None
    fpr_se: float
    time_mean: float
    time_sd: float
    records: list[RepRecord]
    failures: int


def toeplitz_sigma(p: int, rho: float):
    """AR(1) Toeplitz covariance Sigma_jk = rho^|j-k|; rho=0 is identity."""
    if not 0.0 <= rho < 1.0:
        raise ValueError("rho must be in [0, 1)")
    idx = np.arange(p)
    return rho ** np.abs(np.subtract.outer(idx, idx)).astype(np.float64)


def sample_design(spec: DesignSpec):
    """Draw n i.i.d. rows of N(0, Sigma) via the Cholesky factor."""
    sigma = toeplitz_sigma(spec.p, spec.rho)
    L = np.linalg.cholesky(sigma)
    rng = np.random.default_rng(
        np.random.SeedSequence((spec.seed, _DESIGN_STREAM))
    )
    Z = rng.standard_normal((spec.n, spec.p))
    return Z @ L.T


def _mean_function(X, model_id: int):
    c = [X[:, j] for j in range(X.shape[1])]
    if model_id == 1:
        return c[0] + c[4]
    if model_id == 2:
        return 0.6 * c[0] * c[1] + 0.8 * c[3] * c[4]
    if model_id == 3:
        return 0.6 * c[0] * c[1] + 0.8 * c[1] * c[2]
    if model_id == 4:
        return 0.5 * c[0] ** 2 + 0.9 * c[4] * c[7]
    if model_id == 5:
        return c[0] ** 2 + c[4] * c[7] + c[8] ** 2
    if model_id == 6:
        return c[0] + c[4] + c[0] * c[4]
    if model_id == 7:
        return 0.1 * c[0] + 0.1 * c[4] + c[0] * c[4]
    if model_id == 8:
        return c[0] * c[4]
    if model_id == 9:
        return sum(c[j] * c[j + 1] for j in range(9))
    raise ValueError(f"model_id must be 1..9, got {model_id}")


def gen_response(X, model: ModelSpec, seed: int):
    """Evaluate the model's formula with N(0, sd^2) noise.

    Model 8 is heteroscedastic: the noise is multiplied by x2*x3.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1] < model.min_p:
        raise ValueError(
            f"model {model.model_id} requires p >= {model.min_p}, "
            f"got p = {X.shape[1]}"
        )
    rng = np.random.default_rng(np.random.SeedSequence((seed, _NOISE_STREAM)))
    eps = model.noise_sd * rng.standard_normal(X.shape[0])
    if model.model_id == 8:
        eps = X[:, 1] * X[:, 2] * eps
    return _mean_function(X, model.model_id) + eps


def _check_pairs(pairs, d: int, label: str):
    for i, j in pairs:
        if not (1 <= i <= j <= d):
            raise ValueError(
                f"{label} pair ({i}, {j}) not normalized within 1..{d}"
            )


def tpr_fpr(truth, selected, d: int):
    """Recovery rates over all unordered pairs including diagonals.

    TPR = |I intersect Ihat| / |I| (None when I is empty);
    FPR = |Ihat \\ I| / (C(d, 2) + d - |I|). Computed in exact rational
    arithmetic, then converted to float.
    """
    truth = set(truth)
    selected = set(selected)
    _check_pairs(truth, d, "truth")
    _check_pairs(selected, d, "selected")
    denom = math.comb(d, 2) + d - len(truth)
    # truth covering every pair leaves no room for a false positive
    fpr = float(Fraction(len(selected - truth), denom)) if denom else 0.0
    if not truth:
        return None, fpr
    tpr = float(Fraction(len(truth & selected), len(truth)))
    return tpr, fpr


def _cv_seed_for(seed: int) -> int:
    return int(np.random.SeedSequence((seed, _CV_STREAM)).generate_state(1)[0])


def _limit_blas_threads():
    # workers each get one BLAS thread so n_jobs processes do not thrash
    try:
        import threadpoolctl

        global _THREAD_LIMIT
        _THREAD_LIMIT = threadpoolctl.threadpool_limits(limits=1)
    except ImportError:
        pass


def _run_one_rep(args):
    (rep, seed, design, model, cfg, use_cv, cv_folds, grid_size, span,
     screen, backend, certify) = args
    record = RepRecord(rep=rep, seed=seed)
    try:
        X = sample_design(replace(design, seed=seed))
        y = gen_response(X, model, seed)
        data = DataSet(y=y, X=X)
        t0 = time.perf_counter()
        if use_cv:
            result = fit_pipeline(
                data, cfg, cv_folds=cv_folds, cv_seed=_cv_seed_for(seed),
                grid_size=grid_size, span=span, screen=screen,
                backend=backend,
            )
        else:
            result = fit_pipeline(data, cfg, screen=screen, backend=backend)
        record.fit_seconds = time.perf_counter() - t0
        selected = set(result.estimate.support)
        record.tpr, record.fpr = tpr_fpr(model.truth, selected, design.p)
        record.n_selected = len(selected)
        record.selected_lam = result.lam
        record.converged = result.report.converged
        if model.model_id == 8:
            record.extra["eps_pair_selected"] = (2, 3) in selected
        if certify:
            from .oracle import kkt_check, kkt_tolerance

            tol = cfg.tol if cfg is not None else 1e-3
            cert = kkt_check(
                result.report.state.Phi, result.moments, result.lam,
                kkt_tolerance(tol, result.moments.S),
            )
            record.extra["kkt_passed"] = cert.passed
            record.extra["kkt_on"] = cert.max_violation_on_support
            record.extra["kkt_off"] = cert.max_violation_off_support
    except Exception as exc:  # noqa: BLE001 - recorded, excluded, counted
        record.error = f"{type(exc).__name__}: {exc}"
    return record


def run_experiment(design: DesignSpec, model: ModelSpec, reps: int,
                   cfg: SolverConfig | None = None, *, use_cv: bool = True,
                   cv_folds: int = 10, grid_size: int = 20,
                   span: float = 100.0, screen: int | None = None,
                   backend: str | None = None, certify: bool = False,
                   n_jobs: int = 1) -> MetricsReport:
    """Replicate generate-fit-score `reps` times and aggregate.

    Replication r uses seed design.seed + r. Failed replications are
    recorded and excluded from the aggregates. Results are identical for
    any n_jobs because aggregation goes by replication index. With
    `certify` each record carries a KKT certificate for its fit.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    if design.p < model.min_p:
        raise ValueError(
            f"model {model.model_id} requires p >= {model.min_p}, "
            f"got p = {design.p}"
        )
    tasks = [
        (r, design.seed + r, design, model, cfg, use_cv, cv_folds,
         grid_size, span, screen, backend, certify)
        for r in range(reps)
    ]
    if n_jobs > 1:
        with ProcessPoolExecutor(
            max_workers=n_jobs, initializer=_limit_blas_threads
        ) as pool:
            records = list(pool.map(_run_one_rep, tasks, chunksize=1))
    else:
        records = [_run_one_rep(t) for t in tasks]
    records.sort(key=lambda rec: rec.rep)

    good = [rec for rec in records if rec.error is None]
    failures = len(records) - len(good)
    if failures:
        warnings.warn(f"{failures} of {reps} replications failed", RuntimeWarning)
    if not good:
        raise RuntimeError("all replications failed")

    fprs = np.array([rec.fpr for rec in good])
    times = np.array([rec.fit_seconds for rec in good])
    has_truth = bool(model.truth)
    if has_truth:
        tprs = np.array([rec.tpr for rec in good])
        tpr_mean = float(tprs.mean())
        tpr_se = float(tprs.std(ddof=1) / math.sqrt(len(good))) \
            if len(good) > 1 else 0.0
    else:
        tpr_mean = None
        tpr_se = None
    return MetricsReport(
        tpr=tpr_mean,
        fpr=float(fprs.mean()),
        tpr_se=tpr_se,
        fpr_se=float(fprs.std(ddof=1) / math.sqrt(len(good)))
        if len(good) > 1 else 0.0,
        time_mean=float(times.mean()),
        time_sd=float(times.std(ddof=1)) if len(good) > 1 else 0.0,
        records=records,
        failures=failures,
    )
