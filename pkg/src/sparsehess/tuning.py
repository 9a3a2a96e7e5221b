"""Penalty selection by K-fold cross-validation over a warm-started path."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .moments import DataSet, MomentPair, raw_moments
from .solver import (
    SolverConfig,
    SolverDivergenceError,
    SolverState,
    solve,
    spectral_radius,
)


@dataclass(frozen=True)
class LambdaPath:
    """Descending penalty grid plus the theory-rate anchor sqrt(log p / n)."""

    values: np.ndarray
    anchor: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or len(v) < 1:
            raise ValueError("path must be a non-empty 1-d array")
        if not (v > 0).all():
            raise ValueError("path values must be positive")
        if len(v) > 1 and not (np.diff(v) < 0).all():
            raise ValueError("path must be strictly decreasing")
        object.__setattr__(self, "values", v)


@dataclass
class CvResult:
    """Per-fold validation losses over the path and the selected penalty."""

    lambdas: np.ndarray
    fold_losses: np.ndarray  # (K, L), NaN rows for excluded folds
    mean_loss: np.ndarray
    se_loss: np.ndarray
    selected: float
    selected_index: int
    failed_folds: tuple[int, ...] = ()
    rule: str = "min-mean"


def lambda_path(moments: MomentPair, n: int, grid_size: int = 20,
                span: float = 100.0) -> LambdaPath:
    """Log-spaced grid from the KKT-at-zero bound max|Q| down by `span`.

    At the top value the all-zero matrix is optimal, so the path starts
    from the sparsest model. The anchor records sqrt(log p / n) with unit
    constant for reference.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    if not span > 1:
        raise ValueError("span must be > 1")
    lam_max = float(np.abs(moments.Q).max())
    if lam_max == 0.0:
        raise ValueError("degenerate problem: Q = 0")
    values = np.geomspace(lam_max, lam_max / span, grid_size)
    anchor = math.sqrt(math.log(moments.p) / n)
    return LambdaPath(values=values, anchor=anchor)


def kfold_split(n: int, K: int, seed: int):
    """Deterministic shuffled K-fold partition; fold sizes differ by <= 1.

    Returns a list of (train_indices, validation_indices) pairs whose
    validation parts are disjoint and exhaust range(n).
    """
    if not 2 <= K <= n:
        raise ValueError(f"need 2 <= K <= n, got K={K}, n={n}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    folds = np.array_split(perm, K)
    out = []
    for k in range(K):
        val = np.sort(folds[k])
        train = np.sort(np.concatenate([folds[j] for j in range(K) if j != k]))
        out.append((train, val))
    return out


def validation_loss(Phi, moments_val: MomentPair) -> float:
    """Unpenalized loss of a fitted Phi on held-out moments."""
    S, Q = moments_val.S, moments_val.Q
    M = S @ Phi @ S
    return 0.5 * float(np.vdot(Phi, M)) - float(np.vdot(Phi, Q))


def path_solve(moments: MomentPair, values, cfg: SolverConfig,
               backend: str | None = None):
    """Solve along a descending penalty grid, warm starting each point.

    The spectral estimate behind tau is computed once and shared by every
    point (S does not change along the path). Returns the list of
    SolveReports in path order.
    """
    tau = cfg.tau_scale * spectral_radius(
        moments.S, cfg.power_iters, cfg.power_tol
    ) ** 2
    reports = []
    init = None
    for lam in values:
        rep = solve(moments, replace(cfg, lam=float(lam)), init=init,
                    backend=backend, tau=tau)
        reports.append(rep)
        init = SolverState(
            Psi=rep.state.Psi, Phi=rep.state.Phi, Lambda=rep.state.Lambda
        )
    return reports


def cv_select(data: DataSet, path: LambdaPath, K: int, seed: int,
              cfg: SolverConfig, backend: str | None = None) -> CvResult:
    """Pick the penalty minimizing mean held-out loss across K folds.

    Each training fold is centered on its own column means, which are also
    applied to the fold's validation rows. Ties break toward the larger
    penalty (the path is descending and argmin takes the first minimum).
    A diverging fold is excluded with a warning; all folds diverging is an
    error.
    """
    values = path.values
    L = len(values)
    folds = kfold_split(data.n, K, seed)
    fold_losses = np.full((K, L), np.nan)
    failed = []
    for k, (train, val) in enumerate(folds):
        X_tr = data.X[train]
        mu_tr = X_tr.mean(axis=0)
        mo_tr = raw_moments(data.y[train], X_tr - mu_tr)
        mo_val = raw_moments(data.y[val], data.X[val] - mu_tr)
        try:
            reports = path_solve(mo_tr, values, cfg, backend=backend)
        except SolverDivergenceError as exc:
            warnings.warn(f"fold {k} excluded: {exc}", RuntimeWarning)
            failed.append(k)
            continue
        for i, rep in enumerate(reports):
            fold_losses[k, i] = validation_loss(rep.state.Phi, mo_val)
    ok = [k for k in range(K) if k not in failed]
    if not ok:
        raise RuntimeError("all cross-validation folds diverged")
    mean_loss = fold_losses[ok].mean(axis=0)
    se_loss = fold_losses[ok].std(axis=0, ddof=1) / math.sqrt(len(ok)) \
        if len(ok) > 1 else np.zeros(L)
    idx = int(np.argmin(mean_loss))
    return CvResult(
        lambdas=values.copy(),
        fold_losses=fold_losses,
        mean_loss=mean_loss,
        se_loss=se_loss,
        selected=float(values[idx]),
        selected_index=idx,
        failed_folds=tuple(failed),
    )
