"""Symmetrized estimates, interaction supports, and wide-data pre-screening.

Index convention: support pairs and kept-column indices are 1-based (the
variables are x1..xp everywhere in files and reports) and pairs are stored
with i <= j. Diagonal pairs (i, i) are legal support members: squared
terms are interactions of a variable with itself.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .moments import DataSet, MomentPair, compute_moments
from .solver import SolveReport, SolverConfig, solve
from .tuning import CvResult, LambdaPath, cv_select, lambda_path


@dataclass(frozen=True)
class PsiEstimate:
    """Exactly symmetric estimate with its exact-zero support.

    The support is recomputable from the matrix: it is the set of (i, j),
    i <= j, 1-based, with a nonzero entry.
    """

    Psi_hat: np.ndarray
    support: tuple[tuple[int, int], ...]
    lam: float
    names: tuple[str, ...] | None = None


@dataclass(frozen=True)
class ScreenReport:
    """Columns kept by the plug-in screen, with all column scores."""

    kept: tuple[int, ...]  # 1-based, sorted
    scores: np.ndarray  # l1 norm of each plug-in column
    keep: int


@dataclass
class FitResult:
    """Everything a pipeline run produced.

    `estimate` satisfies the public contract (support in original column
    positions); the rest carries the artifacts needed for certification:
    the solved moments and raw Phi block live in screened coordinates.
    """

    estimate: PsiEstimate
    report: SolveReport
    moments: MomentPair
    lam: float
    screen: ScreenReport | None = None
    cv: CvResult | None = None
    path: LambdaPath | None = None


def support_of(M, names=None):
    """Exact-nonzero upper-triangle support of a matrix, 1-based pairs."""
    ii, jj = np.nonzero(M)
    pairs = sorted({(int(min(i, j)) + 1, int(max(i, j)) + 1)
                    for i, j in zip(ii, jj)})
    return tuple(pairs)


def symmetrize_and_extract(phi_hat, lam: float,
                           names=None) -> PsiEstimate:
    """Average a solution with its transpose and read off the support.

    An entry pair where exactly one of (i,j), (j,i) is zero averages to a
    nonzero and is therefore part of the support.
    """
    phi_hat = np.asarray(phi_hat, dtype=np.float64)
    if not np.isfinite(phi_hat).all():
        raise ValueError("non-finite entries in estimate")
    psi = (phi_hat + phi_hat.T) / 2.0
    return PsiEstimate(
        Psi_hat=psi,
        support=support_of(psi),
        lam=float(lam),
        names=tuple(names) if names is not None else None,
    )


def top_k_columns(scores, keep: int) -> tuple[int, ...]:
    """Indices (1-based, sorted) of the `keep` largest scores; ties go to
    the lower column index."""
    order = np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")
    return tuple(sorted(int(j) + 1 for j in order[:keep]))


def prescreen(data: DataSet, keep: int) -> ScreenReport:
    """Rank columns of the plug-in estimate S^- Q S^- by l1 norm, keep the top.

    S^- is the Moore-Penrose pseudo-inverse via spectral decomposition with
    relative cutoff 1e-10 * p.
    """
    if not 1 <= keep <= data.p:
        raise ValueError(f"need 1 <= keep <= p, got keep={keep}, p={data.p}")
    mo = compute_moments(data)
    w, V = np.linalg.eigh(mo.S)
    w_max = float(w.max())
    if w_max <= 0.0:
        raise ValueError("S is entirely zero; nothing to screen")
    cutoff = 1e-10 * data.p * w_max
    inv_w = np.where(w > cutoff, 1.0 / np.where(w > cutoff, w, 1.0), 0.0)
    S_pinv = (V * inv_w) @ V.T
    psi_plug = S_pinv @ mo.Q @ S_pinv
    scores = np.abs(psi_plug).sum(axis=0)
    return ScreenReport(
        kept=top_k_columns(scores, keep), scores=scores, keep=keep
    )


def _embed(phi, kept, p_full):
    """Scatter a screened-space matrix back into original coordinates."""
    out = np.zeros((p_full, p_full))
    idx = np.asarray(kept, dtype=np.intp) - 1
    out[np.ix_(idx, idx)] = phi
    return out


def fit_pipeline(data: DataSet, cfg: SolverConfig | None = None, *,
                 cv_folds: int = 10, cv_seed: int | None = None,
                 grid_size: int = 20, span: float = 100.0,
                 screen: int | None = None,
                 backend: str | None = None) -> FitResult:
    """Optional screen, moments, fixed-penalty or CV solve, symmetrize.

    With `cv_seed` set, the penalty in `cfg` (if any) is ignored and chosen
    by cross-validation along a `grid_size`-point path; otherwise `cfg`
    must carry the penalty. Support indices in the returned estimate refer
    to original column positions, mapped back through the screen.
    """
    if cv_seed is None and cfg is None:
        raise ValueError("need either a SolverConfig with lam or cv_seed")
    base_cfg = cfg if cfg is not None else SolverConfig(lam=1.0)

    screen_report = None
    work = data
    if screen is not None:
        screen_report = prescreen(data, screen)
        idx = np.asarray(screen_report.kept, dtype=np.intp) - 1
        work = DataSet(
            y=data.y,
            X=data.X[:, idx],
            names=tuple(data.names[j] for j in idx),
        )

    mo = compute_moments(work)
    cv_result = None
    path = None
    if cv_seed is not None:
        path = lambda_path(mo, work.n, grid_size=grid_size, span=span)
        cv_result = cv_select(work, path, cv_folds, cv_seed, base_cfg,
                              backend=backend)
        lam = cv_result.selected
    else:
        lam = base_cfg.lam

    report = solve(mo, replace(base_cfg, lam=lam), backend=backend)
    if not report.converged:
        warnings.warn(
            f"solve hit max_iter={base_cfg.max_iter} without converging "
            f"(eta_p={report.state.eta_p:.3g}, eta_d={report.state.eta_d:.3g})",
            RuntimeWarning,
        )

    phi = report.state.Phi
    if screen_report is not None:
        phi = _embed(phi, screen_report.kept, data.p)
    estimate = symmetrize_and_extract(phi, lam, names=data.names)
    return FitResult(
        estimate=estimate,
        report=report,
        moments=mo,
        lam=lam,
        screen=screen_report,
        cv=cv_result,
        path=path,
    )
