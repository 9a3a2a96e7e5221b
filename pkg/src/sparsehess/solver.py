"""Proximal-linearized ADMM for the l1-penalized matrix quadratic program.

The problem solved is

    min_Psi  tr(Psi^T S Psi S)/2 - tr(Psi Q) + lam * ||Psi||_1

split as Psi = Phi with the l1 term carried by Phi. The Psi-subproblem is
linearized with a G-norm proximal term, G = tau*I - S (x) S, which makes it
an explicit scaled average; Phi is a soft-threshold; the dual ascends on
the gap. tau must exceed the largest eigenvalue of S (x) S, i.e.
lambda_max(S)^2.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass

import numpy as np

from ._backend import get_backend
from .moments import MomentPair


class SolverDivergenceError(RuntimeError):
    """An iterate went non-finite (tau too small or degenerate moments)."""


@dataclass(frozen=True)
class SolverConfig:
    """Penalty level and ADMM controls.

    tau is derived, not stored: tau = tau_scale * lambda_max(S)^2, with
    lambda_max estimated by power iteration.
    """

    lam: float
    rho: float = 1.0
    tau_scale: float = 1.01
    tol: float = 1e-3
    max_iter: int = 10000
    power_iters: int = 1000
    power_tol: float = 1e-10

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be > 0")
        if not self.rho > 0:
            raise ValueError("rho must be > 0")
        if not self.tau_scale > 1:
            raise ValueError("tau_scale must be > 1")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class SolverState:
    """The ADMM triple plus counters and the latest residuals."""

    Psi: np.ndarray
    Phi: np.ndarray
    Lambda: np.ndarray
    n_iter: int = 0
    eta_p: float = math.inf
    eta_d: float = math.inf
    objective: float = math.nan

    @classmethod
    def zeros(cls, p: int) -> "SolverState":
        return cls(
            Psi=np.zeros((p, p)), Phi=np.zeros((p, p)), Lambda=np.zeros((p, p))
        )


@dataclass
class SolveReport:
    """Final state, convergence flag, per-iteration residual history.

    residual_history has one row (eta_p, eta_d, objective) per iteration;
    converged is True iff max(eta_p, eta_d) <= tol at the last iteration.
    """

    state: SolverState
    converged: bool
    residual_history: np.ndarray
    tau: float
    wall_time: float
    backend: str = "numpy"


def spectral_radius(S, power_iters: int = 1000, power_tol: float = 1e-10) -> float:
    """Largest eigenvalue of a symmetric PSD matrix by power iteration.

    Deterministic all-ones start; stops when the Rayleigh estimate is
    stable to power_tol relative. If the tolerance is not reached within
    power_iters the last iterate is used with a warning (after that many
    steps it is accurate to far better than the tau_scale cushion); the
    trace(S) upper bound covers the degenerate case of a start vector in
    the null space of a nonzero S.
    """
    S = np.asarray(S, dtype=np.float64)
    p = S.shape[0]
    x = np.full(p, 1.0 / math.sqrt(p))
    est = 0.0
    for _ in range(power_iters):
        y = S @ x
        norm_y = float(np.linalg.norm(y))
        if norm_y == 0.0:
            if not S.any():
                return 0.0
            warnings.warn(
                "power iteration start vector annihilated; "
                "falling back to trace(S)",
                RuntimeWarning,
            )
            return float(np.trace(S))
        x = y / norm_y
        new_est = float(x @ (S @ x))
        if abs(new_est - est) <= power_tol * max(1.0, abs(new_est)):
            return new_est
        est = new_est
    warnings.warn(
        f"power iteration did not reach tol {power_tol:g} in "
        f"{power_iters} steps; using the last iterate",
        RuntimeWarning,
    )
    return est


def shrinkage(A, t: float):
    """Elementwise soft threshold sign(a) * max(0, |a| - t).

    Entries with |a| <= t come out as an exact +0.0, so downstream support
    extraction can test equality with zero.
    """
    if t < 0:
        raise ValueError("threshold must be >= 0")
    A = np.asarray(A, dtype=np.float64)
    mag = np.abs(A) - t
    return np.where(mag > 0.0, np.sign(A) * mag, 0.0)


def psi_update(state: SolverState, moments: MomentPair, cfg: SolverConfig,
               tau: float):
    """One smooth-block step: the G-norm proximal minimizer in closed form.

    Psi_next = (Q - Lambda + rho*Phi + tau*Psi - S Psi S) / (rho + tau),
    where S Psi S is the loss gradient at the current Psi.
    """
    S, Q = moments.S, moments.Q
    M = S @ state.Psi @ S
    return (Q - state.Lambda + cfg.rho * state.Phi + tau * state.Psi - M) / (
        cfg.rho + tau
    )


def phi_update(psi_next, Lambda, cfg: SolverConfig):
    """One l1-block step: soft threshold of Psi_next + Lambda/rho at lam/rho."""
    return shrinkage(psi_next + Lambda / cfg.rho, cfg.lam / cfg.rho)


def dual_update(Lambda, psi_next, phi_next, rho: float):
    """Dual ascent on the split gap: Lambda + rho*(Psi_next - Phi_next)."""
    return Lambda + rho * (psi_next - phi_next)


def residuals(prev: SolverState, next: SolverState) -> tuple[float, float]:
    """Primal and dual residuals between consecutive states.

    eta_p is the feasibility gap ||Psi - Phi||_F of the new state; eta_d is
    the largest Frobenius change across the three blocks.
    """
    eta_p = float(np.linalg.norm(next.Psi - next.Phi))
    eta_d = max(
        float(np.linalg.norm(next.Psi - prev.Psi)),
        float(np.linalg.norm(next.Phi - prev.Phi)),
        float(np.linalg.norm(next.Lambda - prev.Lambda)),
    )
    return eta_p, eta_d


def objective_value(Psi, Phi, moments: MomentPair, lam: float) -> float:
    """Penalized objective on the (Psi, Phi) blocks; diagnostics only."""
    S, Q = moments.S, moments.Q
    M = S @ Psi @ S
    return (
        0.5 * float(np.vdot(Psi, M))
        - float(np.vdot(Psi, Q))
        + lam * float(np.abs(Phi).sum())
    )


def solve(moments: MomentPair, cfg: SolverConfig,
          init: SolverState | None = None, backend: str | None = None,
          tau: float | None = None) -> SolveReport:
    """Run the ADMM to convergence (or max_iter) and report.

    init defaults to the all-zero triple; passing a previous state warm
    starts a path solve. tau defaults to tau_scale * lambda_max(S)^2 and
    may be passed explicitly to reuse one spectral estimate across a path.
    Deterministic: identical inputs give identical residual histories.
    Raises SolverDivergenceError on non-finite iterates; a max_iter exit
    returns converged=False with the state.
    """
    p = moments.p
    if tau is None:
        lam_max = spectral_radius(moments.S, cfg.power_iters, cfg.power_tol)
        tau = cfg.tau_scale * lam_max**2
    if init is None:
        init = SolverState.zeros(p)
    S = np.ascontiguousarray(moments.S)
    Q = np.ascontiguousarray(moments.Q)
    Psi0 = np.ascontiguousarray(init.Psi, dtype=np.float64)
    Phi0 = np.ascontiguousarray(init.Phi, dtype=np.float64)
    Lam0 = np.ascontiguousarray(init.Lambda, dtype=np.float64)
    mod = get_backend(backend)
    t0 = time.perf_counter()
    Psi, Phi, Lam, hist, n_iter, converged, diverged_at = mod.run_admm(
        S, Q, cfg.lam, cfg.rho, tau, cfg.tol, cfg.max_iter, Psi0, Phi0, Lam0
    )
    wall = time.perf_counter() - t0
    if diverged_at >= 0:
        raise SolverDivergenceError(
            f"non-finite iterate at iteration {diverged_at} "
            f"(lam={cfg.lam:g}, rho={cfg.rho:g}, tau={tau:g})"
        )
    state = SolverState(
        Psi=Psi,
        Phi=Phi,
        Lambda=Lam,
        n_iter=n_iter,
        eta_p=float(hist[-1, 0]),
        eta_d=float(hist[-1, 1]),
        objective=float(hist[-1, 2]),
    )
    return SolveReport(
        state=state,
        converged=converged,
        residual_history=hist,
        tau=tau,
        wall_time=wall,
        backend=mod.NAME,
    )
