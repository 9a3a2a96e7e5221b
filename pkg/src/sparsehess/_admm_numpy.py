"""Pure-NumPy ADMM inner loop; fallback when the compiled core is absent."""

import math

import numpy as np

NAME = "numpy"


def run_admm(S, Q, lam, rho, tau, tol, max_iter, Psi, Phi, Lambda):
    """Iterate the three-block updates until max(eta_p, eta_d) <= tol.

    All matrices are p x p float64. Psi/Phi/Lambda are the starting triple
    (not modified). Returns

        (Psi, Phi, Lambda, hist, n_iter, converged, diverged_at)

    where hist has one row (eta_p, eta_d, objective) per iteration and
    diverged_at is the 1-based iteration that produced a non-finite
    iterate, or -1.
    """
    rt = rho + tau
    kappa = lam / rho
    hist = np.empty((max_iter, 3))
    M = S @ Psi @ S
    converged = False
    diverged_at = -1
    n_iter = 0
    for k in range(max_iter):
        Psi_n = (Q - Lambda + rho * Phi + tau * Psi - M) / rt
        A = Psi_n + Lambda / rho
        mag = np.abs(A) - kappa
        # np.where keeps sub-threshold entries at an exact +0.0
        Phi_n = np.where(mag > 0.0, np.sign(A) * mag, 0.0)
        Lambda_n = Lambda + rho * (Psi_n - Phi_n)
        eta_p = float(np.linalg.norm(Psi_n - Phi_n))
        eta_d = max(
            float(np.linalg.norm(Psi_n - Psi)),
            float(np.linalg.norm(Phi_n - Phi)),
            float(np.linalg.norm(Lambda_n - Lambda)),
        )
        M = S @ Psi_n @ S
        obj = 0.5 * float(np.vdot(Psi_n, M)) - float(np.vdot(Psi_n, Q))
        obj += lam * float(np.abs(Phi_n).sum())
        hist[k, 0] = eta_p
        hist[k, 1] = eta_d
        hist[k, 2] = obj
        Psi, Phi, Lambda = Psi_n, Phi_n, Lambda_n
        n_iter = k + 1
        if not (math.isfinite(eta_p) and math.isfinite(eta_d) and math.isfinite(obj)):
            diverged_at = n_iter
            break
        if max(eta_p, eta_d) <= tol:
            converged = True
            break
    return Psi, Phi, Lambda, hist[:n_iter].copy(), n_iter, converged, diverged_at
