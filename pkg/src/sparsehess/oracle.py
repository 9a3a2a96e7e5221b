"""Independent correctness machinery.

A reference solver on the explicit p^2 x p^2 Kronecker system (a code path
deliberately disjoint from the production solver), a KKT certificate
checker, an irrepresentable-condition diagnostic, and a Monte-Carlo check
of the population target on a known three-variable example.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .bench import toeplitz_sigma
from .moments import MomentPair, raw_moments
from .solver import shrinkage

_MAX_REFERENCE_P = 50


@dataclass(frozen=True)
class KktCertificate:
    """Worst stationarity violations of a candidate solution.

    On the support the subgradient is pinned at lam * sign(psi); off the
    support the loss gradient must stay within lam. passed is True iff
    both worst violations are within tol.
    """

    max_violation_on_support: float
    max_violation_off_support: float
    lam: float
    tol: float
    passed: bool


def kkt_tolerance(tol: float, S) -> float:
    """Certificate slack for a solve stopped at residual level `tol`."""
    return 10.0 * tol * (1.0 + float(np.linalg.norm(S)) ** 2)


def reference_solve(moments: MomentPair, lam: float, tol: float = 1e-12,
                    max_iter: int = 500_000):
    """Proximal gradient descent on the vectorized problem, materializing
    the Kronecker Hessian explicitly.

    Guarded to p <= 50 (the dense system has p^4 entries). Stops when the
    successive objective change drops below tol.
    """
    p = moments.p
    if p > _MAX_REFERENCE_P:
        raise ValueError(
            f"reference solver materializes a {p * p} x {p * p} system; "
            f"p <= {_MAX_REFERENCE_P} required"
        )
    if lam <= 0:
        raise ValueError("lam must be > 0")
    S, Q = moments.S, moments.Q
    H = np.kron(S, S)
    c = Q.ravel()
    lip = float(np.linalg.eigvalsh(S).max()) ** 2
    if lip <= 0.0:
        raise ValueError("S has no positive eigenvalue; problem degenerate")
    step = 1.0 / lip
    v = np.zeros(p * p)
    obj = lam * 0.0

    def f(v):
        return 0.5 * float(v @ (H @ v)) - float(c @ v) + lam * float(
            np.abs(v).sum()
        )

    obj = f(v)
    for _ in range(max_iter):
        v = shrinkage(v - step * (H @ v - c), step * lam).ravel()
        new_obj = f(v)
        if abs(obj - new_obj) < tol:
            return v.reshape(p, p)
        obj = new_obj
    warnings.warn(
        f"reference solver did not meet objective tol {tol:g} in "
        f"{max_iter} iterations",
        RuntimeWarning,
    )
    return v.reshape(p, p)


def kkt_check(psi, moments: MomentPair, lam: float, tol: float) -> KktCertificate:
    """Certify stationarity of `psi` for the penalized problem.

    The gradient object is G = S psi S - Q. On-support entries must have
    G + lam*sign(psi) within tol of zero; off-support entries must have
    |G| <= lam + tol.
    """
    psi = np.asarray(psi, dtype=np.float64)
    G = moments.S @ psi @ moments.S - moments.Q
    on = psi != 0.0
    if on.any():
        viol_on = float(np.abs(G[on] + lam * np.sign(psi[on])).max())
    else:
        viol_on = 0.0
    off = ~on
    if off.any():
        viol_off = max(0.0, float(np.abs(G[off]).max()) - lam)
    else:
        viol_off = 0.0
    return KktCertificate(
        max_violation_on_support=viol_on,
        max_violation_off_support=viol_off,
        lam=float(lam),
        tol=float(tol),
        passed=bool(viol_on <= tol and viol_off <= tol),
    )


def irrepresentable_diag(S, support) -> float:
    """max_j l1-norm of Lam11^-1 Lam12[:, j] on the partitioned Kronecker
    matrix Lam = S (x) S.

    `support` is a set of 1-based (i, j) matrix positions (list both (i, j)
    and (j, i) for a symmetric truth). A value below 1 leaves a strict
    irrepresentable margin.
    """
    S = np.asarray(S, dtype=np.float64)
    p = S.shape[0]
    if p > _MAX_REFERENCE_P:
        raise ValueError(f"p <= {_MAX_REFERENCE_P} required")
    support = sorted(set(support))
    if not support:
        raise ValueError("empty support")
    _validate_positions(support, p)
    u = [(i - 1) * p + (j - 1) for i, j in support]
    uc = sorted(set(range(p * p)) - set(u))
    if not uc:
        raise ValueError("empty complement: support covers every entry")
    lam_full = np.kron(S, S)
    lam11 = lam_full[np.ix_(u, u)]
    lam12 = lam_full[np.ix_(u, uc)]
    try:
        solved = np.linalg.solve(lam11, lam12)
    except np.linalg.LinAlgError:
        raise ValueError("singular Lam11 block on the given support") from None
    return float(np.abs(solved).sum(axis=0).max())


def _validate_positions(pairs, p):
    for i, j in pairs:
        if not (1 <= i <= p and 1 <= j <= p):
            raise ValueError(f"position ({i}, {j}) outside 1..{p}")


def toeplitz3_inverse(rho: float):
    """Closed-form inverse of the 3x3 AR(1) Toeplitz covariance."""
    if not 0.0 <= rho < 1.0:
        raise ValueError("rho must be in [0, 1)")
    return (1.0 / (1.0 - rho**2)) * np.array(
        [
            [1.0, -rho, 0.0],
            [-rho, 1.0 + rho**2, -rho],
            [0.0, -rho, 1.0],
        ]
    )


# Population target for y = x1 + x1*x2 + noise on a 3-variable AR(1)
# design: a single unit interaction between the first two variables.
WORKED_EXAMPLE_PSI = np.array(
    [
        [0.0, 1.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, 0.0, 0.0],
    ]
)


def population_psi_check(rho: float, n_mc: int, seed: int) -> float:
    """Monte-Carlo check that the plug-in Sinv Q Sinv recovers the known
    population matrix of the worked three-variable example.

    Returns the max entrywise deviation; it scales like n_mc^-1/2.
    """
    if n_mc < 10**5:
        raise ValueError("n_mc must be >= 1e5 for a meaningful check")
    sigma = toeplitz_sigma(3, rho)
    L = np.linalg.cholesky(sigma)
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n_mc, 3)) @ L.T
    eps = rng.standard_normal(n_mc)
    y = X[:, 0] + X[:, 0] * X[:, 1] + eps
    mo = raw_moments(y, X - X.mean(axis=0))
    inner = np.linalg.solve(mo.S, mo.Q)
    psi_plug = np.linalg.solve(mo.S, inner.T).T
    return float(np.abs(psi_plug - WORKED_EXAMPLE_PSI).max())
