# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled ADMM inner loop.

Matrix products go through BLAS dgemm; the three elementwise updates and
all residual accumulations are fused into a single pass per iteration, so
no temporaries are allocated inside the loop. Semantics match
``_admm_numpy.run_admm`` (same expression trees per element; summation
order in the norms may differ in the last bits).
"""

import numpy as np

from libc.math cimport fabs, isfinite, sqrt
from scipy.linalg.cython_blas cimport dgemm

NAME = "compiled"


cdef void _spsp(double *s, double *x, double *work, double *out, int p) noexcept nogil:
    # out <- S @ X @ S for C-order buffers: two plain 'N','N' dgemm calls
    # with operands swapped (a C-order product equals the Fortran-order
    # product of the transposes, and S is symmetric).
    cdef char tr = b'N'
    cdef double one = 1.0, zero = 0.0
    dgemm(&tr, &tr, &p, &p, &p, &one, s, &p, x, &p, &zero, work, &p)
    dgemm(&tr, &tr, &p, &p, &p, &one, work, &p, s, &p, &zero, out, &p)


def run_admm(double[:, ::1] S, double[:, ::1] Q, double lam, double rho,
             double tau, double tol, long max_iter,
             double[:, ::1] Psi0, double[:, ::1] Phi0, double[:, ::1] Lambda0):
    """Same contract as the NumPy backend's run_admm."""
    cdef int p = S.shape[0]
    cdef Py_ssize_t pp = <Py_ssize_t> p * p

    psi_a = np.ascontiguousarray(Psi0, dtype=np.float64).copy()
    phi_a = np.ascontiguousarray(Phi0, dtype=np.float64).copy()
    lmb_a = np.ascontiguousarray(Lambda0, dtype=np.float64).copy()
    psi_b = np.empty((p, p))
    phi_b = np.empty((p, p))
    lmb_b = np.empty((p, p))
    work = np.empty((p, p))
    m_arr = np.empty((p, p))
    hist = np.empty((max_iter, 3))

    cdef double[:, ::1] psi_av = psi_a, phi_av = phi_a, lmb_av = lmb_a
    cdef double[:, ::1] psi_bv = psi_b, phi_bv = phi_b, lmb_bv = lmb_b
    cdef double[:, ::1] workv = work, mv = m_arr, histv = hist

    cdef double *sp = &S[0, 0]
    cdef double *qp = &Q[0, 0]
    cdef double *psi = &psi_av[0, 0]
    cdef double *phi = &phi_av[0, 0]
    cdef double *lmb = &lmb_av[0, 0]
    cdef double *psi_n = &psi_bv[0, 0]
    cdef double *phi_n = &phi_bv[0, 0]
    cdef double *lmb_n = &lmb_bv[0, 0]
    cdef double *wk = &workv[0, 0]
    cdef double *m = &mv[0, 0]
    cdef double *tmp

    cdef double rt = rho + tau
    cdef double kappa = lam / rho
    cdef double pn, fn, ln, a, d
    cdef double s_gap, s_dpsi, s_dphi, s_dlmb, l1, trq, trm
    cdef double eta_p, eta_d, obj
    cdef Py_ssize_t idx
    cdef long k, n_iter = 0, diverged_at = -1
    cdef bint converged = False, cur_is_a = True

    with nogil:
        _spsp(sp, psi, wk, m, p)
        for k in range(max_iter):
            s_gap = 0.0
            s_dpsi = 0.0
            s_dphi = 0.0
            s_dlmb = 0.0
            l1 = 0.0
            trq = 0.0
            for idx in range(pp):
                pn = (qp[idx] - lmb[idx] + rho * phi[idx] + tau * psi[idx]
                      - m[idx]) / rt
                a = pn + lmb[idx] / rho
                if a > kappa:
                    fn = a - kappa
                elif a < -kappa:
                    fn = a + kappa
                else:
                    fn = 0.0
                ln = lmb[idx] + rho * (pn - fn)
                d = pn - fn
                s_gap += d * d
                d = pn - psi[idx]
                s_dpsi += d * d
                d = fn - phi[idx]
                s_dphi += d * d
                d = ln - lmb[idx]
                s_dlmb += d * d
                l1 += fabs(fn)
                trq += pn * qp[idx]
                psi_n[idx] = pn
                phi_n[idx] = fn
                lmb_n[idx] = ln
            tmp = psi; psi = psi_n; psi_n = tmp
            tmp = phi; phi = phi_n; phi_n = tmp
            tmp = lmb; lmb = lmb_n; lmb_n = tmp
            cur_is_a = not cur_is_a
            eta_p = sqrt(s_gap)
            eta_d = s_dpsi
            if s_dphi > eta_d:
                eta_d = s_dphi
            if s_dlmb > eta_d:
                eta_d = s_dlmb
            eta_d = sqrt(eta_d)
            _spsp(sp, psi, wk, m, p)
            trm = 0.0
            for idx in range(pp):
                trm += psi[idx] * m[idx]
            obj = 0.5 * trm - trq + lam * l1
            histv[k, 0] = eta_p
            histv[k, 1] = eta_d
            histv[k, 2] = obj
            n_iter = k + 1
            if not (isfinite(eta_p) and isfinite(eta_d) and isfinite(obj)):
                diverged_at = n_iter
                break
            if eta_p <= tol and eta_d <= tol:
                converged = True
                break

    if cur_is_a:
        out = (psi_a, phi_a, lmb_a)
    else:
        out = (psi_b, phi_b, lmb_b)
    return (out[0], out[1], out[2], hist[:n_iter].copy(), int(n_iter),
            bool(converged), int(diverged_at))
