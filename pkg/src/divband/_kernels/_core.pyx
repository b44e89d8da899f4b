# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: pointwise middle-region bisection and the coupled
clip iteration. Mirrors _ref.py exactly; see there for semantics."""

import numpy as np

from libc.math cimport exp, fabs, pow, INFINITY


cdef inline double _g(int fam_id, double param, double y) nogil:
    cdef double base
    if fam_id == 0:  # kl
        return exp(y - 1.0)
    elif fam_id == 1:  # reverse-kl
        if y < 0.0:
            return -1.0 / y
        return INFINITY
    elif fam_id == 2:  # hellinger2
        if y < 1.0:
            return 1.0 / ((1.0 - y) * (1.0 - y))
        return INFINITY
    elif fam_id == 3:  # chi2
        base = 1.0 + 0.5 * y
        return base if base > 0.0 else 0.0
    elif fam_id == 4:  # alpha
        base = 1.0 + (param - 1.0) * y
        if param > 1.0:
            if base > 0.0:
                return pow(base, 1.0 / (param - 1.0))
            return 0.0
        if base > 0.0:
            if base < 1e-300:
                base = 1e-300
            return pow(base, 1.0 / (param - 1.0))
        return INFINITY
    elif fam_id == 5:  # neyman-chi2
        if y < 1.0:
            return pow(1.0 - y, -0.5)
        return INFINITY
    return -1.0


def middle_delta(
    const double[:] p0m,
    const double[:] p1m,
    double eta0,
    double nu0,
    double eta1,
    double nu1,
    double lam,
    int fam0_id,
    double par0,
    int fam1_id,
    double par1,
    int iters=60,
):
    cdef Py_ssize_t n = p0m.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[:] tv = out_arr
    cdef Py_ssize_t i
    cdef int k
    cdef double tlo, thi, t, lhs, rhs
    with nogil:
        for i in range(n):
            tlo = 0.0
            thi = 1.0
            for k in range(iters):
                t = 0.5 * (tlo + thi)
                lhs = lam * _g(fam0_id, par0, (lam * t + eta0) / nu0) * p0m[i]
                rhs = _g(fam1_id, par1, (1.0 - t + eta1) / nu1) * p1m[i]
                if lhs > rhs:
                    thi = t
                else:
                    tlo = t
            tv[i] = 0.5 * (tlo + thi)
    return out_arr


def clip_iterate(
    const double[:] p0,
    const double[:] p1,
    double a0,
    double b0,
    double a1,
    double b1,
    double lam,
    const double[:] q1_init,
    double fp_tol,
    int max_iters,
    double damping,
):
    cdef Py_ssize_t n = p0.shape[0]
    q0_arr = np.empty(n, dtype=np.float64)
    q1_arr = np.array(q1_init, dtype=np.float64, copy=True)
    cdef double[:] q0v = q0_arr
    cdef double[:] q1v = q1_arr
    cdef Py_ssize_t i
    cdef int it = 0
    cdef double resid = INFINITY
    cdef double lo, hi, cand0, cand1, d0, d1, change

    with nogil:
        for i in range(n):
            lo = a0 * p0[i]
            hi = b0 * p0[i]
            cand0 = q1v[i] / lam
            if cand0 < lo:
                cand0 = lo
            if cand0 > hi:
                cand0 = hi
            q0v[i] = cand0
        for it in range(1, max_iters + 1):
            change = 0.0
            for i in range(n):
                lo = a0 * p0[i]
                hi = b0 * p0[i]
                cand0 = q1v[i] / lam
                if cand0 < lo:
                    cand0 = lo
                if cand0 > hi:
                    cand0 = hi
                if damping < 1.0 and it > 1:
                    cand0 = (1.0 - damping) * q0v[i] + damping * cand0
                d0 = fabs(cand0 - q0v[i])
                if d0 > change:
                    change = d0
                q0v[i] = cand0

                lo = a1 * p1[i]
                hi = b1 * p1[i]
                cand1 = lam * cand0
                if cand1 < lo:
                    cand1 = lo
                if cand1 > hi:
                    cand1 = hi
                if damping < 1.0 and it > 1:
                    cand1 = (1.0 - damping) * q1v[i] + damping * cand1
                d1 = fabs(cand1 - q1v[i])
                if d1 > change:
                    change = d1
                q1v[i] = cand1
            resid = change
            if resid < fp_tol:
                break
    return q0_arr, q1_arr, it, resid
