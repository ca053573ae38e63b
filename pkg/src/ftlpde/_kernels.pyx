# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled follow-the-leader kernels for v(rho) = vscale * (1 - rho**gamma).

The chain y_0 < ... < y_m moves by  y_j' = v(ell / (y_{j+1} - y_j))  for j < m
and  y_m' = v(0).  Functions return a negative status / ``inf`` error when a
gap is not strictly positive.
"""

from libc.math cimport pow, fabs, INFINITY

import numpy as np


cdef inline double _vel(double rho, double gamma, double vscale) noexcept nogil:
    if gamma == 1.0:
        return vscale * (1.0 - rho)
    if gamma == 2.0:
        return vscale * (1.0 - rho * rho)
    return vscale * (1.0 - pow(rho, gamma))


cdef int _chain(const double[::1] y, double ell, double gamma, double vscale,
                double[::1] out) noexcept nogil:
    cdef Py_ssize_t j, m = y.shape[0] - 1
    cdef double gap
    for j in range(m):
        gap = y[j + 1] - y[j]
        if not gap > 0.0:
            return -1
        out[j] = _vel(ell / gap, gamma, vscale)
    out[m] = vscale
    return 0


def chain_velocities(const double[::1] y, double ell, double gamma, double vscale, double[::1] out):
    """Fill ``out`` with chain velocities; returns 0, or -1 on a non-positive gap."""
    with nogil:
        status = _chain(y, ell, gamma, vscale, out)
    return status


def chain_bs23_attempt(const double[::1] y, const double[::1] f0, double h, double ell,
                       double gamma, double vscale, double rtol, double atol,
                       double[::1] y_new, double[::1] f_new):
    """One Bogacki-Shampine 3(2) step; returns the scaled max-norm error estimate.

    ``f_new`` receives f(y_new) (first-same-as-last). The error scale is
    ``atol + rtol * span`` with span the larger chain extent, which keeps the
    step sequence invariant under translations.
    """
    cdef Py_ssize_t n = y.shape[0], i
    cdef double[::1] k2 = np.empty(n)
    cdef double[::1] k3 = np.empty(n)
    cdef double[::1] tmp = np.empty(n)
    cdef double e, emax = 0.0, span, sc
    cdef int status
    with nogil:
        for i in range(n):
            tmp[i] = y[i] + 0.5 * h * f0[i]
        status = _chain(tmp, ell, gamma, vscale, k2)
        if status == 0:
            for i in range(n):
                tmp[i] = y[i] + 0.75 * h * k2[i]
            status = _chain(tmp, ell, gamma, vscale, k3)
        if status == 0:
            for i in range(n):
                y_new[i] = y[i] + h * (2.0 / 9.0 * f0[i] + 1.0 / 3.0 * k2[i] + 4.0 / 9.0 * k3[i])
            status = _chain(y_new, ell, gamma, vscale, f_new)
        if status == 0:
            span = y[n - 1] - y[0]
            if y_new[n - 1] - y_new[0] > span:
                span = y_new[n - 1] - y_new[0]
            sc = atol + rtol * span
            for i in range(n):
                e = fabs(h * (-5.0 / 72.0 * f0[i] + 1.0 / 12.0 * k2[i]
                              + 1.0 / 9.0 * k3[i] - 1.0 / 8.0 * f_new[i]))
                if e > emax:
                    emax = e
            emax = emax / sc
    if status != 0:
        return INFINITY
    return emax
