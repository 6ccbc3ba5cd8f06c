# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: discrete-action assembly and quadrature loops."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

USING_EXTENSION = True


def action_assemble(object W_in, object Vv_in, object Vg_in, double dt,
                    double mu, bint want_grad=True):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] W = np.ascontiguousarray(W_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] Vv = np.ascontiguousarray(Vv_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Vg = np.ascontiguousarray(Vg_in, dtype=np.float64)
    cdef Py_ssize_t m = W.shape[0]
    cdef Py_ssize_t n = W.shape[1]
    cdef Py_ssize_t k, j
    cdef double kinetic = 0.0, potential = 0.0, d
    # Kahan-compensated accumulation: the optimizer's line search must be
    # able to resolve value decreases near the double-precision floor
    cdef double ck = 0.0, cp = 0.0, term, y, s

    for k in range(m - 1):
        for j in range(n):
            d = W[k + 1, j] - W[k, j]
            term = d * d
            y = term - ck
            s = kinetic + y
            ck = (s - kinetic) - y
            kinetic = s
        term = Vv[k] + Vv[k + 1]
        y = term - cp
        s = potential + y
        cp = (s - potential) - y
        potential = s
    cdef double value = 0.5 * kinetic / dt + 0.5 * dt * potential + mu * Vv[m - 1]
    if not want_grad:
        return value, None

    cdef cnp.ndarray[cnp.float64_t, ndim=2] grad = np.empty((m - 1, n), dtype=np.float64)
    for k in range(1, m - 1):
        for j in range(n):
            grad[k - 1, j] = (2.0 * W[k, j] - W[k - 1, j] - W[k + 1, j]) / dt \
                + dt * Vg[k, j]
    for j in range(n):
        grad[m - 2, j] = (W[m - 1, j] - W[m - 2, j]) / dt \
            + (0.5 * dt + mu) * Vg[m - 1, j]
    return value, np.asarray(grad)


def el_residual_max(object W_in, object Vg_in, double dt):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] W = np.ascontiguousarray(W_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Vg = np.ascontiguousarray(Vg_in, dtype=np.float64)
    cdef Py_ssize_t m = W.shape[0]
    cdef Py_ssize_t n = W.shape[1]
    cdef Py_ssize_t k, j
    cdef double best = 0.0, acc, r
    if m < 3:
        return 0.0
    for k in range(1, m - 1):
        acc = 0.0
        for j in range(n):
            r = (W[k + 1, j] - 2.0 * W[k, j] + W[k - 1, j]) / (dt * dt) - Vg[k, j]
            acc += r * r
        acc = sqrt(acc)
        if acc > best:
            best = acc
    return best


def trapezoid(object ts_in, object vals_in):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ts = np.ascontiguousarray(ts_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] vals = np.ascontiguousarray(vals_in, dtype=np.float64)
    cdef Py_ssize_t m = ts.shape[0]
    cdef Py_ssize_t k
    cdef double acc = 0.0
    for k in range(m - 1):
        acc += 0.5 * (ts[k + 1] - ts[k]) * (vals[k + 1] + vals[k])
    return acc
