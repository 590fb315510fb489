# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. Must agree with ``_pykernels`` to rounding."""

import numpy as np
cimport numpy as cnp
from libc.math cimport erfc, exp, sqrt

cnp.import_array()

cdef double INV_SQRT2 = 0.7071067811865476
cdef double INV_SQRT2PI = 0.3989422804014327


def gelu_forward(const double[:, ::1] z):
    cdef Py_ssize_t n = z.shape[0], m = z.shape[1], i, j
    out = np.empty((n, m), dtype=np.float64)
    deriv = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] a = out
    cdef double[:, ::1] d = deriv
    cdef double x, cdf
    with nogil:
        for i in range(n):
            for j in range(m):
                x = z[i, j]
                cdf = 0.5 * erfc(-x * INV_SQRT2)
                a[i, j] = x * cdf
                d[i, j] = cdf + x * INV_SQRT2PI * exp(-0.5 * x * x)
    return out, deriv


cdef inline Py_ssize_t _reflect(Py_ssize_t k, Py_ssize_t n) nogil:
    # half-sample symmetric extension: d c b a | a b c d | d c b a
    cdef Py_ssize_t period = 2 * n
    k = k % period
    if k < 0:
        k += period
    if k >= n:
        k = period - 1 - k
    return k


def convolve_rows_reflect(const double[:, ::1] a, const double[::1] weights):
    """Correlate every row with a centred odd-length kernel, reflect boundaries."""
    cdef Py_ssize_t rows = a.shape[0], n = a.shape[1], K = weights.shape[0]
    cdef Py_ssize_t r = K // 2, i, j, k
    out = np.empty((rows, n), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double[::1] pad = np.empty(n + 2 * r, dtype=np.float64)
    cdef double acc
    with nogil:
        for i in range(rows):
            for j in range(n + 2 * r):
                pad[j] = a[i, _reflect(j - r, n)]
            for j in range(n):
                acc = 0.0
                for k in range(K):
                    acc = acc + weights[k] * pad[j + k]
                o[i, j] = acc
    return out


cdef inline double _flux(double rho, double vf, double rhom) nogil:
    return vf * rho * (1.0 - rho / rhom)


cdef inline double _interface_flux(double left, double right, double vf, double rhom) nogil:
    cdef double crit = 0.5 * rhom
    cdef double demand, supply
    demand = _flux(left if left < crit else crit, vf, rhom)
    supply = _flux(right if right > crit else crit, vf, rhom)
    return demand if demand < supply else supply


def godunov_march(const double[::1] rho0, Py_ssize_t n_steps, double ratio, double vf,
                  double rhom, bint periodic, const double[::1] left, const double[::1] right):
    """Return the (M, n_steps + 1) density history; ``ratio`` is dt/dx."""
    cdef Py_ssize_t M = rho0.shape[0], n, i
    hist = np.empty((M, n_steps + 1), dtype=np.float64)
    cdef double[:, ::1] h = hist
    cdef double[::1] cur = np.array(rho0, dtype=np.float64, copy=True)
    cdef double[::1] flux = np.empty(M + 1, dtype=np.float64)
    for i in range(M):
        h[i, 0] = cur[i]
    with nogil:
        for n in range(n_steps):
            for i in range(1, M):
                flux[i] = _interface_flux(cur[i - 1], cur[i], vf, rhom)
            if periodic:
                flux[0] = _interface_flux(cur[M - 1], cur[0], vf, rhom)
                flux[M] = flux[0]
            else:
                flux[0] = _interface_flux(left[n], cur[0], vf, rhom)
                flux[M] = _interface_flux(cur[M - 1], right[n], vf, rhom)
            for i in range(M):
                cur[i] = cur[i] - ratio * (flux[i + 1] - flux[i])
                h[i, n + 1] = cur[i]
    return hist
