"""Pure numpy versions of the compiled kernels in ``_ckernels.pyx``."""

import numpy as np
from scipy.special import erfc

_INV_SQRT2 = 0.7071067811865476
_INV_SQRT2PI = 0.3989422804014327


def gelu_forward(z):
    cdf = 0.5 * erfc(-z * _INV_SQRT2)
    return z * cdf, cdf + z * _INV_SQRT2PI * np.exp(-0.5 * z * z)


def _reflect_index(k, n):
    period = 2 * n
    k = np.mod(k, period)
    return np.where(k >= n, period - 1 - k, k)


def convolve_rows_reflect(a, weights):
    """Correlate every row with a centred odd-length kernel, reflect boundaries."""
    n = a.shape[1]
    K = weights.shape[0]
    r = K // 2
    padded = a[:, _reflect_index(np.arange(-r, n + r), n)]
    out = np.zeros_like(a)
    for k in range(K):
        out += weights[k] * padded[:, k:k + n]
    return out


def _interface_flux(left, right, vf, rhom):
    crit = 0.5 * rhom
    dl = np.minimum(left, crit)
    sr = np.maximum(right, crit)
    demand = vf * dl * (1.0 - dl / rhom)
    supply = vf * sr * (1.0 - sr / rhom)
    return np.minimum(demand, supply)


def godunov_march(rho0, n_steps, ratio, vf, rhom, periodic, left, right):
    """Return the (M, n_steps + 1) density history; ``ratio`` is dt/dx."""
    M = rho0.shape[0]
    hist = np.empty((M, n_steps + 1))
    cur = np.array(rho0, dtype=np.float64, copy=True)
    hist[:, 0] = cur
    flux = np.empty(M + 1)
    for n in range(n_steps):
        flux[1:M] = _interface_flux(cur[:-1], cur[1:], vf, rhom)
        if periodic:
            flux[0] = _interface_flux(cur[-1], cur[0], vf, rhom)
            flux[M] = flux[0]
        else:
            flux[0] = _interface_flux(left[n], cur[0], vf, rhom)
            flux[M] = _interface_flux(cur[-1], right[n], vf, rhom)
        cur = cur - ratio * (flux[1:] - flux[:-1])
        hist[:, n + 1] = cur
    return hist
