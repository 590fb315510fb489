"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
numpy implementations in ``_pykernels`` are used. Setting the environment
variable ``PIDEEPONET_PURE=1`` forces the numpy path.
"""

import os

import numpy as np

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if not os.environ.get("PIDEEPONET_PURE"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels


def available_backends():
    names = ["python"]
    try:
        from . import _ckernels  # noqa: F401

        names.append("cython")
    except ImportError:
        pass
    return names


def get_backend(name=None):
    """Return the kernel module for ``name`` ('python', 'cython' or None for active)."""
    if name is None:
        return _impl
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}")


def gelu_forward(z):
    """GELU value and derivative, elementwise on a 2-D float64 array."""
    z = np.ascontiguousarray(z, dtype=np.float64)
    if z.ndim != 2:
        shape = z.shape
        a, d = _impl.gelu_forward(z.reshape(1, -1))
        return a.reshape(shape), d.reshape(shape)
    return _impl.gelu_forward(z)


def convolve_rows_reflect(a, weights):
    return _impl.convolve_rows_reflect(
        np.ascontiguousarray(a, dtype=np.float64),
        np.ascontiguousarray(weights, dtype=np.float64),
    )


def godunov_march(rho0, n_steps, ratio, vf, rhom, periodic, left, right):
    return _impl.godunov_march(
        np.ascontiguousarray(rho0, dtype=np.float64),
        int(n_steps),
        float(ratio),
        float(vf),
        float(rhom),
        bool(periodic),
        np.ascontiguousarray(left, dtype=np.float64),
        np.ascontiguousarray(right, dtype=np.float64),
    )
