"""Random spatiotemporal input functions u(x, t).

Two generators: Gaussian-filtered white noise (GRF) and random tensor-product
Chebyshev expansions. Both return fields standardized to zero mean and unit
standard deviation.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DegenerateFieldError, DomainError, ShapeError
from .rng import substream

GRF = "grf"
CHEBYSHEV = "chebyshev"
GENERATORS = (GRF, CHEBYSHEV)

MAX_ATTEMPTS = 8
MIN_STD = 1e-12
TRUNCATE = 4.0


@dataclass(frozen=True)
class InputFunction:
    values: np.ndarray
    generator: str
    seed: int
    index: int = 0

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True)
class GrfConfig:
    M: int
    T: int
    count: int = 10
    length_scale: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.length_scale <= 0:
            raise DomainError("length_scale must be positive")
        _check_dims(self.M, self.T, self.count)


@dataclass(frozen=True)
class ChebConfig:
    M: int
    T: int
    count: int = 10
    degree: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.degree < 1:
            raise DomainError("degree must be >= 1")
        _check_dims(self.M, self.T, self.count)


def _check_dims(M, T, count):
    if M < 2 or T < 2:
        raise ShapeError(f"grid must be at least 2x2, got {M}x{T}")
    if count < 1:
        raise DomainError("need at least one function")


def chebyshev_T(n, x):
    """First-kind Chebyshev polynomial T_n(x) by the three-term recurrence."""
    if n < 0:
        raise DomainError("degree must be non-negative")
    x = np.asarray(x, dtype=np.float64)
    if np.any(np.abs(x) > 1.0):
        raise DomainError("Chebyshev argument outside [-1, 1]")
    prev, cur = np.ones_like(x), x.copy()
    if n == 0:
        out = prev
    else:
        for _ in range(n - 1):
            prev, cur = cur, 2.0 * x * cur - prev
        out = cur
    return out if out.ndim else float(out)


def gaussian_kernel_1d(sigma, truncate=TRUNCATE):
    """Normalized sampled Gaussian on ``[-r, r]`` with ``r = int(truncate*sigma + 0.5)``."""
    if sigma <= 0:
        raise DomainError("sigma must be positive")
    r = int(truncate * sigma + 0.5)
    k = np.arange(-r, r + 1, dtype=np.float64)
    w = np.exp(-0.5 * (k / sigma) ** 2)
    return w / w.sum()


def gaussian_filter_2d(field, sigma_x, sigma_t):
    """Separable Gaussian blur, axis 0 with ``sigma_x`` then axis 1 with ``sigma_t``.

    Boundaries are reflected (edge sample repeated); kernels are truncated at
    four standard deviations.
    """
    field = np.asarray(field, dtype=np.float64)
    if field.ndim != 2:
        raise ShapeError("field must be 2-D")
    wx = gaussian_kernel_1d(sigma_x)
    wt = gaussian_kernel_1d(sigma_t)
    out = kernels.convolve_rows_reflect(field.T, wx).T
    return kernels.convolve_rows_reflect(out, wt)


def _standardize(f):
    std = f.std()
    if not np.isfinite(std) or std < MIN_STD:
        return None
    g = (f - f.mean()) / std
    # a second pass removes the rounding residue of the first
    return (g - g.mean()) / g.std()


def _draw(count, seed, tag, make):
    out = []
    for k in range(count):
        for attempt in range(MAX_ATTEMPTS):
            f = _standardize(make(substream(seed, tag, k, attempt)))
            if f is not None:
                break
        else:
            raise DegenerateFieldError(
                f"{tag} function {k}: field stayed constant after {MAX_ATTEMPTS} attempts"
            )
        f.setflags(write=False)
        out.append(InputFunction(f, tag, seed, k))
    return out


def generate_grf(cfg):
    """Filtered white noise with sigma_x = l*M and sigma_t = l*T grid cells."""
    sx, st = cfg.length_scale * cfg.M, cfg.length_scale * cfg.T

    def make(rng):
        return gaussian_filter_2d(rng.standard_normal((cfg.M, cfg.T)), sx, st)

    return _draw(cfg.count, cfg.seed, GRF, make)


def chebyshev_basis(degree, M, T):
    """The ``degree**2`` fields T_i(x) T_j(t) on linspace(-1, 1) grids, i-major."""
    x = np.linspace(-1.0, 1.0, M)
    t = np.linspace(-1.0, 1.0, T)
    tx = [chebyshev_T(i, x) for i in range(degree)]
    tt = [chebyshev_T(j, t) for j in range(degree)]
    return np.stack([np.outer(tx[i], tt[j]) for i in range(degree) for j in range(degree)])


def chebyshev_field(coefficients, basis):
    return np.tensordot(np.asarray(coefficients, dtype=np.float64), basis, axes=1)


def generate_chebyshev(cfg):
    """Standard-normal combinations of the tensor-product Chebyshev basis."""
    basis = chebyshev_basis(cfg.degree, cfg.M, cfg.T)

    def make(rng):
        return chebyshev_field(rng.standard_normal(basis.shape[0]), basis)

    return _draw(cfg.count, cfg.seed, CHEBYSHEV, make)


def generate(generator, M, T, count, seed, length_scale=0.2, degree=5):
    if generator == GRF:
        return generate_grf(GrfConfig(M, T, count, length_scale, seed))
    if generator == CHEBYSHEV:
        return generate_chebyshev(ChebConfig(M, T, count, degree, seed))
    raise DomainError(f"unknown generator {generator!r}; choose from {GENERATORS}")
