import math

import numpy as np
import pytest
from scipy import ndimage

from pideeponet.errors import DegenerateFieldError, DomainError
from pideeponet.funcgen import (
    ChebConfig, GrfConfig, chebyshev_T, chebyshev_basis, chebyshev_field, gaussian_filter_2d,
    gaussian_kernel_1d, generate, generate_chebyshev, generate_grf,
)


def test_chebyshev_values():
    assert chebyshev_T(0, 0.7) == 1.0
    assert chebyshev_T(2, 0.5) == pytest.approx(-0.5, abs=1e-15)
    assert chebyshev_T(3, 0.5) == pytest.approx(-1.0, abs=1e-15)
    x = np.linspace(-1, 1, 41)
    for n in range(8):
        np.testing.assert_allclose(chebyshev_T(n, x), np.cos(n * np.arccos(x)), atol=1e-13)


def test_chebyshev_domain():
    with pytest.raises(DomainError):
        chebyshev_T(2, 1.5)


def test_gauss_chebyshev_orthogonality():
    n = 256
    nodes = np.cos((2 * np.arange(1, n + 1) - 1) * math.pi / (2 * n))
    for i in range(7):
        for j in range(7):
            val = math.pi / n * np.sum(chebyshev_T(i, nodes) * chebyshev_T(j, nodes))
            want = 0.0 if i != j else (math.pi if i == 0 else math.pi / 2)
            assert abs(val - want) < 1e-10


def test_grf_normalized_and_deterministic():
    fs = generate_grf(GrfConfig(21, 60, count=4, seed=3))
    for f in fs:
        assert abs(f.values.mean()) < 1e-9 and abs(f.values.std() - 1) < 1e-9
        assert f.shape == (21, 60)
    again = generate_grf(GrfConfig(21, 60, count=4, seed=3))
    for a, b in zip(fs, again):
        np.testing.assert_array_equal(a.values, b.values)
    assert not np.array_equal(fs[0].values, fs[1].values)


def _roughness(f):
    return np.mean(np.abs(np.diff(f, axis=0)))


def test_longer_length_scale_is_smoother():
    smooth = generate_grf(GrfConfig(21, 80, count=1, length_scale=0.2, seed=5))[0].values
    rough = generate_grf(GrfConfig(21, 80, count=1, length_scale=0.02, seed=5))[0].values
    assert _roughness(smooth) < _roughness(rough)


def test_filter_constant_field():
    f = np.full((9, 12), 3.25)
    np.testing.assert_allclose(gaussian_filter_2d(f, 1.3, 2.1), f, rtol=0, atol=1e-14)


def test_filter_impulse_centre():
    f = np.zeros((21, 21))
    f[10, 10] = 1.0
    k = gaussian_kernel_1d(1.0)
    assert gaussian_filter_2d(f, 1.0, 1.0)[10, 10] == pytest.approx(k[k.size // 2] ** 2, rel=1e-14)


def test_filter_near_delta(rng):
    f = rng.normal(size=(7, 9))
    np.testing.assert_allclose(gaussian_filter_2d(f, 0.05, 0.05), f, atol=1e-6)


@pytest.mark.parametrize("sx,st", [(0.7, 3.0), (4.2, 12.0), (2.0, 0.5)])
def test_filter_matches_scipy_reflect(rng, sx, st):
    f = rng.normal(size=(21, 60))
    ref = ndimage.gaussian_filter(f, (sx, st), mode="reflect", truncate=4.0)
    np.testing.assert_allclose(gaussian_filter_2d(f, sx, st), ref, atol=1e-13)


def test_chebyshev_generator():
    fs = generate_chebyshev(ChebConfig(15, 40, count=5, degree=4, seed=2))
    for f in fs:
        assert abs(f.values.mean()) < 1e-9 and abs(f.values.std() - 1) < 1e-9
    assert chebyshev_basis(4, 15, 40).shape == (16, 15, 40)


def test_chebyshev_degree_one_is_degenerate():
    with pytest.raises(DegenerateFieldError):
        generate_chebyshev(ChebConfig(10, 10, count=1, degree=1))


def test_t1_t1_is_outer_product():
    basis = chebyshev_basis(2, 11, 13)
    f = chebyshev_field([0, 0, 0, 1], basis)
    np.testing.assert_allclose(f, np.outer(np.linspace(-1, 1, 11), np.linspace(-1, 1, 13)),
                               atol=1e-15)


def test_generate_dispatch():
    assert len(generate("grf", 5, 6, 2, 0)) == 2
    assert generate("chebyshev", 5, 6, 2, 0)[0].generator == "chebyshev"
    with pytest.raises(DomainError):
        generate("fourier", 5, 6, 2, 0)
