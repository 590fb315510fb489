import numpy as np
import pytest

from pideeponet import _pykernels, kernels

BACKENDS = kernels.available_backends()
needs_ext = pytest.mark.skipif("cython" not in BACKENDS, reason="compiled extension not built")


def test_backend_selection():
    assert kernels.BACKEND in ("python", "cython")
    assert kernels.get_backend("python") is _pykernels
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_gelu_kernel_shapes(rng):
    z = rng.normal(size=(3, 4, 2))
    a, d = kernels.gelu_forward(z)
    assert a.shape == d.shape == z.shape


@needs_ext
def test_gelu_parity(rng):
    z = rng.normal(0, 4, (50, 17))
    c = kernels.get_backend("cython").gelu_forward(z)
    p = _pykernels.gelu_forward(z)
    for x, y in zip(c, p):
        np.testing.assert_allclose(x, y, rtol=1e-14, atol=1e-300)


@needs_ext
@pytest.mark.parametrize("width", [1, 5, 41])
def test_convolution_parity(rng, width):
    a = rng.normal(size=(7, 30))
    w = rng.random(width)
    w /= w.sum()
    c = kernels.get_backend("cython").convolve_rows_reflect(a, w)
    np.testing.assert_allclose(c, _pykernels.convolve_rows_reflect(a, w), rtol=0, atol=1e-13)


@needs_ext
@pytest.mark.parametrize("periodic", [True, False])
def test_godunov_parity(rng, periodic):
    rho0 = rng.uniform(0, 0.12, 15)
    left, right = rng.uniform(0, 0.12, 40), rng.uniform(0, 0.12, 40)
    args = (rho0, 40, 0.045, 19.965, 0.12, periodic, left, right)
    c = kernels.get_backend("cython").godunov_march(*args)
    np.testing.assert_allclose(c, _pykernels.godunov_march(*args), rtol=0, atol=1e-15)


def test_reflect_padding_wider_than_row():
    a = np.arange(3.0)[None, :]
    w = np.full(9, 1 / 9)
    out = kernels.convolve_rows_reflect(a, w)
    # reflected row: 2 1 0 | 0 1 2 | 2 1 0 ...
    ext = np.array([0, 1, 2, 2, 1, 0, 0, 1, 2, 2, 1, 0, 0, 1, 2], float)
    want = [ext[k:k + 9].mean() for k in range(2, 5)]
    np.testing.assert_allclose(out[0], want, atol=1e-15)


def test_benchmark_script_runs(capsys):
    import importlib.util
    from pathlib import Path

    path = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"
    spec = importlib.util.spec_from_file_location("bench_kernels", path)
    bench = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(bench)
    bench.main(["--repeat", "1"])
    out = capsys.readouterr().out
    assert "godunov_march" in out and "python ms" in out
