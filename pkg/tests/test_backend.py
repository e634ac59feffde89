import os
import subprocess
import sys

import numpy as np
import pytest

from paratrend import ConfigError, _backend, _kernels_py
from paratrend.parallel import chunk_ranges, pmap, resolve_workers
from paratrend.rng import check_seed, replicate_generator, stream_key

try:
    from paratrend import _ckernels
except ImportError:  # extension not built
    _ckernels = None

needs_ext = pytest.mark.skipif(_ckernels is None, reason="compiled extension not built")


@needs_ext
@pytest.mark.parametrize("code,norm", [(0, 1.0), (1, 1.4619)])
def test_weights_agree(code, norm):
    pts = np.linspace(0, 1, 57)
    a, ba = _kernels_py.local_linear_weights(150, 0.13, pts, code, norm)
    b, bb = _ckernels.local_linear_weights(150, 0.13, pts, code, norm)
    assert ba == bb == -1
    assert np.allclose(a, b, rtol=1e-12, atol=1e-15)


@needs_ext
def test_singular_index_agrees():
    pts = np.array([0.5, 0.0])
    assert _kernels_py.local_linear_weights(4, 0.5, pts, 0, 1.0)[1] == _ckernels.local_linear_weights(4, 0.5, pts, 0, 1.0)[1] == 1


@needs_ext
def test_products_and_filter_agree():
    r = np.random.default_rng(0)
    E = r.normal(size=(7, 90))
    assert np.allclose(_kernels_py.lagged_products(E, 6), _ckernels.lagged_products(E, 6), rtol=1e-13, atol=1e-15)
    eps = r.choice([-1.0, 1.0], size=(4, 80 + 16))
    rho = np.linspace(0.2, -0.1, 80)
    assert np.allclose(_kernels_py.ma_filter(eps, rho, 16), _ckernels.ma_filter(eps, rho, 16), rtol=1e-13)


def test_lagged_products_definition():
    E = np.arange(12.0).reshape(2, 6)
    P = _backend.lagged_products(E, 2)
    assert P[1, 0] == pytest.approx((0 * 1 + 6 * 7) / 2)
    assert P[2, 3] == pytest.approx((3 * 5 + 9 * 11) / 2)


def test_env_var_forces_python():
    env = dict(os.environ, PARATREND_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "from paratrend import _backend; print(_backend.BACKEND)"],
        capture_output=True, text=True, env=env, check=True,
    )
    assert out.stdout.strip() == "python"


def test_rng_streams():
    a = replicate_generator(5, (1,), 3).standard_normal(4)
    b = replicate_generator(5, (1,), 3).standard_normal(4)
    c = replicate_generator(5, (2,), 3).standard_normal(4)
    d = replicate_generator(5, (1,), 4).standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c) and not np.array_equal(a, d)
    assert stream_key(5, (1,)).dtype == np.uint64
    for bad in (None, -1, 1.5, "x"):
        with pytest.raises(ConfigError):
            check_seed(bad)


def _square(x):
    return x * x


def test_pool_helpers():
    assert chunk_ranges(7, 3) == [(0, 3), (3, 6), (6, 7)]
    assert pmap(_square, range(6), workers=3) == [0, 1, 4, 9, 16, 25]
    with pytest.raises(ConfigError):
        resolve_workers(0)
