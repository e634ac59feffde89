import io

import numpy as np
import pytest

from paratrend import InputError
from paratrend.kernels import EPANECHNIKOV, hat_matrix
from paratrend.panel import (
    PreprocessOptions,
    TimeSeriesPanel,
    center,
    load_panel,
    pooled,
    residuals,
    save_panel,
)

from conftest import affine_panel


def test_panel_validation():
    with pytest.raises(InputError):
        TimeSeriesPanel(np.ones((1, 10)))
    with pytest.raises(InputError):
        TimeSeriesPanel(np.ones((3, 3)))
    x = np.ones((3, 10))
    x[1, 2] = np.nan
    with pytest.raises(InputError):
        TimeSeriesPanel(x)
    p = TimeSeriesPanel(np.ones((3, 10)))
    assert not p.values.flags.writeable


def test_load_aggregate_and_log():
    rows = "".join(f"{t},{10 * t}\n" for t in range(1, 13))
    p = load_panel(io.StringIO("a,b\n" + rows), PreprocessOptions(aggregate=3))
    assert p.labels == ("a", "b")
    assert np.array_equal(p.values, [[6, 15, 24, 33], [60, 150, 240, 330]])
    q = load_panel("10,100\n100,10\n1000,10\n10,10\n", PreprocessOptions(log10=True))
    assert np.allclose(q.values[0], [1, 2, 3, 1])
    assert np.allclose(q.values[1], [2, 1, 1, 1])


def test_load_errors(tmp_path):
    with pytest.raises(InputError, match="non-positive value under log transform"):
        load_panel("0,1\n1,1\n2,2\n3,3\n", PreprocessOptions(log10=True))
    with pytest.raises(InputError, match="ragged"):
        load_panel("1,2\n3\n4,5\n6,7\n")
    with pytest.raises(InputError, match="does not divide"):
        load_panel("1,2\n3,4\n5,6\n7,8\n9,9\n", PreprocessOptions(aggregate=2))
    with pytest.raises(InputError):
        load_panel(tmp_path / "missing.csv")


def test_transpose_and_roundtrip(tmp_path):
    p = load_panel("1 2 3 4 5\n5 4 3 2 1\n", PreprocessOptions(transpose=True))
    assert p.N == 2 and p.T == 5
    x = np.random.default_rng(1).normal(size=(3, 7))
    save_panel(TimeSeriesPanel(x, ["u", "v", "w"]), tmp_path / "p.csv")
    back = load_panel(tmp_path / "p.csv")
    assert np.array_equal(back.values, x)
    assert back.labels == ("u", "v", "w")


def test_pooled_and_center(rng):
    x = rng.normal(size=(3, 5))
    p = TimeSeriesPanel(x)
    ps = pooled(p)
    assert ps.xbar == pytest.approx(ps.xbar_t.mean(), rel=1e-12)
    assert ps.xbar == pytest.approx(ps.xbar_i.mean(), rel=1e-12)
    Y = center(p)
    assert np.all(np.abs(Y.sum(0)) < 1e-12)
    assert np.allclose(ps.xbar_t[None, :] + Y, x, atol=1e-14)
    assert np.max(np.abs(center(TimeSeriesPanel(np.tile(x[0], (3, 1)))))) < 1e-15
    r = rng.normal(size=5)
    assert np.allclose(center(TimeSeriesPanel(np.vstack([r, -r]))), np.vstack([r, -r]))


def test_residuals():
    res = residuals(TimeSeriesPanel(affine_panel()), EPANECHNIKOV, 0.2)
    assert np.max(np.abs(res.residuals)) < 1e-9
    rng = np.random.default_rng(3)
    noise = rng.normal(size=(3, 40))
    r1 = residuals(TimeSeriesPanel(noise), EPANECHNIKOV, 1.0).residuals
    H = hat_matrix(EPANECHNIKOV, 40, 1.0).entries
    assert np.allclose(r1, noise - noise @ H.T)
    shifted = noise + np.array([1.0, -2.0, 7.0])[:, None]
    r2 = residuals(TimeSeriesPanel(shifted), EPANECHNIKOV, 0.3).residuals
    assert np.allclose(residuals(TimeSeriesPanel(noise), EPANECHNIKOV, 0.3).residuals, r2, atol=1e-12)
