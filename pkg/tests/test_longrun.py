import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from paratrend import ConfigError, NumericalError
from paratrend.longrun import (
    LongRunVarianceFn,
    WindowParams,
    leakage_factor,
    local_autocov,
    longrun_from_residuals,
    longrun_g,
    neighborhood,
)
from paratrend.kernels import EPANECHNIKOV
from paratrend.panel import TimeSeriesPanel
from paratrend.simulation import SimModel, generate_errors
from paratrend.rng import replicate_generator


def test_neighborhood_small():
    assert list(neighborhood(10, 0.1, 0.5)) == [4, 5, 6]
    assert list(neighborhood(10, 0.15, 0.5)) == [4, 5, 6]
    assert list(neighborhood(10, 0.5, 0.5)) == list(range(1, 11))
    assert list(neighborhood(10, 0.1, 0.0)) == [1]
    assert list(neighborhood(10, 0.25, 1.0)) == [8, 9, 10]


def test_params_validation():
    with pytest.raises(ConfigError):
        WindowParams(tau=0.0)
    with pytest.raises(ConfigError):
        WindowParams(rho=1.5)
    with pytest.raises(ConfigError):
        WindowParams(tau=0.01).validate(100)
    assert WindowParams(0.05, 0.3).K_T(1000) == 15
    with pytest.raises(ConfigError):
        local_autocov(np.zeros((2, 100)), WindowParams(0.1, 0.3), 0.5, 4)


@given(center=st.booleans(), seed=st.integers(0, 2**16), u=st.floats(0, 1))
def test_fast_functional_matches_window_sums(center, seed, u):
    E = np.random.default_rng(seed).normal(size=(3, 120))
    params = WindowParams(0.1, 0.4)
    fast = longrun_g(E, params, [u], center=center, floor_rel=None).values[0]
    K = params.K_T(120)
    slow = sum(
        (1 if k == 0 else 2) * local_autocov(E, params, u, k, center=center) for k in range(K + 1)
    )
    assert fast == pytest.approx(slow, rel=1e-10, abs=1e-12)


def test_lag_symmetry_and_scaling(rng):
    E = rng.normal(size=(4, 200))
    p = WindowParams(0.1, 0.3)
    assert local_autocov(E, p, 0.4, -2) == local_autocov(E, p, 0.4, 2)
    g1 = longrun_g(E, p, floor_rel=None).values
    g3 = longrun_g(3.0 * E, p, floor_rel=None).values
    assert np.allclose(g3, 9.0 * g1, rtol=1e-12)


def test_zero_errors_and_floor():
    g = longrun_g(np.zeros((3, 100)), WindowParams(0.1, 0.3))
    assert np.all(g.values == 0)
    f = LongRunVarianceFn.from_values([0, 0.5, 1], [-1.0, 2.0, 3.0])
    assert f.floor_applied
    assert f.values[0] == pytest.approx(3e-6)
    assert f.sigma2 == pytest.approx(np.mean(f.values**2))
    assert f.at(0.25) == pytest.approx((f.values[0] + 2.0) / 2)


def test_iid_errors_give_unit_g():
    E = np.random.default_rng(7).standard_normal((100, 2000))
    g = longrun_g(E, WindowParams(0.05, 0.3))
    err = np.abs(g.values - 1)
    # pointwise sd is about 0.055 here, so a uniform 0.15 bound is a 3-sigma event
    assert np.mean(err) < 0.08
    assert np.max(err) < 0.35


def test_ar1_lag_one_autocovariance():
    model = SimModel()
    E = generate_errors(model, 200, 3000, replicate_generator(1, (9,), 0))
    p = WindowParams(0.05, 0.3)
    gamma1 = local_autocov(E, p, 0.5, 1)
    rho = float(model.rho(0.5))
    assert gamma1 == pytest.approx(rho / (1 - rho**2), abs=0.01)


def test_residual_estimate_ignores_levels(rng):
    X = rng.normal(size=(10, 300))
    shifted = X + rng.normal(size=10)[:, None] * 50
    a = longrun_from_residuals(TimeSeriesPanel(X), EPANECHNIKOV, 0.1).values
    b = longrun_from_residuals(TimeSeriesPanel(shifted), EPANECHNIKOV, 0.1).values
    assert np.allclose(a, b, rtol=1e-8, atol=1e-10)


def test_leakage_correction_restores_scale():
    E = np.random.default_rng(8).standard_normal((200, 1000))
    X = E + 3.0
    raw = longrun_from_residuals(TimeSeriesPanel(X), EPANECHNIKOV, 0.05, leakage_correction=False)
    fixed = longrun_from_residuals(TimeSeriesPanel(X), EPANECHNIKOV, 0.05)
    assert np.mean(raw.values) < 0.9
    inner = (fixed.grid >= 0.1) & (fixed.grid <= 0.9)
    assert abs(np.mean(fixed.values[inner]) - 1) < 0.05
    f = leakage_factor(EPANECHNIKOV, 1000, 0.05, WindowParams(), np.linspace(0, 1, 11))
    assert np.all((f > 0) & (f < 1))


def test_leakage_guard():
    X = np.random.default_rng(9).standard_normal((5, 100))
    with pytest.raises(NumericalError, match="increase the residual bandwidth"):
        longrun_from_residuals(TimeSeriesPanel(X), EPANECHNIKOV, 0.02, WindowParams(0.05, 0.3))


def test_centered_windows_remove_level():
    E = np.random.default_rng(10).standard_normal((50, 500))
    p = WindowParams(0.05, 0.3)
    a = longrun_g(E, p, center=True).values
    b = longrun_g(E + 4.0, p, center=True).values
    assert np.allclose(a, b, atol=1e-9)
    assert np.mean(longrun_g(E + 4.0, p).values) > 100
