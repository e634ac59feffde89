import numpy as np
import pytest

from paratrend import ConfigError, _backend
from paratrend.kernels import design_points
from paratrend.rng import replicate_generator
from paratrend.simulation import (
    SimModel,
    StudySettings,
    acceptance_study,
    generate_errors,
    generate_panel,
    mc_se,
    model_record,
    power_study,
    run_replicates,
)


@pytest.fixture(scope="module")
def big_errors():
    return generate_errors(SimModel(), 100_000, 20, replicate_generator(2, (7,), 0))


def test_model_validation():
    with pytest.raises(ConfigError):
        SimModel(rho0=1.0)
    with pytest.raises(ConfigError):
        SimModel(p=1.5)
    with pytest.raises(ConfigError):
        SimModel(ma_truncation=0)
    m = SimModel()
    assert m.true_g(0.0) == pytest.approx(1 / 0.64)
    assert m.true_g(1.0) == pytest.approx(1 / 1.21)
    assert m.n_distorted(100) == 0
    assert SimModel(p=0.3).n_distorted(10) == 3
    assert SimModel(p=0.25).n_distorted(10) == 3


def test_marginal_variance(big_errors):
    rho = SimModel().rho(1 / 20)
    assert np.var(big_errors[:, 0]) == pytest.approx(1 / (1 - rho**2), rel=0.01)


def test_mean_and_lag_one_correlation(big_errors):
    E = big_errors
    assert abs(E.mean()) < 3 / np.sqrt(E.size)
    r = np.corrcoef(E[:, 10], E[:, 9])[0, 1]
    assert r == pytest.approx(SimModel().rho(10 / 20), abs=0.02)


def test_truncation_error_bound():
    T, Jbig = 50, 200
    rho = np.ascontiguousarray(SimModel().rho(design_points(T)))
    eps = replicate_generator(4, (7,), 0).choice([-1.0, 1.0], size=(3, T + Jbig))
    full = _backend.ma_filter(eps, rho, Jbig)
    short = _backend.ma_filter(np.ascontiguousarray(eps[:, Jbig - 64 :]), rho, 64)
    assert np.max(np.abs(full - short)) <= 0.2**65 / 0.8 + 1e-15


def test_null_configuration_has_common_trend():
    m = SimModel(shifts=tuple(np.arange(5.0)))
    a = generate_panel(m, 5, 100, seed=1).values
    b = generate_panel(SimModel(p=0.6), 5, 100, seed=1).values
    c = generate_panel(SimModel(a=1.0), 5, 100, seed=1).values
    base = generate_panel(SimModel(), 5, 100, seed=1).values
    assert np.allclose(a - base, np.arange(5.0)[:, None])
    assert np.array_equal(b, base) and np.array_equal(c, base)
    d = generate_panel(SimModel(p=0.4, a=1.5), 5, 100, seed=1).values - base
    u = design_points(100)
    assert np.allclose(d[:2], 1.5 * 2 * np.cos(2 * np.pi * u))
    assert np.all(d[2:] == 0)


def test_generator_determinism():
    a = generate_panel(SimModel(), 4, 60, seed=9, index=3)
    b = generate_panel(SimModel(), 4, 60, seed=9, index=3)
    c = generate_panel(SimModel(), 4, 60, seed=9, index=4)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)
    white = SimModel(ma_truncation=1, rho0=0.0, rho1=0.0)
    E = generate_errors(white, 3, 10, replicate_generator(1, (1,), 0))
    assert np.array_equal(np.abs(E), np.ones((3, 10)))


def test_recursion_flag_matches_variance():
    m = SimModel(recursion="ar")
    E = generate_errors(m, 20_000, 30, replicate_generator(3, (7,), 0))
    rho = m.rho(15 / 30)
    assert np.var(E[:, 14]) == pytest.approx(1 / (1 - rho**2), rel=0.03)


def test_replicates_and_studies_small():
    st = StudySettings(normal_diag=True)
    res = run_replicates(SimModel(), 10, 60, 0.3, 30, 100, seed=5, settings=st, workers=1)
    assert res["delta"].shape == (30,) and "z" in res
    again = run_replicates(SimModel(), 10, 60, 0.3, 30, 100, seed=5, settings=st, workers=2)
    assert all(np.array_equal(res[k], again[k]) for k in res)
    rows = acceptance_study([(60, 10, 0.3)], outer_reps=100, inner_sims=100, seed=1)
    assert rows[0]["mc_se"] == pytest.approx(mc_se(0.05, 100))
    assert 0.8 <= rows[0]["acceptance"] <= 1.0
    pw = power_study(60, 10, [(0.0, 0.0), (0.5, 4.0)], b=0.3, outer_reps=100, inner_sims=100, seed=1)
    assert pw[1]["rejection"] >= pw[0]["rejection"]
    with pytest.raises(ConfigError):
        acceptance_study([(60, 10, 0.3)], outer_reps=50)
    assert model_record(SimModel())["ma_truncation"] == 64


def test_estimated_mode_runs():
    st = StudySettings(g_mode="estimated")
    res = run_replicates(SimModel(), 10, 100, 0.3, 5, 100, seed=5, settings=st)
    assert np.all((res["p_value"] > 0) & (res["p_value"] <= 1))
    with pytest.raises(ConfigError):
        StudySettings(g_mode="guess")
