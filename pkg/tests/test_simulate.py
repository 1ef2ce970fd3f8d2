import numpy as np
import pytest

from grridge import SimScenario, roc_auc, simulate_scenario
from grridge.data import DataError
from grridge.simulate import planted_variances


def test_shapes():
    d = simulate_scenario(SimScenario(G=4, p_g=50, seed=1))
    assert d.X.values.shape == (100, 200)
    assert d.X_test.values.shape == (1000, 200)
    assert d.partition.sizes.tolist() == [50] * 4
    assert len(d.y.values) == 100 and len(d.y_test.values) == 1000


def test_all_null_has_zero_beta_and_chance_auc():
    aucs = []
    for seed in range(10):
        d = simulate_scenario(SimScenario(G=3, p_g=20, sparsity=1.0, seed=seed))
        assert np.all(d.beta == 0.0)
        w = np.random.default_rng(seed).standard_normal(60)
        aucs.append(roc_auc(d.X_test.values @ w, d.y_test.values)[0])
    assert abs(np.mean(aucs) - 0.5) < 0.03


def test_same_seed_same_data():
    a = simulate_scenario(SimScenario(G=3, p_g=10, rho=0.4, seed=7))
    b = simulate_scenario(SimScenario(G=3, p_g=10, rho=0.4, seed=7))
    for name in ("X", "X_test"):
        assert np.array_equal(getattr(a, name).values, getattr(b, name).values)
    assert np.array_equal(a.y.values, b.y.values)
    assert np.array_equal(a.beta, b.beta) and a.intercept == b.intercept
    c = simulate_scenario(SimScenario(G=3, p_g=10, rho=0.4, seed=8))
    assert not np.array_equal(a.X.values, c.X.values)


@pytest.mark.parametrize("rho", [0.0, 0.3, 0.7])
def test_within_group_correlation(rho):
    d = simulate_scenario(SimScenario(G=3, p_g=10, rho=rho, seed=2))
    C = np.corrcoef(d.X_test.values, rowvar=False)
    g = d.partition.group_of
    same = (g[:, None] == g[None, :]) & ~np.eye(30, dtype=bool)
    assert abs(C[same].mean() - rho) < 0.05
    assert abs(C[g[:, None] != g[None, :]].mean()) < 0.05


def test_beta_variance_tracks_planted_variance():
    d = simulate_scenario(SimScenario(G=4, p_g=60, sparsity=0.25, signal_skew=5.0, seed=3))
    for g in range(4):
        b = d.beta[d.partition.group_of == g]
        if d.tau2[g] == 0:
            assert np.all(b == 0.0)
        else:
            ratio = np.mean(b ** 2) / d.tau2[g]
            assert 1 / 3 <= ratio <= 3


def test_planted_variances_layout():
    tau2 = planted_variances(SimScenario(G=5, p_g=10, sparsity=0.4, signal_skew=9.0,
                                         signal_variance=2.0))
    assert tau2[3:].tolist() == [0.0, 0.0]
    assert tau2[0] / tau2[2] == pytest.approx(9.0)
    assert np.sum(10 * tau2) == pytest.approx(2.0)


def test_classes_roughly_balanced():
    d = simulate_scenario(SimScenario(G=2, p_g=25, seed=4))
    p = 1 / (1 + np.exp(-(d.intercept + d.X_test.values @ d.beta)))
    assert p.mean() == pytest.approx(0.5, abs=1e-9)


@pytest.mark.parametrize("kw", [dict(G=0, p_g=5), dict(G=2, p_g=5, rho=1.0),
                                dict(G=2, p_g=5, sparsity=1.5), dict(G=2, p_g=5, signal_skew=0.5)])
def test_invalid_scenarios(kw):
    with pytest.raises(DataError):
        SimScenario(**kw)
