import json

import numpy as np
import pytest
from scipy.special import logit

from grridge import (
    DesignMatrix,
    GRridgeOptions,
    Partition,
    PenaltyConfig,
    SelectionConfig,
    SimScenario,
    grridge,
    irls_fit,
    load_model,
    make_folds,
    predict,
    save_model,
    select_posthoc,
    simulate_scenario,
    tune_lambda,
)
from grridge.data import DataError
from grridge.engine import (
    GRridgeModel,
    dumps_model,
    eb_step,
    model_from_dict,
    model_to_dict,
    partition_order_diagnostics,
    select_by_margin,
)
from grridge.ridge import RidgeFit


def small_problem(seed=0, n=40, p=30):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    beta = np.r_[rng.normal(0, 1.0, p // 3), np.zeros(p - p // 3)]
    y = (rng.random(n) < 1 / (1 + np.exp(-X @ beta))).astype(float)
    y[:2] = (0, 1)
    return X, y


def test_single_group_is_plain_ridge():
    X, y = small_problem()
    part = Partition("all", np.zeros(X.shape[1], dtype=int))
    model = grridge(X, y, [part], 2.0, GRridgeOptions(max_outer_iters=5))
    ref = irls_fit(X, y, PenaltyConfig(2.0))
    assert np.all(model.multipliers == 1.0)
    assert np.all(model.steps[0].multipliers.group_multipliers == 1.0)
    np.testing.assert_allclose(model.coefficients, ref.coefficients, rtol=1e-8, atol=1e-12)
    assert len(model.steps) == 1 and not model.steps[0].accepted
    assert model.active == {"all": False}


def test_rejected_step_rolls_back():
    X, y = small_problem(1)
    part = Partition("rand", np.random.default_rng(0).integers(0, 3, X.shape[1]))
    model = grridge(X, y, [part], 2.0, GRridgeOptions(cvl_tolerance=1e9))
    assert not model.history and model.final_fit is model.initial_fit


def test_accepted_steps_raise_cvl_and_calibrate():
    X, y = small_problem(2, n=60, p=60)
    parts = [Partition("signal", (np.arange(60) >= 20).astype(int)),
             Partition("parity", np.arange(60) % 2)]
    model = grridge(X, y, parts, 5.0, GRridgeOptions(method="system"))
    accepted = [row["cvl"] for row in model.cvl_trace if row["accepted"]]
    assert all(b > a for a, b in zip(accepted, accepted[1:]))
    for step in model.steps:
        assert step.multipliers.calibration_error() <= 1e-12


def test_monotone_partition_gives_monotone_variances():
    X, y = small_problem(3, n=50, p=40)
    part = Partition("ranked", np.repeat(np.arange(8), 5), monotone="decreasing")
    mset, raw, _ = eb_step(X, irls_fit(X, y, PenaltyConfig(3.0)), np.ones(40), part, 3.0)
    assert np.all(np.diff(mset.tau2) <= 0)


def test_system_route_falls_back_when_singular():
    X, y = small_problem(4)
    # two groups with identical columns make alpha rank deficient
    X = np.column_stack([X[:, :5], X[:, :5]])
    part = Partition("dup", np.r_[np.zeros(5, int), np.ones(5, int)])
    _, _, route = eb_step(X, irls_fit(X, y, PenaltyConfig(1.0)), np.ones(10), part, 1.0, "system")
    assert route == "iterative-fallback"


def test_partition_size_mismatch():
    X, y = small_problem()
    with pytest.raises(DataError):
        grridge(X, y, [Partition("short", [0, 1])], 1.0)


def test_signal_group_gets_smaller_multiplier():
    wins = 0
    for seed in range(20):
        d = simulate_scenario(SimScenario(G=2, p_g=50, sparsity=0.5, seed=seed))
        model = grridge(d.X, d.y, [d.partition], 20.0, GRridgeOptions(seed=seed))
        m = model.partition_multipliers("groups")
        wins += bool(model.history) and m[0] < m[1]
    assert wins >= 18


def test_pure_noise_usually_keeps_plain_ridge():
    # lambda tuned per replicate, partition unrelated to the (absent) signal
    unchanged = 0
    for seed in range(20):
        d = simulate_scenario(SimScenario(G=5, p_g=100, sparsity=1.0, seed=seed))
        folds = make_folds(d.X.shape[0], 10, d.y.values, seed)
        lam = tune_lambda(d.X, d.y, folds)
        part = Partition("random", np.random.default_rng(seed).integers(0, 4, d.X.shape[1]))
        model = grridge(d.X, d.y, [part], lam, GRridgeOptions(folds=folds))
        unchanged += not model.history
    assert unchanged > 10


def test_predict_trivial_models():
    base = dict(penalty=PenaltyConfig(1.0), converged=True, iterations=1, penalized_loglik=0.0)
    zero = RidgeFit(coefficients=np.zeros(3), intercept=0.0, **base)
    model = GRridgeModel(zero, 1.0, "binary", ("a", "b", "c"), [])
    np.testing.assert_array_equal(predict(model, np.ones((4, 3))), 0.5)
    model.final_fit = RidgeFit(coefficients=np.zeros(3), intercept=float(logit(0.9)), **base)
    np.testing.assert_allclose(predict(model, np.ones((2, 3))), 0.9, rtol=1e-15)


def test_predict_linear_predictor_by_hand():
    fit = RidgeFit(coefficients=np.array([1.0, -2.0, 0.5]), intercept=0.25,
                   penalty=PenaltyConfig(1.0), converged=True, iterations=1,
                   penalized_loglik=0.0, kind="continuous")
    model = GRridgeModel(fit, 1.0, "continuous", ("a", "b", "c"), [])
    X = np.array([[1.0, 2.0, 3.0], [0.0, -1.0, 4.0]])
    np.testing.assert_array_equal(predict(model, X), [0.25 + 1 - 4 + 1.5, 0.25 + 2 + 2])
    permuted = DesignMatrix(X[:, [2, 0, 1]], ("c", "a", "b"))
    np.testing.assert_array_equal(predict(model, permuted), predict(model, X))
    with pytest.raises(DataError, match="b"):
        predict(model, DesignMatrix(X[:, [0, 2]], ("a", "c")))


def test_select_by_margin_rules():
    assert select_by_margin([1, 2, 3, 4], [-10.0, -8.0, -6.0, -5.0], 0.0) == 4
    sizes = [1, 5, 10, 20]
    cvls = [-20.0, -15.0, -10.0 * 1.005, -10.0]
    assert select_by_margin(sizes, cvls, 0.01) == 10


def test_selection_schedule_and_cap():
    cfg = SelectionConfig(p_max=40)
    assert cfg.sizes(100) == list(range(1, 26)) + [30, 35, 40]
    assert SelectionConfig(p_max=5).sizes(100) == [1, 2, 3, 4, 5]
    assert SelectionConfig(p_max=100).sizes(12)[-1] == 12


def test_posthoc_selection_contract():
    X, y = small_problem(5, n=60, p=40)
    folds = make_folds(60, 5, labels=y)
    model = grridge(X, y, [Partition("half", np.arange(40) // 20)], 4.0,
                    GRridgeOptions(folds=folds))
    sel = select_posthoc(model, X, y, folds, SelectionConfig(p_max=5, q_marg=0.01))
    assert len(sel.indices) <= 5
    assert sel.selected_cvl >= sel.cvl_max - 0.01 * abs(sel.cvl_max)
    top = np.argsort(-np.abs(model.coefficients), kind="stable")[:len(sel.indices)]
    assert sel.indices.tolist() == top.tolist()


def test_json_round_trip(tmp_path):
    X, y = small_problem(6, n=50, p=24)
    vids = tuple(f"v{k}" for k in range(24))
    parts = [Partition("a", np.arange(24) % 3, ("x", "y", "z")),
             Partition("b", np.arange(24) // 12, monotone="increasing")]
    opts = GRridgeOptions(selection=SelectionConfig(p_max=10))
    model = grridge(DesignMatrix(X, vids), y, parts, 3.0, opts)
    path = tmp_path / "model.json"
    save_model(model, path)
    back = load_model(path)
    assert dumps_model(back) == path.read_text()
    assert np.array_equal(back.coefficients, model.coefficients)
    assert np.array_equal(back.multipliers, model.multipliers)
    assert back.intercept == model.intercept
    assert np.array_equal(predict(back, X, use_selected=True), predict(model, X, use_selected=True))
    d = json.loads(path.read_text())
    assert d["format"] == "grridge-model/1"
    with pytest.raises(DataError):
        model_from_dict(dict(model_to_dict(model), format="other"))


def test_order_diagnostics_lists_all_orders():
    X, y = small_problem(7, n=40, p=20)
    parts = [Partition("a", np.arange(20) % 2), Partition("b", np.arange(20) // 10)]
    out = partition_order_diagnostics(X, y, parts, 3.0, GRridgeOptions(max_outer_iters=2))
    assert sorted(ids for ids, _ in out) == [("a", "b"), ("b", "a")]
