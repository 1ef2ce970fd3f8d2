import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grridge import Partition
from grridge.data import DataError
from grridge.eb import (
    CLAMP_HIGH,
    CLAMP_LOW,
    TAU2_FLOOR,
    EBSystem,
    MultiplierSet,
    SingularSystemError,
    adaptive_ridge_multipliers,
    calibrate,
    clamp_tau2,
    compose_multipliers,
    group_B,
    rescale_estimates,
    solve_system,
    tau_global,
    tau_group_from_alpha,
    tau_group_iterative,
)
from grridge.ridge import alpha_matrix, moment_factors


def orthonormal(n, p, seed=0):
    Q, _ = np.linalg.qr(np.random.default_rng(seed).standard_normal((n, p)))
    return Q


def test_B_zero_when_beta_squared_equals_v():
    v = np.array([0.5, 2.0, 3.0])
    np.testing.assert_allclose(group_B(np.sqrt(v), v, Partition("p", [0, 1, 1])), 0.0, atol=1e-15)


def test_B_hand_example():
    assert group_B(np.array([2.0, 0.0]), np.ones(2), Partition("p", [0, 0]))[0] == 2.0


def test_B_matches_summation():
    rng = np.random.default_rng(1)
    beta, v = rng.standard_normal(50), rng.uniform(0.1, 2, 50)
    part = Partition("p", np.arange(50) % 5)
    want = [sum(beta[k] ** 2 / v[k] - 1 for k in range(50) if k % 5 == g) for g in range(5)]
    np.testing.assert_allclose(group_B(beta, v, part), want, rtol=1e-12)


def test_B_size_mismatch():
    with pytest.raises(DataError):
        group_B(np.ones(3), np.ones(3), Partition("p", [0, 1]))


def test_system_two_by_two():
    tau2 = solve_system(EBSystem([4.0, 5.0], [[2.0, 1.0], [1.0, 2.0]]))
    np.testing.assert_allclose(tau2, [1.0, 2.0], rtol=1e-14)


def test_system_orthonormal_diagonal():
    B = np.array([6.0, 2.0])
    tau2 = solve_system(EBSystem(B, np.diag([3.0, 4.0])))
    np.testing.assert_allclose(tau2, B / [3.0, 4.0])


def test_system_singular():
    with pytest.raises(SingularSystemError):
        solve_system(EBSystem([1.0, 1.0], [[1.0, 2.0], [1.0, 2.0]]))


def test_system_clamps_with_global():
    sys_ = EBSystem([-4.0, 5.0], np.eye(2), tau2_global=1.0)
    np.testing.assert_allclose(solve_system(sys_), [CLAMP_LOW, 5.0])


def test_tau_global_zero_numerator_hits_floor():
    mf = moment_factors(orthonormal(3, 1), 0.5)
    assert tau_global(np.array([0.5]), mf.variances, mf) == TAU2_FLOOR


def test_tau_global_hand_example():
    mf = moment_factors(orthonormal(4, 2), 0.5)
    assert tau_global(np.ones(2), mf.variances, mf) == pytest.approx(3.0, rel=1e-12)


def test_tau_global_matches_naive():
    rng = np.random.default_rng(2)
    mf = moment_factors(rng.standard_normal((6, 20)), 0.8)
    beta = rng.standard_normal(20)
    D = mf.left @ mf.right
    want = np.sum(beta ** 2 / mf.variances - 1) / np.sum(D ** 2)
    assert tau_global(beta, mf.variances, mf) == pytest.approx(max(want, TAU2_FLOOR), rel=1e-9)


def test_iterative_hand_example():
    got = tau_group_from_alpha([4.0, 5.0], [[2.0, 1.0], [1.0, 2.0]], 1.0)
    np.testing.assert_allclose(got, [1.5, 2.0])


def test_iterative_zero_denominator():
    with pytest.raises(DataError):
        tau_group_from_alpha([1.0, 1.0], [[0.0, 1.0], [1.0, 2.0]], 1.0)


def test_iterative_wrapper_agrees():
    rng = np.random.default_rng(3)
    mf = moment_factors(rng.standard_normal((8, 30)), 1.0)
    beta = rng.standard_normal(30)
    part = Partition("p", np.arange(30) % 3)
    t = tau_global(beta, mf.variances, mf)
    raw = tau_group_from_alpha(group_B(beta, mf.variances, part), alpha_matrix(mf, part, part), t)
    got = tau_group_iterative(beta, mf.variances, mf, part, t)
    np.testing.assert_allclose(got, clamp_tau2(raw, t)[0])


def test_clamp_interval_and_mask():
    out, mask = clamp_tau2(np.array([-1.0, 0.5, 1e9, np.nan]), 2.0)
    np.testing.assert_allclose(out, [2 * CLAMP_LOW, 0.5, 2 * CLAMP_HIGH, 2 * CLAMP_LOW])
    assert mask.tolist() == [True, False, True, True]


def test_calibrate_single_group_is_one():
    assert calibrate(np.array([0.37]), np.array([10])).group_multipliers.tolist() == [1.0]


def test_calibrate_hand_example():
    m = calibrate(np.array([1.0, 3.0]), np.array([1, 1]))
    np.testing.assert_allclose(m.group_multipliers, [2.0, 2.0 / 3.0], rtol=1e-15)
    assert m.calibration_error() < 1e-15


def test_calibrate_equal_variances():
    np.testing.assert_array_equal(calibrate(np.array([0.3, 0.3]), np.array([4, 7])).group_multipliers,
                                  [1.0, 1.0])


def test_calibrate_rejects_zero():
    with pytest.raises(ValueError):
        calibrate(np.zeros(2), np.array([1, 1]))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.floats(1e-8, 1e8), st.integers(1, 500)), min_size=1, max_size=40))
def test_calibration_invariant(groups):
    tau2 = np.array([t for t, _ in groups])
    sizes = np.array([k for _, k in groups])
    assert calibrate(tau2, sizes).calibration_error() <= 1e-12


def test_rescale_examples():
    b, v = rescale_estimates(np.array([1.0]), np.array([0.2]), np.array([4.0]))
    assert b[0] == 0.5 and v[0] == pytest.approx(0.05, rel=1e-15)
    b, v = rescale_estimates(np.array([1.3]), np.array([0.7]), np.array([1.0]))
    assert (b[0], v[0]) == (1.3, 0.7)


def test_rescale_round_trip():
    rng = np.random.default_rng(4)
    beta, v, m = rng.standard_normal(20), rng.uniform(0.1, 1, 20), rng.uniform(0.1, 10, 20)
    b, w = rescale_estimates(beta * np.sqrt(m), v * m, m)
    np.testing.assert_allclose(b, beta, rtol=1e-12)
    np.testing.assert_allclose(w, v, rtol=1e-12)


def test_compose_product_rule():
    pa, pb = Partition("a", [0, 1]), Partition("b", [0, 0])
    ma = MultiplierSet("a", np.array([2.0, 1.0]), np.array([1.0, 2.0]), np.array([1, 1]))
    mb = MultiplierSet("b", np.array([3.0]), np.array([1.0]), np.array([2]))
    np.testing.assert_array_equal(compose_multipliers([(ma, pa), (mb, pb)]), [6.0, 3.0])
    np.testing.assert_array_equal(compose_multipliers([(ma, pa)]), [2.0, 1.0])


def test_compose_matches_lookup():
    rng = np.random.default_rng(5)
    pa, pb = Partition("a", [0, 1, 2, 0, 1, 2]), Partition("b", [1, 1, 0, 0, 1, 0])
    ma = calibrate(rng.uniform(0.1, 2, 3), pa.sizes, "a")
    mb = calibrate(rng.uniform(0.1, 2, 2), pb.sizes, "b")
    want = [ma.group_multipliers[pa.group_of[k]] * mb.group_multipliers[pb.group_of[k]]
            for k in range(6)]
    np.testing.assert_allclose(compose_multipliers([(ma, pa), (mb, pb)]), want, rtol=1e-15)


def test_adaptive_hand_example():
    m = adaptive_ridge_multipliers(np.array([1.0, 2.0]))
    np.testing.assert_allclose(m, [2.5, 0.625])
    assert np.mean(1 / m) == pytest.approx(1.0)
    np.testing.assert_array_equal(adaptive_ridge_multipliers(np.array([0.3, -0.3])), [1.0, 1.0])


def test_adaptive_zero_hits_ceiling(caplog):
    m = adaptive_ridge_multipliers(np.array([1.0, 0.0]))
    assert m[1] == pytest.approx(1e6)
    assert "ceiling" in caplog.text
