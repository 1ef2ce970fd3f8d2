"""Synthetic grouped-signal data sets for validation and benchmarking."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy import optimize
from scipy.special import expit

from ._random import rng_for
from .codata import Partition
from .data import DataError, DesignMatrix, Response


@dataclass(frozen=True)
class SimScenario:
    """Scenario axes: ``G`` groups of ``p_g`` variables, equicorrelation ``rho``
    within groups, a fraction ``sparsity`` of null groups and a ratio
    ``signal_skew`` between the largest and smallest non-null group variance.
    ``signal_variance`` is the expected variance of the linear predictor."""

    G: int
    p_g: int
    n: int = 100
    n_test: int = 1000
    rho: float = 0.0
    signal_skew: float = 10.0
    sparsity: float = 0.0
    seed: int = 0
    signal_variance: float = 8.0

    def __post_init__(self):
        if self.G < 1 or self.p_g < 1:
            raise DataError("G and p_g must be positive")
        if self.n < 2 or self.n_test < 2:
            raise DataError("need at least two training and two test samples")
        if not 0.0 <= self.rho < 1.0:
            raise DataError("rho must lie in [0, 1)")
        if not 0.0 <= self.sparsity <= 1.0:
            raise DataError("sparsity must lie in [0, 1]")
        if not self.signal_skew >= 1.0:
            raise DataError("signal_skew must be >= 1")
        if not self.signal_variance >= 0:
            raise DataError("signal_variance must be non-negative")

    @property
    def p(self):
        return self.G * self.p_g


@dataclass(frozen=True, eq=False)
class SimData:
    X: DesignMatrix
    y: Response
    X_test: DesignMatrix
    y_test: Response
    beta: np.ndarray
    intercept: float
    tau2: np.ndarray
    partition: Partition
    scenario: SimScenario

    def truth(self):
        """Ground truth as a JSON-ready dict."""
        return {
            "scenario": asdict(self.scenario),
            "intercept": self.intercept,
            "tau2": self.tau2.tolist(),
            "beta": self.beta.tolist(),
            "variable_ids": list(self.X.variable_ids),
            "group_of": self.partition.group_of.tolist(),
        }


def planted_variances(sc):
    """Group prior variances: null groups last, the rest log-spaced by ``signal_skew``."""
    n_null = int(round(sc.sparsity * sc.G))
    m = sc.G - n_null
    tau2 = np.zeros(sc.G)
    if m == 0 or sc.signal_variance == 0:
        return tau2
    if m == 1:
        shape = np.ones(1)
    else:
        shape = sc.signal_skew ** (-np.arange(m) / (m - 1))
    tau2[:m] = shape * sc.signal_variance / (sc.p_g * shape.sum())
    return tau2


def _draw_x(rng, n, sc):
    common = rng.standard_normal((n, sc.G))
    noise = rng.standard_normal((n, sc.p))
    return np.sqrt(sc.rho) * np.repeat(common, sc.p_g, axis=1) + np.sqrt(1.0 - sc.rho) * noise


def _balance_intercept(eta):
    def gap(c):
        return float(np.mean(expit(eta + c))) - 0.5
    if abs(gap(0.0)) < 1e-15:
        return 0.0
    return optimize.brentq(gap, -50.0, 50.0, xtol=1e-12)


def simulate_scenario(sc):
    """Draw training and test sets for scenario ``sc`` (deterministic in ``sc.seed``).

    Rows are zero-mean Gaussian with unit variances and pairwise correlation
    ``rho`` inside each group, independent across groups. Coefficients are
    ``N(0, tau2_g)``; the intercept is set by bisection so that the mean
    success probability over the test pool is 0.5.
    """
    rng = rng_for(sc.seed, "simulate")
    tau2 = planted_variances(sc)
    group_of = np.repeat(np.arange(sc.G), sc.p_g)
    beta = rng.standard_normal(sc.p) * np.sqrt(tau2[group_of])
    X = _draw_x(rng, sc.n, sc)
    X_test = _draw_x(rng, sc.n_test, sc)
    intercept = _balance_intercept(X_test @ beta)
    y = (rng.random(sc.n) < expit(intercept + X @ beta)).astype(float)
    y_test = (rng.random(sc.n_test) < expit(intercept + X_test @ beta)).astype(float)
    if y.min() == y.max() or y_test.min() == y_test.max():
        raise DataError("simulated response has a single class; change the seed or sizes")

    width = len(str(sc.p))
    vids = tuple(f"x{k + 1:0{width}d}" for k in range(sc.p))
    partition = Partition("groups", group_of, tuple(f"g{g + 1}" for g in range(sc.G)))
    return SimData(
        X=DesignMatrix(X, vids, tuple(f"train{i + 1}" for i in range(sc.n))),
        y=Response("binary", y),
        X_test=DesignMatrix(X_test, vids, tuple(f"test{i + 1}" for i in range(sc.n_test))),
        y_test=Response("binary", y_test),
        beta=beta, intercept=intercept, tau2=tau2, partition=partition, scenario=sc)

