"""Ridge kernel: SVD-based generalized ridge solves, logistic IRLS, linear ridge,
first-order moment factors and group cross-sums of the squared D matrix.

Penalties follow the Newton-Raphson convention ``(X_W^T X_W + 2*lam*Lambda)``:
the penalized log-likelihood subtracts ``lam * sum(m_k * beta_k**2)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.special import expit, logit

from . import _kernels
from .data import DataError, as_matrix, as_response

logger = logging.getLogger(__name__)

PROB_CLIP = 1e-10
VARIANCE_FLOOR_REL = 1e-12


class SingularCoreError(np.linalg.LinAlgError):
    """The penalized core matrix is numerically singular."""

    def __init__(self, condition):
        super().__init__(f"penalized core is numerically singular (condition ~ {condition:.3e})")
        self.condition = condition


@dataclass(frozen=True, eq=False)
class PenaltyConfig:
    """Global penalty ``lambda_global`` times per-variable ``multipliers``."""

    lambda_global: float
    multipliers: np.ndarray | None = None
    intercept_penalized: bool = False

    def __post_init__(self):
        lam = float(self.lambda_global)
        if not (np.isfinite(lam) and lam > 0):
            raise ValueError(f"lambda must be positive and finite, got {self.lambda_global!r}")
        object.__setattr__(self, "lambda_global", lam)
        if self.multipliers is not None:
            m = np.array(self.multipliers, dtype=float).ravel()
            if not np.all(np.isfinite(m) & (m > 0)):
                raise ValueError("penalty multipliers must be positive and finite")
            m.setflags(write=False)
            object.__setattr__(self, "multipliers", m)

    def multipliers_for(self, p):
        if self.multipliers is None:
            return np.ones(p)
        if self.multipliers.shape[0] != p:
            raise DataError(f"{self.multipliers.shape[0]} multipliers for {p} variables")
        return self.multipliers


@dataclass(frozen=True, eq=False)
class RidgeFit:
    coefficients: np.ndarray
    intercept: float
    penalty: PenaltyConfig
    converged: bool
    iterations: int
    penalized_loglik: float
    kind: str = "binary"
    # p(1-p) at the solution for logistic fits, ones for linear fits
    weights: np.ndarray | None = field(default=None, repr=False)
    sigma2: float | None = None
    hat_trace: float | None = None

    def linear_predictor(self, X):
        return self.intercept + as_matrix(X) @ self.coefficients

    def predict(self, X):
        eta = self.linear_predictor(X)
        return expit(eta) if self.kind == "binary" else eta


@dataclass(frozen=True, eq=False)
class MomentFactors:
    """Factor pair with ``left @ right = D`` and per-variable variances ``v``.

    ``left`` is p x n, ``right`` is n x p; entries of D are ``c_kl / sqrt(v_k)``
    where ``C = (X_W^T X_W + 2 lam I)^{-1} X_W^T X_W``.
    """

    left: np.ndarray
    right: np.ndarray
    variances: np.ndarray
    working_weights: np.ndarray | None = None
    working_response: np.ndarray | None = None
    degenerate: np.ndarray | None = None
    lambda_global: float | None = None

    def __post_init__(self):
        if self.left.ndim != 2 or self.right.ndim != 2 or self.left.shape[1] != self.right.shape[0]:
            raise DataError(f"inconsistent factor shapes {self.left.shape} and {self.right.shape}")
        if self.variances.shape != (self.left.shape[0],):
            raise DataError("one variance per row of the left factor is required")
        if not np.all(self.variances > 0):
            raise DataError("moment variances must be positive")


class _Solution(NamedTuple):
    intercept: float
    beta: np.ndarray
    eigenvalues: np.ndarray
    condition: float
    hat_trace: float


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise DataError("non-finite values in solver input")


def _solve(Xw, z, lam, mult, a=None, penalize_a=False):
    """Generalized ridge solve with an optional intercept column ``a``.

    Columns are scaled by ``mult**-0.5`` so the penalty becomes isotropic, the
    unpenalized column is projected out, and the isotropic problem is solved
    through a thin SVD, or through the n x n Gram eigendecomposition when
    there are more columns than rows. Coefficients are mapped back to the
    original scale.
    """
    n, p = Xw.shape
    scale = 1.0 / np.sqrt(mult)
    Xs = Xw * scale
    if a is not None and penalize_a:
        Xs = np.column_stack([a, Xs])
        scale = np.concatenate([[1.0], scale])
    free = a is not None and not penalize_a

    if free:
        aa = a @ a
        if aa <= 0:
            raise DataError("intercept column has zero norm")
        Xp = Xs - np.outer(a, (a @ Xs) / aa)
        zp = z - a * ((a @ z) / aa)
    else:
        Xp, zp = Xs, z

    if Xp.shape[1] > n:
        # p > n: eigendecomposition of the n x n Gram matrix, b = Xp^T (K + 2 lam I)^{-1} zp
        s2, U = np.linalg.eigh(Xp @ Xp.T)
        s2 = np.maximum(s2, 0.0)
        core = s2 + 2.0 * lam
        low = 2.0 * lam
    else:
        U, s, Vt = np.linalg.svd(Xp, full_matrices=False)
        s2 = s * s
        core = s2 + 2.0 * lam
        low = core.min()
    condition = core.max() / low if low > 0 else np.inf
    if not condition < 1.0 / np.finfo(float).eps:
        raise SingularCoreError(condition)

    if Xp.shape[1] > n:
        coef = Xp.T @ (U @ ((U.T @ zp) / core))
    else:
        coef = Vt.T @ ((s / core) * (U.T @ zp))
    hat_trace = float(np.sum(s2 / core))
    if free:
        b0 = float(a @ (z - Xs @ coef) / aa)
        hat_trace += 1.0
    elif a is not None:
        b0, coef = float(coef[0] * scale[0]), coef[1:]
        scale = scale[1:]
    else:
        b0 = 0.0
    return _Solution(b0, coef * scale, s2, condition, hat_trace)


def ridge_solve(Xw, z, penalty):
    """Minimize ``||z - Xw b||^2 / 2 + lam * sum(m_k b_k^2)``.

    Returns ``(Xw^T Xw + 2 lam Lambda)^{-1} Xw^T z`` without forming any p x p
    matrix.
    """
    Xw = as_matrix(Xw)
    z = np.asarray(z, dtype=float).ravel()
    if z.shape[0] != Xw.shape[0]:
        raise DataError(f"response length {z.shape[0]} does not match {Xw.shape[0]} rows")
    _check_finite(Xw, z)
    mult = penalty.multipliers_for(Xw.shape[1])
    return _solve(Xw, z, penalty.lambda_global, mult).beta


def penalized_loglik(X, y, intercept, beta, penalty):
    """Bernoulli log-likelihood minus ``lam * sum(m_k beta_k^2)``."""
    X = as_matrix(X)
    y = np.asarray(y, dtype=float)
    eta = intercept + X @ beta
    ll = float(np.sum(y * eta - np.logaddexp(0.0, eta)))
    mult = penalty.multipliers_for(X.shape[1])
    pen = penalty.lambda_global * float(np.sum(mult * beta * beta))
    if penalty.intercept_penalized:
        pen += penalty.lambda_global * intercept * intercept
    return ll - pen


def penalized_gradient(X, y, intercept, beta, penalty):
    """Gradient of :func:`penalized_loglik`; returns ``(d_intercept, d_beta)``."""
    X = as_matrix(X)
    y = np.asarray(y, dtype=float)
    resid = y - expit(intercept + X @ beta)
    mult = penalty.multipliers_for(X.shape[1])
    g_beta = X.T @ resid - 2.0 * penalty.lambda_global * mult * beta
    g0 = float(resid.sum())
    if penalty.intercept_penalized:
        g0 -= 2.0 * penalty.lambda_global * intercept
    return g0, g_beta


def irls_fit(X, y, penalty, tol=1e-6, max_iter=25, fit_intercept=True, init=None):
    """Penalized logistic regression by Newton-Raphson (IRLS).

    Each step solves the weighted generalized ridge problem with
    ``W = diag(p(1-p))^{1/2}`` and working response
    ``z = eta + (y - p) / (p (1 - p))``; fitted probabilities are clipped to
    ``[1e-10, 1 - 1e-10]``. Iteration stops when the largest coefficient change
    drops below ``tol``. A step that lowers the objective is halved until it
    does not.

    ``init`` is an optional ``(intercept, coefficients)`` warm start.
    """
    X = as_matrix(X)
    y = as_response(y, "binary").values
    n, p = X.shape
    if y.shape[0] != n:
        raise DataError(f"response length {y.shape[0]} does not match {n} rows")
    if tol <= 0:
        raise ValueError("tol must be positive")
    _check_finite(X)
    mult = penalty.multipliers_for(p)
    lam = penalty.lambda_global

    if init is not None:
        b0, beta = float(init[0]), np.array(init[1], dtype=float)
    else:
        b0 = float(logit(y.mean())) if fit_intercept else 0.0
        beta = np.zeros(p)
    obj = penalized_loglik(X, y, b0, beta, penalty)

    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        eta = b0 + X @ beta
        pr = np.clip(expit(eta), PROB_CLIP, 1.0 - PROB_CLIP)
        w = pr * (1.0 - pr)
        sw = np.sqrt(w)
        z = eta + (y - pr) / w
        sol = _solve(sw[:, None] * X, sw * z, lam, mult,
                     a=sw if fit_intercept else None,
                     penalize_a=penalty.intercept_penalized)
        new_b0, new_beta = sol.intercept, sol.beta
        new_obj = penalized_loglik(X, y, new_b0, new_beta, penalty)
        step = 1.0
        while not new_obj >= obj - 1e-12 * abs(obj) and step > 1e-6:
            step *= 0.5
            new_b0 = b0 + step * (sol.intercept - b0)
            new_beta = beta + step * (sol.beta - beta)
            new_obj = penalized_loglik(X, y, new_b0, new_beta, penalty)
        delta = max(abs(new_b0 - b0), float(np.max(np.abs(new_beta - beta), initial=0.0)))
        b0, beta, obj = new_b0, new_beta, new_obj
        if not np.isfinite(obj):
            break
        if delta < tol:
            converged = True
            break

    if not converged:
        logger.warning("IRLS did not converge in %d iterations (lambda=%g)", it, lam)
    pr = np.clip(expit(b0 + X @ beta), PROB_CLIP, 1.0 - PROB_CLIP)
    return RidgeFit(coefficients=beta, intercept=b0, penalty=penalty, converged=converged,
                    iterations=it, penalized_loglik=obj, kind="binary",
                    weights=pr * (1.0 - pr))


def linear_fit(X, y, penalty, fit_intercept=True):
    """Linear ridge with an unpenalized intercept.

    Stores ``sigma2 = RSS / (n - tr(H))`` with ``H`` the ridge hat matrix
    (intercept included).
    """
    X = as_matrix(X)
    y = as_response(y, "continuous").values
    n, p = X.shape
    if y.shape[0] != n:
        raise DataError(f"response length {y.shape[0]} does not match {n} rows")
    _check_finite(X, y)
    mult = penalty.multipliers_for(p)
    sol = _solve(X, y, penalty.lambda_global, mult,
                 a=np.ones(n) if fit_intercept else None,
                 penalize_a=penalty.intercept_penalized)
    resid = y - sol.intercept - X @ sol.beta
    rss = float(resid @ resid)
    dof = n - sol.hat_trace
    sigma2 = rss / dof if dof > 1e-8 else rss / n
    pen = penalty.lambda_global * float(np.sum(mult * sol.beta ** 2))
    return RidgeFit(coefficients=sol.beta, intercept=sol.intercept, penalty=penalty,
                    converged=True, iterations=1, penalized_loglik=-0.5 * rss - pen,
                    kind="continuous", weights=np.ones(n), sigma2=sigma2,
                    hat_trace=sol.hat_trace)


def fit(X, y, penalty, **kwargs):
    """Dispatch to :func:`irls_fit` or :func:`linear_fit` by response kind."""
    y = as_response(y)
    if y.kind == "binary":
        return irls_fit(X, y, penalty, **kwargs)
    kwargs.pop("init", None)
    kwargs.pop("tol", None)
    kwargs.pop("max_iter", None)
    return linear_fit(X, y, penalty, **kwargs)


def moment_factors(Xw, lam, scale=1.0, working_weights=None, working_response=None):
    """Variances of Cov(beta_hat) and the (L, R) factorization of D.

    ``v_k = scale * diag(M X_W^T X_W M)_k`` with ``M = (X_W^T X_W + 2 lam I)^{-1}``,
    ``L = diag(v^{-1/2}) M X_W^T`` and ``R = X_W``. Variances below
    ``1e-12 * median(v)`` are clamped to that floor and flagged in
    ``degenerate``.
    """
    Xw = as_matrix(Xw)
    if not lam > 0:
        raise ValueError("lambda must be positive")
    _check_finite(Xw)
    U, s, Vt = np.linalg.svd(Xw, full_matrices=False)
    shrink = s / (s * s + 2.0 * lam)
    v = scale * ((Vt.T ** 2) @ (shrink ** 2))
    med = float(np.median(v))
    if not med > 0:
        raise DataError("all moment variances vanish; design carries no information")
    floor = VARIANCE_FLOOR_REL * med
    degenerate = v < floor
    if degenerate.any():
        logger.warning("%d variable(s) with degenerate variance clamped", int(degenerate.sum()))
        v = np.where(degenerate, floor, v)
    left = (Vt.T * shrink) @ U.T / np.sqrt(v)[:, None]
    return MomentFactors(left=left, right=Xw.copy(), variances=v,
                         working_weights=working_weights, working_response=working_response,
                         degenerate=degenerate, lambda_global=float(lam))


def alpha_matrix(factors, row_partition, col_partition):
    """Group cross-sums ``alpha_gh = sum_{k in g, l in h} d_kl^2``.

    Uses ``[(L_g^T L_g) o (R_h R_h^T)]_sum`` so only n x n blocks are formed.
    """
    L, R = factors.left, factors.right
    if row_partition.p != L.shape[0] or col_partition.p != R.shape[1]:
        raise DataError(
            f"partitions cover {row_partition.p}/{col_partition.p} variables, "
            f"factors have {L.shape[0]}/{R.shape[1]}")
    A = _kernels.group_gram(L, row_partition.group_of, row_partition.n_groups)
    B = _kernels.group_gram(np.ascontiguousarray(R.T), col_partition.group_of,
                            col_partition.n_groups)
    n = L.shape[1]
    alpha = A.reshape(-1, n * n) @ B.reshape(-1, n * n).T
    return np.maximum(alpha, 0.0)
