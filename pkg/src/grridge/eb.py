"""Empirical-Bayes group variances and penalty multipliers."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .data import DataError
from .ridge import alpha_matrix

logger = logging.getLogger(__name__)

# lower bound for the global variance estimate
TAU2_FLOOR = 1e-10
# group variances are kept within [LOW, HIGH] times the global estimate
CLAMP_LOW = 1e-4
CLAMP_HIGH = 1e6
ADAPTIVE_CEILING = 1e6


class SingularSystemError(np.linalg.LinAlgError):
    """The group moment system cannot be solved (collinear group structure)."""


@dataclass(eq=False)
class EBSystem:
    """Group statistics ``B``, coefficient matrix ``alpha`` and the solution."""

    B: np.ndarray
    alpha: np.ndarray
    tau2: np.ndarray | None = None
    tau2_global: float | None = None

    def __post_init__(self):
        self.B = np.asarray(self.B, dtype=float).ravel()
        self.alpha = np.atleast_2d(np.asarray(self.alpha, dtype=float))
        if not np.all(np.isfinite(self.B)):
            raise DataError("group statistics must be finite")
        if np.any(self.alpha < 0):
            raise DataError("alpha entries must be non-negative")


@dataclass(frozen=True, eq=False)
class MultiplierSet:
    """Calibrated group multipliers for one partition."""

    partition_id: str
    group_multipliers: np.ndarray
    tau2: np.ndarray
    sizes: np.ndarray
    clamped: np.ndarray | None = None

    def calibration_error(self):
        """``|mean over variables of 1/multiplier - 1|``."""
        p = float(np.sum(self.sizes))
        return abs(math.fsum(self.sizes / self.group_multipliers) / p - 1.0)

    def per_variable(self, partition):
        return self.group_multipliers[partition.group_of]


def group_B(beta, v, partition):
    """``B_g = sum_{k in g} (beta_k^2 / v_k - 1)``."""
    beta = np.asarray(beta, dtype=float)
    v = np.asarray(v, dtype=float)
    if beta.shape != v.shape or beta.shape[0] != partition.p:
        raise DataError(f"partition covers {partition.p} variables, got {beta.shape[0]}")
    if not np.all(v > 0):
        raise DataError("variances must be positive")
    return np.bincount(partition.group_of, weights=beta * beta / v - 1.0,
                       minlength=partition.n_groups)


def clamp_tau2(tau2, tau2_global):
    """Clamp group variances into ``[1e-4, 1e6] * tau2_global``.

    Returns the clamped vector and a mask of clamped entries. NaN counts as
    below the interval.
    """
    tau2 = np.asarray(tau2, dtype=float)
    lo, hi = CLAMP_LOW * tau2_global, CLAMP_HIGH * tau2_global
    filled = np.where(np.isnan(tau2), -np.inf, tau2)
    out = np.clip(filled, lo, hi)
    mask = out != filled
    if mask.any():
        logger.info("clamped %d of %d group variance(s)", int(mask.sum()), tau2.size)
    return out, mask


def solve_system(system, clamp=True):
    """Solve ``alpha @ tau2 = B``.

    With ``clamp`` and a known ``system.tau2_global`` the solution is clamped
    (see :func:`clamp_tau2`). Raises :class:`SingularSystemError` for a
    rank-deficient or badly conditioned ``alpha``.
    """
    alpha, B = system.alpha, system.B
    G = B.shape[0]
    if alpha.shape != (G, G) or G < 1:
        raise DataError(f"alpha must be {G}x{G}, got {alpha.shape}")
    cond = np.linalg.cond(alpha)
    if not np.isfinite(cond) or cond > 1e12 or np.linalg.matrix_rank(alpha) < G:
        raise SingularSystemError(f"group system is singular (condition {cond:.3g})")
    tau2 = np.linalg.solve(alpha, B)
    if clamp and system.tau2_global is not None:
        tau2, _ = clamp_tau2(tau2, system.tau2_global)
    system.tau2 = tau2
    return tau2


def hadamard_total(factors):
    """``sum_{k,l} d_kl^2`` via ``[(L^T L) o (R R^T)]_sum``."""
    L, R = factors.left, factors.right
    return float(np.sum((L.T @ L) * (R @ R.T)))


def tau_global(beta, v, factors):
    """Common prior variance from all variables pooled into one group.

    Non-positive estimates are raised to ``TAU2_FLOOR``.
    """
    beta = np.asarray(beta, dtype=float)
    v = np.asarray(v, dtype=float)
    if not np.all(v > 0):
        raise DataError("variances must be positive")
    denom = hadamard_total(factors)
    if not denom > 0:
        raise DataError("zero denominator in global variance estimate")
    tau2 = float(np.sum(beta * beta / v - 1.0)) / denom
    return max(tau2, TAU2_FLOOR)


def tau_group_from_alpha(B, alpha, tau2_global):
    """Per-group estimate with all other groups fixed at ``tau2_global``."""
    B = np.asarray(B, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if tau2_global < 0:
        raise ValueError("global variance must be non-negative")
    within = np.diag(alpha)
    if np.any(within <= 0):
        raise DataError(f"zero within-group denominator for group(s) {np.flatnonzero(within <= 0).tolist()}")
    cross = alpha.sum(axis=1) - within
    return (B - cross * tau2_global) / within


def tau_group_iterative(beta, v, factors, partition, tau2_global, clamp=True):
    """Group variances given the pooled estimate ``tau2_global``."""
    B = group_B(beta, v, partition)
    alpha = alpha_matrix(factors, partition, partition)
    tau2 = tau_group_from_alpha(B, alpha, tau2_global)
    if clamp:
        tau2, _ = clamp_tau2(tau2, max(tau2_global, TAU2_FLOOR))
    return tau2


def calibrate(tau2, sizes, partition_id="", clamped=None):
    """Invert group variances into multipliers whose size-weighted inverse mean is 1.

    ``m_g = C / tau2_g`` with ``C = sum_g K_g tau2_g / p``, evaluated as
    ``sum_h K_h (tau2_h / tau2_g) / p`` so a single group gives exactly 1.
    """
    tau2 = np.asarray(tau2, dtype=float)
    sizes = np.asarray(sizes)
    if tau2.shape != sizes.shape:
        raise DataError("one size per group is required")
    if np.all(tau2 == 0):
        raise ValueError("all group variances are zero")
    if not np.all(np.isfinite(tau2) & (tau2 > 0)):
        raise ValueError("group variances must be positive and finite before calibration")
    p = int(sizes.sum())
    mult = np.array([math.fsum(sizes * (tau2 / t)) / p for t in tau2])
    return MultiplierSet(partition_id, mult, tau2.copy(), sizes.copy(), clamped)


def rescale_estimates(beta_prime, v_prime, multipliers):
    """Map estimates from the scaled design back: ``beta = beta' / sqrt(m)``, ``v = v' / m``."""
    m = np.asarray(multipliers, dtype=float)
    if not np.all(m > 0):
        raise ValueError("multipliers must be positive")
    return np.asarray(beta_prime) / np.sqrt(m), np.asarray(v_prime) / m


def compose_multipliers(sets):
    """Per-variable product of group multipliers over ``(MultiplierSet, Partition)`` pairs."""
    sets = list(sets)
    if not sets:
        raise ValueError("no multiplier sets to compose")
    p = sets[0][1].p
    out = np.ones(p)
    for mset, part in sets:
        if part.p != p:
            raise DataError(f"partition {part.partition_id!r} covers {part.p} variables, expected {p}")
        if mset.group_multipliers.shape[0] != part.n_groups:
            raise DataError(f"multiplier set does not match partition {part.partition_id!r}")
        out = out * mset.group_multipliers[part.group_of]
    return out


def adaptive_ridge_multipliers(beta_init):
    """Variable-specific multipliers ``C / beta_k^2`` with ``C = mean(beta^2)``.

    Multipliers are capped at ``1e6 * C / mean(beta^2)``; capped entries
    (e.g. exact zeros) are logged.
    """
    b2 = np.asarray(beta_init, dtype=float) ** 2
    if not np.any(b2 > 0):
        raise ValueError("all initial coefficients are zero")
    C = float(np.mean(b2))
    ceiling = ADAPTIVE_CEILING * C / np.mean(b2)
    with np.errstate(divide="ignore"):
        mult = np.where(b2 > 0, C / np.where(b2 > 0, b2, 1.0), np.inf)
    capped = mult > ceiling
    if capped.any():
        logger.warning("%d adaptive multiplier(s) hit the ceiling %.3g", int(capped.sum()), ceiling)
    return np.minimum(mult, ceiling)
