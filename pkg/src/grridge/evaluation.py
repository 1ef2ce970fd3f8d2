"""Cross-validation folds, cross-validated likelihood, global penalty tuning
and predictive metrics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from ._parallel import ordered_map
from ._random import rng_for
from .data import DataError, Response, as_matrix, as_response
from .ridge import PenaltyConfig, fit

DEFAULT_GRID = np.logspace(-3, 6, 25)
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True, eq=False)
class FoldPlan:
    """Fold label in ``1..k`` for each of n samples."""

    assignments: np.ndarray
    k: int
    seed: int = 0
    stratified: bool = False

    def __post_init__(self):
        a = np.asarray(self.assignments, dtype=np.intp)
        counts = np.bincount(a, minlength=self.k + 1)
        if a.min() < 1 or counts.size != self.k + 1 or np.any(counts[1:] == 0):
            raise DataError("every fold must be non-empty and labelled 1..k")
        a.setflags(write=False)
        object.__setattr__(self, "assignments", a)

    @property
    def n(self):
        return self.assignments.shape[0]

    def test_indices(self, f):
        return np.flatnonzero(self.assignments == f)

    def train_indices(self, f):
        return np.flatnonzero(self.assignments != f)

    def splits(self):
        for f in range(1, self.k + 1):
            yield self.train_indices(f), self.test_indices(f)


@dataclass(frozen=True)
class MetricsReport:
    auc: float
    roc_points: list
    brier: float
    cvl: float | None = None


def make_folds(n, k=10, labels=None, seed=0, component="folds"):
    """Random k-fold plan, deterministic in ``seed``; stratified when ``labels`` given.

    Samples are shuffled within each class, classes are concatenated and the
    folds dealt round-robin, so fold sizes differ by at most one and each class
    is spread as evenly as possible. ``k == n`` gives leave-one-out.
    ``component`` names the random stream, so nested plans stay independent.
    """
    if not 2 <= k <= n:
        raise DataError(f"number of folds must be in [2, {n}], got {k}")
    rng = rng_for(seed, component)
    if labels is None:
        order = rng.permutation(n)
    else:
        labels = np.asarray(labels).ravel()
        if labels.shape[0] != n:
            raise DataError("one label per sample is required")
        order = np.concatenate([rng.permutation(np.flatnonzero(labels == c))
                                for c in np.unique(labels)])
    assignments = np.empty(n, dtype=np.intp)
    assignments[order] = np.arange(n) % k + 1
    return FoldPlan(assignments, k, seed, labels is not None)


def heldout_loglik(model, X, y):
    """Log-likelihood of held-out ``(X, y)`` under a fitted :class:`RidgeFit`."""
    eta = model.linear_predictor(X)
    if model.kind == "binary":
        return float(np.sum(y * eta - np.logaddexp(0.0, eta)))
    resid = y - eta
    s2 = model.sigma2
    return float(-0.5 * resid.size * math.log(2.0 * math.pi * s2) - 0.5 * np.sum(resid * resid) / s2)


def cvl(X, y, lam, multipliers=None, folds=None, threads=1):
    """Cross-validated log-likelihood at fixed penalties.

    Each training fold is refit at ``lam`` and ``multipliers``; held-out
    log-likelihoods are summed in fold order.
    """
    Xv = as_matrix(X)
    yr = as_response(y)
    yv = yr.values
    if folds is None:
        raise ValueError("a fold plan is required")
    if folds.n != yv.shape[0] or Xv.shape[0] != yv.shape[0]:
        raise DataError("fold plan, design and response sizes disagree")
    penalty = PenaltyConfig(lam, multipliers)

    def one(f):
        train, test = folds.train_indices(f), folds.test_indices(f)
        ytr = yv[train]
        if yr.kind == "binary" and ytr.min() == ytr.max():
            raise DataError(f"training part of fold {f} misses a class; fold plan rejected")
        model = fit(Xv[train], Response(yr.kind, ytr), penalty)
        return heldout_loglik(model, Xv[test], yv[test])

    parts = ordered_map(one, range(1, folds.k + 1), threads)
    total = 0.0
    for part in parts:
        total += part
    return total


def _golden_max(f, a, b, iters):
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc > fd else (d, fd)


def tune_lambda(X, y, folds, grid=None, multipliers=None, threads=1, refine_iters=12,
                return_profile=False):
    """Global penalty maximizing the cross-validated likelihood.

    The grid is scanned first (ties go to the larger penalty), then one
    golden-section search in log-penalty runs between the neighbours of the
    best grid point. The refined value is kept only if it beats the grid best.
    """
    grid = np.sort(np.asarray(DEFAULT_GRID if grid is None else grid, dtype=float).ravel())
    if grid.size == 0 or np.any(grid <= 0):
        raise ValueError("penalty grid must be non-empty and positive")

    def score(lam):
        try:
            val = cvl(X, y, lam, multipliers, folds, threads)
        except np.linalg.LinAlgError:
            return -np.inf
        return val if np.isfinite(val) else -np.inf

    values = np.array([score(lam) for lam in grid])
    if not np.any(np.isfinite(values)):
        raise DataError("cross-validated likelihood is non-finite on the whole grid")
    best = int(np.flatnonzero(values == values.max())[-1])
    best_lam, best_val = float(grid[best]), float(values[best])

    if grid.size > 1 and refine_iters > 0:
        lo = math.log(grid[max(best - 1, 0)])
        hi = math.log(grid[min(best + 1, grid.size - 1)])
        x, fx = _golden_max(lambda t: score(math.exp(t)), lo, hi, refine_iters)
        if fx > best_val:
            best_lam, best_val = math.exp(x), fx

    if return_profile:
        return best_lam, {"grid": grid, "cvl": values, "best_cvl": best_val}
    return best_lam


def roc_auc(scores, labels):
    """AUC (Mann-Whitney, ties count one half) and ROC points ``(fpr, tpr)``.

    Points are listed from (0, 0) to (1, 1), one per distinct threshold.
    """
    scores = np.asarray(scores, dtype=float).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise DataError("scores and labels differ in length")
    pos = labels == 1
    n1, n0 = int(pos.sum()), int((~pos).sum())
    if n1 == 0 or n0 == 0:
        raise DataError("single-class labels: AUC undefined")
    ranks = rankdata(scores)
    auc = (ranks[pos].sum() - n1 * (n1 + 1) / 2.0) / (n1 * n0)

    order = np.argsort(-scores, kind="stable")
    s_sorted, pos_sorted = scores[order], pos[order]
    tps = np.cumsum(pos_sorted)
    fps = np.cumsum(~pos_sorted)
    last = np.r_[np.flatnonzero(np.diff(s_sorted) != 0), scores.size - 1]
    points = [(0.0, 0.0)] + [(fps[i] / n0, tps[i] / n1) for i in last]
    return float(auc), [(float(a), float(b)) for a, b in points]


def brier(scores, labels):
    scores = np.asarray(scores, dtype=float).ravel()
    labels = np.asarray(labels, dtype=float).ravel()
    if scores.shape != labels.shape:
        raise DataError("scores and labels differ in length")
    if np.any((scores < 0) | (scores > 1)) or not np.all(np.isfinite(scores)):
        raise DataError("Brier score needs probabilities in [0, 1]")
    return float(np.mean((labels - scores) ** 2))


def metrics_report(scores, labels, cvl_value=None):
    auc, points = roc_auc(scores, labels)
    return MetricsReport(auc, points, brier(scores, labels), cvl_value)


def write_roc_csv(path, points):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fpr", "tpr"])
        for fpr, tpr in points:
            w.writerow([repr(fpr), repr(tpr)])
