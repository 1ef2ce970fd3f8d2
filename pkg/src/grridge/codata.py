"""Variable partitions built from co-data, monotone smoothing of group
variances and a t-test based prior filter."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats

from . import _kernels
from .data import DataError, as_matrix, as_response

logger = logging.getLogger(__name__)

MONOTONE_DIRECTIONS = (None, "increasing", "decreasing")


@dataclass(frozen=True, eq=False)
class Partition:
    """Disjoint, exhaustive assignment of p variables to G groups.

    ``group_of[k]`` is the 0-based group of variable k. ``monotone`` gives the
    direction enforced on group variances over the group index, if any.
    """

    partition_id: str
    group_of: np.ndarray
    group_labels: tuple = None
    monotone: str | None = None

    def __post_init__(self):
        g = np.array(self.group_of)
        if g.ndim != 1 or g.size == 0:
            raise DataError("partition must assign at least one variable")
        if not np.issubdtype(g.dtype, np.integer):
            if not np.all(np.mod(g, 1) == 0):
                raise DataError("group indices must be integers")
        g = g.astype(np.intp)
        if g.min() < 0:
            raise DataError("group indices must be non-negative")
        n_groups = int(g.max()) + 1
        sizes = np.bincount(g, minlength=n_groups)
        if np.any(sizes == 0):
            empty = np.flatnonzero(sizes == 0)
            raise DataError(f"partition {self.partition_id!r} has empty group(s) {empty[:5].tolist()}")
        labels = (tuple(str(i + 1) for i in range(n_groups)) if self.group_labels is None
                  else tuple(map(str, self.group_labels)))
        if len(labels) != n_groups:
            raise DataError(f"{len(labels)} labels for {n_groups} groups")
        if self.monotone not in MONOTONE_DIRECTIONS:
            raise DataError(f"monotone must be one of {MONOTONE_DIRECTIONS}")
        g.setflags(write=False)
        sizes.setflags(write=False)
        object.__setattr__(self, "group_of", g)
        object.__setattr__(self, "group_labels", labels)
        object.__setattr__(self, "_sizes", sizes)

    @property
    def sizes(self):
        return self._sizes

    @property
    def n_groups(self):
        return self._sizes.shape[0]

    @property
    def p(self):
        return self.group_of.shape[0]

    def members(self, g):
        return np.flatnonzero(self.group_of == g)

    def subset(self, idx):
        """Restrict to variables ``idx``, dropping groups left empty."""
        sub = self.group_of[np.asarray(idx)]
        kept, new = np.unique(sub, return_inverse=True)
        return Partition(self.partition_id, new, tuple(self.group_labels[k] for k in kept),
                         self.monotone)

    @classmethod
    def from_groups(cls, partition_id, groups, p, labels=None, monotone=None):
        """Build from a list of index collections covering ``range(p)``."""
        group_of = np.full(p, -1, dtype=np.intp)
        for g, members in enumerate(groups):
            members = np.asarray(list(members), dtype=np.intp)
            if np.any(group_of[members] >= 0):
                raise DataError("groups overlap")
            group_of[members] = g
        if np.any(group_of < 0):
            raise DataError(f"groups do not cover variable(s) {np.flatnonzero(group_of < 0)[:5].tolist()}")
        return cls(partition_id, group_of, labels, monotone)


@dataclass(frozen=True, eq=False)
class CoDataVector:
    variable_ids: tuple
    values: np.ndarray
    kind: str = "generic"

    def __post_init__(self):
        vals = np.array(self.values, dtype=float).ravel()
        if not np.all(np.isfinite(vals)):
            raise DataError("co-data values must be finite")
        if len(self.variable_ids) != vals.size:
            raise DataError("one co-data value per variable is required")
        if self.kind not in ("pvalue", "variance", "generic"):
            raise DataError(f"unknown co-data kind {self.kind!r}")
        object.__setattr__(self, "variable_ids", tuple(map(str, self.variable_ids)))
        object.__setattr__(self, "values", vals)


def _values(codata):
    if isinstance(codata, CoDataVector):
        return codata.values, codata.kind
    return np.asarray(codata, dtype=float).ravel(), "generic"


def _from_blocks(partition_id, order, sizes, monotone=None):
    group_of = np.empty(order.size, dtype=np.intp)
    group_of[order] = np.repeat(np.arange(len(sizes)), sizes)
    return Partition(partition_id, group_of, None, monotone)


def partition_by_quantiles(codata, G, partition_id="quantile", monotone=None):
    """Sort ascending and cut into ``G`` contiguous blocks of near-equal size."""
    values, _ = _values(codata)
    p = values.size
    if not 1 <= G <= p:
        raise DataError(f"cannot form {G} groups from {p} variables")
    order = np.argsort(values, kind="stable")
    base, extra = divmod(p, G)
    sizes = [base + 1 if g < extra else base for g in range(G)]
    return _from_blocks(partition_id, order, sizes, monotone)


def _rank_order(values):
    return np.argsort(values, kind="stable")


def partition_by_rank(codata, s, partition_id="rank", monotone="auto"):
    """Groups of ``s`` consecutive ranks (ascending); the last may be smaller.

    With p-value co-data the default monotone direction is decreasing group
    variance in the group index (most significant first).
    """
    values, kind = _values(codata)
    p = values.size
    if not 1 <= s <= p:
        raise DataError(f"group size must be in [1, {p}], got {s}")
    if s == 1:
        logger.warning("singleton rank groups are prone to over-fitting")
    if monotone == "auto":
        monotone = "decreasing" if kind == "pvalue" else None
    G = math.ceil(p / s)
    sizes = [s] * (G - 1) + [p - s * (G - 1)]
    return _from_blocks(partition_id, _rank_order(values), sizes, monotone)


def geometric_ratio(p, s_min, G):
    """Ratio ``r >= 1`` with ``sum_{i<G} s_min * r**i == p``."""
    if s_min * G >= p:
        return 1.0

    def excess(r):
        return s_min * (r ** G - 1.0) / (r - 1.0) - p

    hi = 2.0
    while excess(hi) < 0:
        hi *= 2.0
    return optimize.brentq(excess, 1.0 + 1e-12, hi, xtol=1e-14, rtol=1e-14)


def nonuniform_sizes(p, s_min, G_max):
    """Group sizes growing geometrically from ``s_min`` to cover ``p``."""
    if s_min < 1 or G_max < 1:
        raise DataError("s_min and G_max must be at least 1")
    if p < s_min:
        raise DataError(f"infeasible: p={p} is smaller than s_min={s_min}")
    if math.ceil(p / s_min) <= G_max:
        G = math.ceil(p / s_min)
        return [s_min] * (G - 1) + [p - s_min * (G - 1)]
    r = geometric_ratio(p, s_min, G_max)
    cum = s_min * (r ** np.arange(G_max + 1) - 1.0) / (r - 1.0)
    bounds = np.rint(cum).astype(int)
    bounds[-1] = p
    sizes = np.diff(bounds)
    if np.any(sizes < 1):
        raise DataError("rounding produced an empty group")
    return sizes.tolist()


def partition_by_rank_nonuniform(codata, s_min, G_max, partition_id="rank_nonuniform",
                                 monotone="auto"):
    """Rank-based groups whose sizes grow geometrically away from the extremes."""
    values, kind = _values(codata)
    sizes = nonuniform_sizes(values.size, s_min, G_max)
    if monotone == "auto":
        monotone = "decreasing" if kind == "pvalue" else None
    return _from_blocks(partition_id, _rank_order(values), sizes, monotone)


def partition_by_labels(labels, partition_id="labels", monotone=None):
    """One group per distinct label, ordered by first appearance."""
    labels = [str(x) for x in labels]
    if not labels:
        raise DataError("empty label vector")
    index = {}
    group_of = np.array([index.setdefault(lab, len(index)) for lab in labels], dtype=np.intp)
    return Partition(partition_id, group_of, tuple(index), monotone)


def isotonic_fit(tau2_init, weights, direction="increasing"):
    """Weighted least-squares monotone fit by pool-adjacent-violators."""
    if direction not in ("increasing", "decreasing"):
        raise ValueError(f"direction must be 'increasing' or 'decreasing', got {direction!r}")
    weights = np.asarray(weights, dtype=float)
    if not np.all(weights > 0):
        raise ValueError("isotonic weights must be positive")
    return _kernels.pava(tau2_init, weights, direction == "increasing")


def welch_pvalues(X, y):
    """Two-sided Welch t-test p-values per column; zero-variance columns get 1."""
    X = as_matrix(X)
    y = as_response(y, "binary").values
    with np.errstate(invalid="ignore", divide="ignore"):
        res = stats.ttest_ind(X[y == 1], X[y == 0], equal_var=False)
    pvals = np.asarray(res.pvalue, dtype=float)
    flagged = ~np.isfinite(pvals)
    if flagged.any():
        logger.warning("%d variable(s) with zero within-class variance get p = 1", int(flagged.sum()))
    pvals[flagged] = 1.0
    return pvals, flagged


def bh_adjust(pvalues):
    """Benjamini-Hochberg step-up adjusted p-values."""
    return stats.false_discovery_control(np.asarray(pvalues, dtype=float), method="bh")


def filter_features(X, y, fdr_max=0.5, min_meandiff=0.1):
    """Indices of variables with BH-adjusted Welch p <= ``fdr_max`` and an
    absolute class mean difference of at least ``min_meandiff``."""
    Xv = as_matrix(X)
    yv = as_response(y, "binary").values
    pvals, _ = welch_pvalues(Xv, yv)
    adj = bh_adjust(pvals)
    diff = np.abs(Xv[yv == 1].mean(axis=0) - Xv[yv == 0].mean(axis=0))
    return np.flatnonzero((adj <= fdr_max) & (diff >= min_meandiff))
