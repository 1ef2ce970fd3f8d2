"""Partition specifications and the end-to-end fitting pipeline.

A partition spec reads ``kind:column[:param=value...]``; several specs are
joined by commas. Kinds are ``rank`` (``s=``), ``rank_nonuniform``
(``s_min=``, ``G_max=``), ``quantile`` (``G=``) and ``labels``. Every kind
accepts ``monotone=increasing|decreasing|none|auto`` and ``type=pvalue|generic``
for the co-data column. The column ``variance`` is computed from the design
when the co-data file does not provide it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .codata import (
    CoDataVector,
    partition_by_labels,
    partition_by_quantiles,
    partition_by_rank,
    partition_by_rank_nonuniform,
)
from .data import DataError, DesignMatrix, Response
from .engine import GRridgeOptions, SelectionConfig, grridge, predict
from .evaluation import make_folds, tune_lambda
from .io import align_codata, codata_numeric

KINDS = {
    "rank": {"s": int},
    "rank_nonuniform": {"s_min": int, "G_max": int},
    "quantile": {"G": int},
    "labels": {},
}
REQUIRED = {"rank": ("s",), "rank_nonuniform": ("s_min", "G_max"), "quantile": ("G",), "labels": ()}
MONOTONE = {"increasing": "increasing", "decreasing": "decreasing", "none": None, "auto": "auto"}


@dataclass(frozen=True)
class PartitionSpec:
    kind: str
    column: str
    params: dict = field(default_factory=dict)
    monotone: str | None = "auto"
    column_type: str = "generic"

    @property
    def partition_id(self):
        return f"{self.kind}:{self.column}"


def parse_partition_specs(text):
    """Parse a comma-separated list of partition specs."""
    specs = []
    for item in (t.strip() for t in str(text).split(",")):
        if not item:
            raise DataError(f"empty partition spec in {text!r}")
        parts = item.split(":")
        if len(parts) < 2 or not parts[1]:
            raise DataError(f"partition spec {item!r}: expected kind:column[:param=value...]")
        kind, column = parts[0], parts[1]
        if kind not in KINDS:
            raise DataError(f"partition spec {item!r}: unknown kind {kind!r} "
                            f"(choose from {', '.join(KINDS)})")
        params, monotone, ctype = {}, "auto", "generic"
        for tok in parts[2:]:
            key, sep, val = tok.partition("=")
            if not sep:
                raise DataError(f"partition spec {item!r}: parameter {tok!r} lacks '='")
            if key == "monotone":
                if val not in MONOTONE:
                    raise DataError(f"partition spec {item!r}: bad monotone value {val!r}")
                monotone = MONOTONE[val]
            elif key == "type":
                if val not in ("pvalue", "generic"):
                    raise DataError(f"partition spec {item!r}: bad type {val!r}")
                ctype = val
            elif key in KINDS[kind]:
                try:
                    params[key] = KINDS[kind][key](val)
                except ValueError:
                    raise DataError(f"partition spec {item!r}: {key} must be an integer") from None
            else:
                raise DataError(f"partition spec {item!r}: unknown parameter {key!r}")
        missing = [k for k in REQUIRED[kind] if k not in params]
        if missing:
            raise DataError(f"partition spec {item!r}: missing {', '.join(missing)}")
        specs.append(PartitionSpec(kind, column, params, monotone, ctype))
    ids = [s.partition_id for s in specs]
    if len(set(ids)) != len(ids):
        raise DataError(f"duplicate partitions: {ids}")
    return specs


def _column_values(spec, X, codata):
    if codata is not None and spec.column in codata[1]:
        vids, cols = codata
        return align_codata(X.variable_ids, vids, cols[spec.column])
    if spec.column == "variance":
        return X.values.var(axis=0, ddof=1)
    raise DataError(f"co-data column {spec.column!r} not found")


def build_partition(spec, X, codata=None, source="co-data"):
    """Partition of ``X``'s variables described by ``spec``."""
    raw = _column_values(spec, X, codata)
    if spec.kind == "labels":
        mono = None if spec.monotone == "auto" else spec.monotone
        return partition_by_labels(raw, spec.partition_id, mono)
    values = raw if isinstance(raw, np.ndarray) else codata_numeric(source, spec.column, raw)
    if spec.column_type == "pvalue":
        kind = "pvalue"
    elif spec.column == "variance":
        kind = "variance"
    else:
        kind = "generic"
    vec = CoDataVector(X.variable_ids, values, kind)
    if spec.kind == "rank":
        return partition_by_rank(vec, spec.params["s"], spec.partition_id, spec.monotone)
    if spec.kind == "rank_nonuniform":
        return partition_by_rank_nonuniform(vec, spec.params["s_min"], spec.params["G_max"],
                                            spec.partition_id, spec.monotone)
    mono = None if spec.monotone == "auto" else spec.monotone
    return partition_by_quantiles(vec, spec.params["G"], spec.partition_id, mono)


@dataclass(frozen=True)
class PipelineSettings:
    lam: float | None = None
    method: str = "iterative"
    n_folds: int = 10
    max_outer_iters: int = 10
    seed: int = 0
    threads: int = 1
    selection: SelectionConfig | None = None


def fit_pipeline(X, y, specs, codata, settings, stream="folds"):
    """Build partitions, tune the global penalty if unset and run the re-penalization.

    Returns ``(model, folds)``.
    """
    n = X.shape[0]
    labels = y.values if y.kind == "binary" else None
    folds = make_folds(n, min(settings.n_folds, n), labels, settings.seed, stream)
    partitions = [build_partition(s, X, codata) for s in specs]
    lam = settings.lam
    if lam is None:
        lam = tune_lambda(X, y, folds, threads=settings.threads)
    opts = GRridgeOptions(method=settings.method, max_outer_iters=settings.max_outer_iters,
                          n_folds=settings.n_folds, seed=settings.seed, folds=folds,
                          selection=settings.selection, threads=settings.threads)
    return grridge(X, y, partitions, lam, opts), folds


@dataclass
class NestedResult:
    outer: object
    scores: np.ndarray
    ridge_scores: np.ndarray
    lambdas: list


def nested_evaluate(X, y, specs, codata, settings, k_outer):
    """Outer cross-validation that reruns the full pipeline on every training part.

    Test folds never influence penalties, groupings or the global penalty.
    ``k_outer == n`` gives leave-one-out.
    """
    if not isinstance(X, DesignMatrix):
        raise TypeError("a DesignMatrix is required")
    n = X.shape[0]
    labels = y.values if y.kind == "binary" else None
    outer = make_folds(n, k_outer, labels, settings.seed, "folds/outer")
    scores, ridge_scores = np.empty(n), np.empty(n)
    lambdas = []
    for f, (train, test) in enumerate(outer.splits(), start=1):
        ytr = y.values[train]
        if y.kind == "binary" and ytr.min() == ytr.max():
            raise DataError(f"outer fold {f}: training part has a single class")
        model, _ = fit_pipeline(X.take_rows(train), Response(y.kind, ytr), specs, codata,
                                settings, stream=f"folds/inner{f}")
        # plain rows: a leave-one-out test part is too small for a DesignMatrix
        Xte = X.values[test]
        scores[test] = predict(model, Xte, use_selected=settings.selection is not None)
        ridge_scores[test] = model.initial_fit.predict(Xte)
        lambdas.append(model.lambda_global)
    return NestedResult(outer, scores, ridge_scores, lambdas)
