"""Design matrix and response containers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DataError(ValueError):
    """Raised when input data violate their structural invariants."""


def _default_ids(prefix, n):
    width = len(str(n))
    return tuple(f"{prefix}{i + 1:0{width}d}" for i in range(n))


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """An n x p covariate matrix with sample (row) and variable (column) ids."""

    values: np.ndarray
    variable_ids: tuple = field(default=None)
    sample_ids: tuple = field(default=None)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise DataError("design matrix must be 2-dimensional")
        n, p = values.shape
        if n < 2 or p < 1:
            raise DataError(f"design matrix needs n >= 2 and p >= 1, got {n}x{p}")
        if not np.all(np.isfinite(values)):
            raise DataError("design matrix contains missing or non-finite entries")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

        vids = _default_ids("V", p) if self.variable_ids is None else tuple(map(str, self.variable_ids))
        sids = _default_ids("S", n) if self.sample_ids is None else tuple(map(str, self.sample_ids))
        if len(vids) != p or len(sids) != n:
            raise DataError("identifier count does not match matrix shape")
        for name, ids in (("variable", vids), ("sample", sids)):
            if len(set(ids)) != len(ids):
                raise DataError(f"{name} identifiers are not unique")
        object.__setattr__(self, "variable_ids", vids)
        object.__setattr__(self, "sample_ids", sids)

    @property
    def shape(self):
        return self.values.shape

    def take_rows(self, idx):
        idx = np.asarray(idx)
        return DesignMatrix(self.values[idx], self.variable_ids,
                            tuple(self.sample_ids[i] for i in idx))

    def take_columns(self, idx):
        idx = np.asarray(idx)
        return DesignMatrix(self.values[:, idx],
                            tuple(self.variable_ids[i] for i in idx), self.sample_ids)


@dataclass(frozen=True, eq=False)
class Response:
    """Outcome vector; ``kind`` is ``"binary"`` or ``"continuous"``."""

    kind: str
    values: np.ndarray

    def __post_init__(self):
        if self.kind not in ("binary", "continuous"):
            raise DataError(f"unknown response kind {self.kind!r}")
        values = np.array(self.values, dtype=float).ravel()
        if not np.all(np.isfinite(values)):
            raise DataError("response contains non-finite values")
        if self.kind == "binary":
            bad = np.flatnonzero((values != 0) & (values != 1))
            if bad.size:
                raise DataError(f"binary response has value {values[bad[0]]:g} at position {bad[0]}")
            if values.size and (values.min() == values.max()):
                raise DataError("single-class response")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.shape[0]

    def take(self, idx):
        return Response(self.kind, self.values[np.asarray(idx)])


def as_matrix(X):
    if isinstance(X, DesignMatrix):
        return X.values
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DataError("design matrix must be 2-dimensional")
    return X


def as_response(y, kind=None):
    """Coerce ``y`` to a :class:`Response`, inferring the kind if not given."""
    if isinstance(y, Response):
        if kind is not None and kind != y.kind:
            raise DataError(f"expected a {kind} response, got {y.kind}")
        return y
    arr = np.asarray(y, dtype=float).ravel()
    if kind is None:
        kind = "binary" if np.all(np.isin(arr, (0.0, 1.0))) else "continuous"
    return Response(kind, arr)
