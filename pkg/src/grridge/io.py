"""Reading and writing the on-disk data formats.

Design matrices are CSV with a ``sample_id`` first column and one column per
variable; responses are two-column CSV (``sample_id``, ``y``); co-data are TSV
with a ``variable_id`` first column. Parse errors carry 1-based line and
column numbers.
"""

from __future__ import annotations

import csv
import json
import math

import numpy as np

from .data import DataError, DesignMatrix, Response


class ParseError(DataError):
    def __init__(self, path, line, message, column=None):
        where = f"{path}: line {line}"
        if column is not None:
            where += f", column {column}"
        super().__init__(f"{where}: {message}")
        self.path, self.line, self.column = path, line, column


def _rows(path, delimiter):
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc.strerror}") from exc
    with fh:
        for lineno, row in enumerate(csv.reader(fh, delimiter=delimiter), start=1):
            if row and any(cell.strip() for cell in row):
                yield lineno, [cell.strip() for cell in row]


def _float(path, lineno, col, text):
    try:
        val = float(text)
    except ValueError:
        raise ParseError(path, lineno, f"not a number: {text!r}", col) from None
    if not math.isfinite(val):
        raise ParseError(path, lineno, f"non-finite value {text!r}", col)
    return val


def _check_unique(path, ids, what):
    seen = set()
    dup = [i for i in ids if i in seen or seen.add(i)]
    if dup:
        raise DataError(f"{path}: duplicate {what} id(s): {', '.join(dup[:5])}")


def read_design(path):
    """Read an n x p design matrix CSV into a :class:`DesignMatrix`."""
    rows = _rows(path, ",")
    try:
        lineno, header = next(rows)
    except StopIteration:
        raise DataError(f"{path}: empty file") from None
    if header[0] != "sample_id":
        raise ParseError(path, lineno, "first header cell must be 'sample_id'", 1)
    vids = header[1:]
    if not vids:
        raise ParseError(path, lineno, "no variable columns")
    _check_unique(path, vids, "variable")
    sids, values = [], []
    for lineno, row in rows:
        if len(row) != len(header):
            raise ParseError(path, lineno, f"expected {len(header)} fields, got {len(row)}")
        sids.append(row[0])
        values.append([_float(path, lineno, j + 2, cell) for j, cell in enumerate(row[1:])])
    if not values:
        raise DataError(f"{path}: no data rows")
    _check_unique(path, sids, "sample")
    return DesignMatrix(np.array(values, dtype=float), tuple(vids), tuple(sids))


def read_response(path, kind=None):
    """Read ``sample_id,y``; returns ``(sample_ids, Response)``.

    With ``kind='binary'`` every value must be 0 or 1 and offending lines are
    named. ``kind=None`` infers binary when all values are 0/1.
    """
    rows = _rows(path, ",")
    try:
        lineno, header = next(rows)
    except StopIteration:
        raise DataError(f"{path}: empty file") from None
    if header[:2] != ["sample_id", "y"] or len(header) != 2:
        raise ParseError(path, lineno, "header must be 'sample_id,y'")
    sids, vals, lines = [], [], []
    for lineno, row in rows:
        if len(row) != 2:
            raise ParseError(path, lineno, f"expected 2 fields, got {len(row)}")
        sids.append(row[0])
        vals.append(_float(path, lineno, 2, row[1]))
        lines.append(lineno)
    if not vals:
        raise DataError(f"{path}: no data rows")
    _check_unique(path, sids, "sample")
    y = np.array(vals)
    if kind is None:
        kind = "binary" if np.all((y == 0) | (y == 1)) else "continuous"
    if kind == "binary":
        bad = np.flatnonzero((y != 0) & (y != 1))
        if bad.size:
            i = int(bad[0])
            raise ParseError(path, lines[i], f"binary response must be 0 or 1, got {vals[i]:g}", 2)
    return tuple(sids), Response(kind, y)


def read_codata(path):
    """Read a co-data TSV: ``{column: list of str}`` plus the variable ids."""
    rows = _rows(path, "\t")
    try:
        lineno, header = next(rows)
    except StopIteration:
        raise DataError(f"{path}: empty file") from None
    if header[0] != "variable_id":
        raise ParseError(path, lineno, "first header cell must be 'variable_id'", 1)
    cols = {name: [] for name in header[1:]}
    vids = []
    for lineno, row in rows:
        if len(row) != len(header):
            raise ParseError(path, lineno, f"expected {len(header)} fields, got {len(row)}")
        vids.append(row[0])
        for name, cell in zip(header[1:], row[1:]):
            cols[name].append(cell)
    _check_unique(path, vids, "variable")
    return tuple(vids), cols


def codata_numeric(path, column, values):
    out = np.empty(len(values))
    for i, text in enumerate(values):
        try:
            out[i] = float(text)
        except ValueError:
            raise DataError(f"{path}: column {column!r}: not a number: {text!r} "
                            f"(data row {i + 1})") from None
    return out


def mismatch_message(what, missing):
    shown = ", ".join(list(missing)[:5])
    more = f" (and {len(missing) - 5} more)" if len(missing) > 5 else ""
    return f"{len(missing)} {what}: {shown}{more}"


def align_response(X, sids, y):
    """Reorder ``y`` to the sample order of ``X``; ids must match exactly."""
    pos = {s: i for i, s in enumerate(sids)}
    missing = [s for s in X.sample_ids if s not in pos]
    extra = [s for s in sids if s not in set(X.sample_ids)]
    if missing:
        raise DataError(mismatch_message("sample id(s) without a response", missing))
    if extra:
        raise DataError(mismatch_message("response sample id(s) not in the design", extra))
    return y.take(np.array([pos[s] for s in X.sample_ids], dtype=np.intp))


def align_codata(variable_ids, codata_ids, column):
    """Values of one co-data column in the order of ``variable_ids``."""
    pos = {v: i for i, v in enumerate(codata_ids)}
    missing = [v for v in variable_ids if v not in pos]
    if missing:
        raise DataError(mismatch_message("variable id(s) missing from the co-data", missing))
    return [column[pos[v]] for v in variable_ids]


def fmt(x):
    """Shortest round-trip decimal text of a float."""
    return repr(float(x))


def write_design(path, X):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id", *X.variable_ids])
        for sid, row in zip(X.sample_ids, X.values):
            w.writerow([sid, *map(fmt, row)])


def write_response(path, sample_ids, y):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id", "y"])
        for sid, v in zip(sample_ids, np.asarray(y)):
            w.writerow([sid, int(v) if float(v).is_integer() else fmt(v)])


def write_table(path, header, rows, delimiter=","):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(c) if isinstance(c, (float, np.floating)) else c for c in row])


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")
