"""Adaptive group-regularized ridge: the outer re-penalization loop over
partitions, prediction, post-hoc variable selection and model serialization."""

from __future__ import annotations

import itertools
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import __version__
from .codata import Partition, isotonic_fit
from .data import DataError, DesignMatrix, Response, as_matrix, as_response
from .eb import (
    EBSystem,
    MultiplierSet,
    SingularSystemError,
    calibrate,
    clamp_tau2,
    group_B,
    rescale_estimates,
    solve_system,
    tau_global,
    tau_group_from_alpha,
)
from .evaluation import FoldPlan, cvl, make_folds
from .ridge import PenaltyConfig, RidgeFit, alpha_matrix, fit, moment_factors

logger = logging.getLogger(__name__)

MODEL_FORMAT = "grridge-model/1"


class EngineError(RuntimeError):
    """An operation inside the re-penalization loop failed."""


@dataclass(frozen=True)
class SelectionConfig:
    p_max: int = 100
    q_marg: float = 0.01
    # explicit subset sizes; default is 1..min(25, p_max), then steps of 5
    schedule: tuple | None = None

    def __post_init__(self):
        if self.p_max < 1:
            raise ValueError("p_max must be at least 1")
        if not 0.0 <= self.q_marg < 1.0:
            raise ValueError("q_marg must lie in [0, 1)")

    def sizes(self, p):
        cap = min(self.p_max, p)
        if self.schedule is not None:
            out = sorted({int(s) for s in self.schedule if 1 <= s <= cap})
            if not out:
                raise ValueError("selection schedule has no admissible size")
            return out
        dense = list(range(1, min(25, cap) + 1))
        strided = list(range(30, cap + 1, 5))
        out = dense + strided
        if out[-1] != cap:
            out.append(cap)
        return out


@dataclass(frozen=True)
class GRridgeOptions:
    method: str = "iterative"
    max_outer_iters: int = 10
    n_folds: int = 10
    seed: int = 0
    cvl_tolerance: float = 0.0
    selection: SelectionConfig | None = None
    threads: int = 1
    folds: FoldPlan | None = None

    def __post_init__(self):
        if self.method not in ("iterative", "system"):
            raise ValueError(f"method must be 'iterative' or 'system', got {self.method!r}")
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be at least 1")


@dataclass(frozen=True, eq=False)
class StepRecord:
    iteration: int
    partition_id: str
    route: str
    tau2_raw: np.ndarray
    multipliers: MultiplierSet
    cvl: float
    accepted: bool


@dataclass(frozen=True, eq=False)
class Selection:
    """Outcome of post-hoc selection: chosen variables (ranked) and their refit."""

    indices: np.ndarray
    fit: RidgeFit
    sizes: list
    cvls: list
    q_marg: float
    p_max: int

    @property
    def cvl_max(self):
        return max(self.cvls)

    @property
    def selected_cvl(self):
        return self.cvls[self.sizes.index(len(self.indices))]

    def __iter__(self):
        yield self.indices
        yield self.fit


@dataclass(eq=False)
class GRridgeModel:
    final_fit: RidgeFit
    lambda_global: float
    kind: str
    variable_ids: tuple
    partitions: list
    history: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    cvl_trace: list = field(default_factory=list)
    active: dict = field(default_factory=dict)
    method: str = "iterative"
    selection: Selection | None = None
    initial_fit: RidgeFit | None = None

    @property
    def coefficients(self):
        return self.final_fit.coefficients

    @property
    def intercept(self):
        return self.final_fit.intercept

    @property
    def multipliers(self):
        return self.final_fit.penalty.multipliers_for(len(self.variable_ids))

    def partition_multipliers(self, partition_id):
        """Accumulated group multipliers of one partition (product over accepted steps)."""
        part = self._partition(partition_id)
        out = np.ones(part.n_groups)
        for mset in self.history:
            if mset.partition_id == partition_id:
                out = out * mset.group_multipliers
        return out

    def last_tau2(self, partition_id):
        for mset in reversed(self.history):
            if mset.partition_id == partition_id:
                return mset.tau2
        return None

    def _partition(self, partition_id):
        for part in self.partitions:
            if part.partition_id == partition_id:
                return part
        raise KeyError(partition_id)


def _check_partitions(partitions, p):
    ids = [part.partition_id for part in partitions]
    if len(set(ids)) != len(ids):
        raise DataError(f"partition ids must be unique, got {ids}")
    for part in partitions:
        if part.p != p:
            raise DataError(f"partition {part.partition_id!r} covers {part.p} variables, data has {p}")


def _moments_on_scaled_design(X, current, mult, lam):
    """Coefficients, variances and D-factors of the problem rescaled to a common penalty."""
    root = np.sqrt(mult)
    beta_scaled = root * current.coefficients
    w = current.weights if current.weights is not None else np.ones(X.shape[0])
    sw = np.sqrt(w)
    Xw = sw[:, None] * (X / root)
    # intercept is unpenalized: moments of the slopes use the design with it profiled out
    Xw = Xw - np.outer(sw, (sw @ Xw) / (sw @ sw))
    scale = current.sigma2 if current.kind == "continuous" else 1.0
    factors = moment_factors(Xw, lam, scale=scale, working_weights=w)
    return beta_scaled, factors


def eb_step(X, current, mult, partition, lam, method="iterative"):
    """One empirical-Bayes re-penalization step for ``partition``.

    Returns ``(MultiplierSet, raw group variances, route)``; the multipliers are
    relative to the current per-variable multipliers ``mult``.
    """
    beta_s, factors = _moments_on_scaled_design(X, current, mult, lam)
    v_s = factors.variances
    tau2_global = tau_global(beta_s, v_s, factors)
    B = group_B(beta_s, v_s, partition)
    alpha = alpha_matrix(factors, partition, partition)
    route = method
    if method == "system":
        try:
            raw = solve_system(EBSystem(B, alpha, tau2_global=tau2_global), clamp=False)
        except SingularSystemError:
            logger.warning("singular group system for %r; using the iterative estimate",
                           partition.partition_id)
            route = "iterative-fallback"
            raw = tau_group_from_alpha(B, alpha, tau2_global)
    else:
        raw = tau_group_from_alpha(B, alpha, tau2_global)
    tau2, clamped = clamp_tau2(raw, tau2_global)
    if partition.monotone is not None:
        tau2 = isotonic_fit(tau2, partition.sizes, partition.monotone)
    mset = calibrate(tau2, partition.sizes, partition.partition_id, clamped)
    return mset, raw, route


def grridge(X, y, partitions, lam, opts=None):
    """Fit the adaptive group-regularized ridge model.

    Starts from ordinary ridge at ``lam``; then, in the given order and for at
    most ``opts.max_outer_iters`` sweeps, each active partition proposes new
    group multipliers. A proposal is kept only if the cross-validated
    likelihood at fixed ``lam`` improves on the current model by more than
    ``opts.cvl_tolerance``; otherwise it is rolled back and the partition
    drops out.
    """
    opts = opts or GRridgeOptions()
    Xd = X if isinstance(X, DesignMatrix) else DesignMatrix(as_matrix(X))
    yr = as_response(y)
    Xv = Xd.values
    n, p = Xv.shape
    if len(yr) != n:
        raise DataError(f"response length {len(yr)} does not match {n} rows")
    if isinstance(partitions, Partition):
        partitions = [partitions]
    partitions = list(partitions)
    _check_partitions(partitions, p)
    if not lam > 0:
        raise ValueError("lambda must be positive")

    folds = opts.folds
    if folds is None:
        labels = yr.values if yr.kind == "binary" else None
        folds = make_folds(n, min(opts.n_folds, n), labels, opts.seed)

    mult = np.ones(p)
    current = fit(Xv, yr, PenaltyConfig(lam, mult))
    current_cvl = cvl(Xv, yr, lam, mult, folds, opts.threads)
    model = GRridgeModel(final_fit=current, lambda_global=float(lam), kind=yr.kind,
                         variable_ids=Xd.variable_ids, partitions=partitions,
                         method=opts.method, initial_fit=current)
    model.cvl_trace.append({"iteration": 0, "partition": None, "cvl": current_cvl,
                            "accepted": True})
    active = {part.partition_id: True for part in partitions}

    for it in range(1, opts.max_outer_iters + 1):
        if not any(active.values()):
            break
        for part in partitions:
            pid = part.partition_id
            if not active[pid]:
                continue
            try:
                mset, raw, route = eb_step(Xv, current, mult, part, lam, opts.method)
                new_mult = mult * mset.per_variable(part)
                proposal = fit(Xv, yr, PenaltyConfig(lam, new_mult))
                new_cvl = cvl(Xv, yr, lam, new_mult, folds, opts.threads)
            except (DataError, ValueError, np.linalg.LinAlgError) as exc:
                raise EngineError(f"iteration {it}, partition {pid!r}: {exc}") from exc
            accepted = bool(np.isfinite(new_cvl) and new_cvl > current_cvl + opts.cvl_tolerance)
            model.steps.append(StepRecord(it, pid, route, raw, mset, new_cvl, accepted))
            model.cvl_trace.append({"iteration": it, "partition": pid, "cvl": new_cvl,
                                    "accepted": accepted})
            if accepted:
                mult, current, current_cvl = new_mult, proposal, new_cvl
                model.history.append(mset)
            else:
                active[pid] = False
            logger.info("iteration %d partition %s: cvl %.6g (%s)", it, pid, new_cvl,
                        "accepted" if accepted else "rejected")

    model.final_fit = current
    model.active = active
    if opts.selection is not None:
        model.selection = select_posthoc(model, Xd, yr, folds, opts.selection, opts.threads)
    return model


def original_scale_variances(model, X):
    """Variances of the final coefficients on the original covariate scale."""
    Xv = as_matrix(X)
    mult = model.multipliers
    _, factors = _moments_on_scaled_design(Xv, model.final_fit, mult, model.lambda_global)
    _, v = rescale_estimates(np.zeros_like(mult), factors.variances, mult)
    return v


def partition_order_diagnostics(X, y, partitions, lam, opts=None):
    """Final CVL for every ordering of ``partitions``: list of ``(ids, cvl)``."""
    out = []
    for order in itertools.permutations(partitions):
        model = grridge(X, y, list(order), lam, opts)
        final = [row["cvl"] for row in model.cvl_trace if row["accepted"]][-1]
        out.append((tuple(part.partition_id for part in order), final))
    return out


def _align_columns(model, Xnew):
    if isinstance(Xnew, DesignMatrix):
        index = {vid: j for j, vid in enumerate(Xnew.variable_ids)}
        missing = [vid for vid in model.variable_ids if vid not in index]
        if missing:
            raise DataError(f"new data lack {len(missing)} model variable(s): {missing[:5]}")
        return Xnew.values[:, [index[vid] for vid in model.variable_ids]]
    Xv = as_matrix(Xnew)
    if Xv.shape[1] != len(model.variable_ids):
        raise DataError(f"new data have {Xv.shape[1]} columns, model expects {len(model.variable_ids)}")
    return Xv


def predict(model, Xnew, use_selected=False):
    """Success probabilities (binary) or linear predictions (continuous).

    A :class:`DesignMatrix` is matched to the model by variable id, so column
    order does not matter.
    """
    Xv = _align_columns(model, Xnew)
    if use_selected:
        if model.selection is None:
            raise ValueError("model has no selected submodel")
        sel = model.selection
        eta = sel.fit.intercept + Xv[:, sel.indices] @ sel.fit.coefficients
    else:
        eta = model.intercept + Xv @ model.coefficients
    return expit(eta) if model.kind == "binary" else eta


def select_by_margin(sizes, cvls, q_marg):
    """Smallest size whose CVL is within ``q_marg * |max|`` of the best."""
    cvls = np.asarray(cvls, dtype=float)
    finite = np.isfinite(cvls)
    if not finite.any():
        raise DataError("all subset CVL values are non-finite")
    best = cvls[finite].max()
    ok = finite & (cvls >= best - q_marg * abs(best))
    return int(np.asarray(sizes)[ok].min())


def select_posthoc(model, X, y, folds, cfg=None, threads=1):
    """Post-hoc variable selection by cross-validated likelihood.

    Variables are ranked by ``|beta_k|``; the top-s subsets are refit at the
    model's global penalty and per-variable multipliers and scored by CVL.
    """
    cfg = cfg or SelectionConfig()
    Xv = _align_columns(model, X)
    yr = as_response(y)
    beta = model.coefficients
    p = beta.shape[0]
    if cfg.p_max > p:
        logger.info("p_max %d exceeds p=%d; capping", cfg.p_max, p)
    mult = model.multipliers
    lam = model.lambda_global
    order = np.argsort(-np.abs(beta), kind="stable")
    sizes = cfg.sizes(p)
    cvls = []
    for s in sizes:
        idx = order[:s]
        try:
            val = cvl(Xv[:, idx], yr, lam, mult[idx], folds, threads)
        except np.linalg.LinAlgError:
            val = -np.inf
        cvls.append(float(val) if np.isfinite(val) else -np.inf)
    s_sel = select_by_margin(sizes, cvls, cfg.q_marg)
    idx = order[:s_sel]
    refit = fit(Xv[:, idx], yr, PenaltyConfig(lam, mult[idx]))
    return Selection(indices=idx, fit=refit, sizes=sizes, cvls=cvls, q_marg=cfg.q_marg,
                     p_max=cfg.p_max)


# --- serialization ---------------------------------------------------------

def _floats(a):
    return [float(x) for x in np.asarray(a, dtype=float).ravel()]


def _fit_to_dict(f):
    return {
        "intercept": float(f.intercept),
        "coefficients": _floats(f.coefficients),
        "converged": bool(f.converged),
        "iterations": int(f.iterations),
        "penalized_loglik": float(f.penalized_loglik),
        "kind": f.kind,
        "sigma2": None if f.sigma2 is None else float(f.sigma2),
    }


def _fit_from_dict(d, penalty):
    return RidgeFit(coefficients=np.array(d["coefficients"], dtype=float),
                    intercept=d["intercept"], penalty=penalty, converged=d["converged"],
                    iterations=d["iterations"], penalized_loglik=d["penalized_loglik"],
                    kind=d["kind"], sigma2=d.get("sigma2"))


def _mset_to_dict(m):
    return {
        "partition": m.partition_id,
        "group_multipliers": _floats(m.group_multipliers),
        "tau2": _floats(m.tau2),
        "sizes": [int(k) for k in m.sizes],
        "clamped": None if m.clamped is None else [bool(c) for c in m.clamped],
    }


def _mset_from_dict(d):
    clamped = None if d["clamped"] is None else np.array(d["clamped"], dtype=bool)
    return MultiplierSet(d["partition"], np.array(d["group_multipliers"], dtype=float),
                         np.array(d["tau2"], dtype=float), np.array(d["sizes"]), clamped)


def model_to_dict(model):
    sel = None
    if model.selection is not None:
        s = model.selection
        sel = {
            "indices": [int(i) for i in s.indices],
            "variable_ids": [model.variable_ids[i] for i in s.indices],
            "fit": _fit_to_dict(s.fit),
            "sizes": [int(k) for k in s.sizes],
            "cvls": [float(c) for c in s.cvls],
            "q_marg": float(s.q_marg),
            "p_max": int(s.p_max),
        }
    return {
        "format": MODEL_FORMAT,
        "version": __version__,
        "kind": model.kind,
        "method": model.method,
        "lambda": float(model.lambda_global),
        "variable_ids": list(model.variable_ids),
        "multipliers": _floats(model.multipliers),
        "fit": _fit_to_dict(model.final_fit),
        "initial_fit": None if model.initial_fit is None else _fit_to_dict(model.initial_fit),
        "partitions": [
            {"id": part.partition_id, "labels": list(part.group_labels),
             "monotone": part.monotone, "group_of": [int(g) for g in part.group_of]}
            for part in model.partitions
        ],
        "multiplier_sets": [_mset_to_dict(m) for m in model.history],
        "steps": [
            {"iteration": s.iteration, "partition": s.partition_id, "route": s.route,
             "tau2_raw": _floats(s.tau2_raw), "multipliers": _mset_to_dict(s.multipliers),
             "cvl": float(s.cvl), "accepted": s.accepted}
            for s in model.steps
        ],
        "cvl_trace": [dict(row, cvl=float(row["cvl"])) for row in model.cvl_trace],
        "active": dict(model.active),
        "selection": sel,
    }


def model_from_dict(d):
    if d.get("format") != MODEL_FORMAT:
        raise DataError(f"unsupported model format {d.get('format')!r}")
    penalty = PenaltyConfig(d["lambda"], np.array(d["multipliers"], dtype=float))
    partitions = [Partition(pd["id"], np.array(pd["group_of"]), tuple(pd["labels"]), pd["monotone"])
                  for pd in d["partitions"]]
    model = GRridgeModel(
        final_fit=_fit_from_dict(d["fit"], penalty),
        lambda_global=d["lambda"], kind=d["kind"], variable_ids=tuple(d["variable_ids"]),
        partitions=partitions, method=d["method"],
        history=[_mset_from_dict(m) for m in d["multiplier_sets"]],
        steps=[StepRecord(s["iteration"], s["partition"], s["route"],
                          np.array(s["tau2_raw"], dtype=float), _mset_from_dict(s["multipliers"]),
                          s["cvl"], s["accepted"]) for s in d["steps"]],
        cvl_trace=[dict(row) for row in d["cvl_trace"]],
        active=dict(d["active"]),
    )
    if d.get("initial_fit") is not None:
        model.initial_fit = _fit_from_dict(d["initial_fit"], PenaltyConfig(d["lambda"]))
    sel = d.get("selection")
    if sel is not None:
        idx = np.array(sel["indices"], dtype=np.intp)
        sub_penalty = PenaltyConfig(d["lambda"], penalty.multipliers[idx])
        model.selection = Selection(indices=idx, fit=_fit_from_dict(sel["fit"], sub_penalty),
                                    sizes=list(sel["sizes"]), cvls=list(sel["cvls"]),
                                    q_marg=sel["q_marg"], p_max=sel["p_max"])
    return model


def dumps_model(model):
    """JSON text; floats are written with round-trip precision."""
    return json.dumps(model_to_dict(model), indent=1) + "\n"


def save_model(model, path):
    with open(path, "w") as fh:
        fh.write(dumps_model(model))


def load_model(path):
    with open(path) as fh:
        return model_from_dict(json.load(fh))
