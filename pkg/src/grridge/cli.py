"""Command-line interface: ``grridge fit|eval|predict|select|simulate``.

Option values resolve as command-line flag, then ``--config`` file, then the
built-in default. The config file is a flat ``key = value`` document whose
keys are option names with dashes or underscores. Every output directory gets
a ``config.json`` echo of the resolved options plus package versions; the
thread count and the output directory are left out since results do not
depend on them.
"""

from __future__ import annotations

import configparser
import json
import logging
import os
import platform
import sys

import click
import numpy as np
import scipy

from . import __version__
from .data import DataError
from .engine import EngineError, SelectionConfig, dumps_model, load_model, predict, select_posthoc
from .evaluation import brier, make_folds, roc_auc, write_roc_csv
from .io import (
    align_response,
    fmt,
    read_codata,
    read_design,
    read_response,
    write_design,
    write_json,
    write_response,
    write_table,
)
from .pipeline import PipelineSettings, fit_pipeline, nested_evaluate, parse_partition_specs
from .simulate import SimScenario, simulate_scenario


def _load_config(ctx, param, path):
    if path is None:
        return None
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        with open(path) as fh:
            parser.read_string("[run]\n" + fh.read(), source=path)
    except (OSError, configparser.Error) as exc:
        raise click.BadParameter(f"cannot read config: {exc}", param=param) from exc
    # keys may be written as option names ("lambda", "max-outer") or parameter names
    names = {}
    for p in ctx.command.params:
        if p.name is None:
            continue
        names[p.name] = p.name
        for opt in p.opts:
            names[opt.lstrip("-").replace("-", "_")] = p.name
    default_map = {}
    for key, value in parser["run"].items():
        name = names.get(key.replace("-", "_"))
        if name is None or name == "config":
            raise click.BadParameter(f"unknown key {key!r} in {path}", param=param)
        default_map[name] = value
    ctx.default_map = default_map
    return path


config_option = click.option(
    "--config", type=click.Path(exists=True, dir_okay=False), callback=_load_config,
    is_eager=True, expose_value=False, help="Flat key = value file with option defaults.")
seed_option = click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True)
threads_option = click.option("--threads", type=click.IntRange(min=1), default=1, show_default=True,
                              help="Worker threads for fold refits; results are identical.")


def _pipeline_options(f):
    opts = [
        click.option("--x", "x_path", type=click.Path(exists=True, dir_okay=False), required=True,
                     help="Design CSV (sample_id, then one column per variable)."),
        click.option("--y", "y_path", type=click.Path(exists=True, dir_okay=False), required=True,
                     help="Response CSV (sample_id,y)."),
        click.option("--codata", type=click.Path(exists=True, dir_okay=False), default=None,
                     help="Co-data TSV (variable_id, then co-data columns)."),
        click.option("--partitions", default=None,
                     help="Comma-separated partition specs kind:column[:param=value...]."),
        click.option("--lambda", "lam", type=click.FloatRange(min=0, min_open=True), default=None,
                     help="Global penalty; tuned by cross-validation when omitted."),
        click.option("--method", type=click.Choice(["iterative", "system"]), default="iterative",
                     show_default=True),
        click.option("--folds", type=click.IntRange(min=2), default=10, show_default=True,
                     help="Folds of the cross-validated likelihood."),
        click.option("--max-outer", type=click.IntRange(min=1), default=10, show_default=True),
        click.option("--response", "response_kind", type=click.Choice(["binary", "continuous"]),
                     default="binary", show_default=True),
        click.option("--select/--no-select", "do_select", default=False,
                     help="Run post-hoc variable selection."),
        click.option("--p-max", type=click.IntRange(min=1), default=100, show_default=True),
        click.option("--q-marg", type=click.FloatRange(0, 1, max_open=True), default=0.01,
                     show_default=True),
        seed_option, threads_option,
        click.option("--out", type=click.Path(file_okay=False), required=True,
                     help="Output directory."),
        config_option,
    ]
    for opt in reversed(opts):
        f = opt(f)
    return f


def _fail(exc):
    raise click.ClickException(str(exc))


def _load_data(x_path, y_path, codata_path, response_kind):
    X = read_design(x_path)
    sids, y = read_response(y_path, response_kind)
    y = align_response(X, sids, y)
    codata = read_codata(codata_path) if codata_path else None
    return X, y, codata


def _settings(p):
    sel = SelectionConfig(p_max=p["p_max"], q_marg=p["q_marg"]) if p["do_select"] else None
    return PipelineSettings(lam=p["lam"], method=p["method"], n_folds=p["folds"],
                            max_outer_iters=p["max_outer"], seed=p["seed"], threads=p["threads"],
                            selection=sel)


def _echo_config(out, command, params):
    resolved = {k: v for k, v in sorted(params.items()) if k not in ("threads", "out")}
    write_json(os.path.join(out, "config.json"), {
        "command": command,
        "options": resolved,
        "versions": {"grridge": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
    })


def _write_fit_reports(out, model):
    with open(os.path.join(out, "model.json"), "w") as fh:
        fh.write(dumps_model(model))
    write_table(os.path.join(out, "cvl_trace.csv"), ["iteration", "partition", "cvl", "accepted"],
                [[r["iteration"], r["partition"] or "", float(r["cvl"]), str(r["accepted"]).lower()]
                 for r in model.cvl_trace])
    rows = []
    for part in model.partitions:
        mult = model.partition_multipliers(part.partition_id)
        tau2 = model.last_tau2(part.partition_id)
        for g in range(part.n_groups):
            rows.append([part.partition_id, part.group_labels[g], int(part.sizes[g]),
                         "" if tau2 is None else float(tau2[g]), float(mult[g])])
    write_table(os.path.join(out, "multipliers.csv"),
                ["partition", "group", "size", "tau2", "multiplier"], rows)


@click.group()
@click.version_option(__version__, prog_name="grridge")
@click.option("-v", "--verbose", count=True, help="Log progress to stderr (repeat for more).")
def main(verbose):
    """Adaptive group-regularized ridge regression with co-data."""
    level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


@main.command()
@_pipeline_options
def fit(**params):
    """Fit a model and write model.json, cvl_trace.csv and multipliers.csv."""
    if not params["partitions"]:
        raise click.UsageError("--partitions is required")
    try:
        specs = parse_partition_specs(params["partitions"])
        X, y, codata = _load_data(params["x_path"], params["y_path"], params["codata"],
                                  params["response_kind"])
        model, _ = fit_pipeline(X, y, specs, codata, _settings(params))
    except (DataError, EngineError, ValueError) as exc:
        _fail(exc)
    os.makedirs(params["out"], exist_ok=True)
    _write_fit_reports(params["out"], model)
    _echo_config(params["out"], "fit", params)
    for part in model.partitions:
        click.echo(f"partition {part.partition_id}: {part.n_groups} groups, "
                   f"{'active' if model.active.get(part.partition_id) else 'inactive'}")
    final = [r["cvl"] for r in model.cvl_trace if r["accepted"]][-1]
    click.echo(f"lambda {fmt(model.lambda_global)}; final cvl {fmt(final)}")


@main.command(name="eval")
@_pipeline_options
@click.option("--cv", default="10", show_default=True, help="Outer folds: an integer or 'loo'.")
def eval_cmd(**params):
    """Nested cross-validated evaluation of the whole pipeline against ordinary ridge."""
    if not params["partitions"]:
        raise click.UsageError("--partitions is required")
    cv = str(params["cv"]).strip().lower()
    try:
        specs = parse_partition_specs(params["partitions"])
        X, y, codata = _load_data(params["x_path"], params["y_path"], params["codata"],
                                  params["response_kind"])
        n = X.shape[0]
        if cv == "loo":
            k = n
        else:
            try:
                k = int(cv)
            except ValueError:
                raise click.BadParameter(f"expected an integer or 'loo', got {cv!r}",
                                         param_hint="--cv") from None
            if not 2 <= k <= n:
                raise click.BadParameter(f"must be in [2, {n}]", param_hint="--cv")
        res = nested_evaluate(X, y, specs, codata, _settings(params), k)
    except (DataError, EngineError, ValueError) as exc:
        _fail(exc)
    out = params["out"]
    os.makedirs(out, exist_ok=True)
    metrics = {"n": n, "outer_folds": k, "lambdas": [float(v) for v in res.lambdas]}
    if y.kind == "binary":
        auc, points = roc_auc(res.scores, y.values)
        ridge_auc, ridge_points = roc_auc(res.ridge_scores, y.values)
        metrics.update(auc=auc, brier=brier(res.scores, y.values),
                       ridge_auc=ridge_auc, ridge_brier=brier(res.ridge_scores, y.values))
        write_roc_csv(os.path.join(out, "roc.csv"), points)
        write_roc_csv(os.path.join(out, "roc_ridge.csv"), ridge_points)
    else:
        metrics.update(mse=float(np.mean((y.values - res.scores) ** 2)),
                       ridge_mse=float(np.mean((y.values - res.ridge_scores) ** 2)))
    write_json(os.path.join(out, "metrics.json"), metrics)
    write_table(os.path.join(out, "predictions.csv"), ["sample_id", "fold", "y", "score", "ridge_score"],
                [[sid, int(res.outer.assignments[i]), float(y.values[i]), float(res.scores[i]),
                  float(res.ridge_scores[i])] for i, sid in enumerate(X.sample_ids)])
    _echo_config(out, "eval", params)
    if y.kind == "binary":
        click.echo(f"AUC {metrics['auc']:.4f} (ridge {metrics['ridge_auc']:.4f}); "
                   f"Brier {metrics['brier']:.4f} (ridge {metrics['ridge_brier']:.4f})")
    else:
        click.echo(f"MSE {metrics['mse']:.4g} (ridge {metrics['ridge_mse']:.4g})")


@main.command(name="predict")
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--x", "x_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--selected/--full", default=False, help="Score with the selected submodel.")
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Output CSV.")
def predict_cmd(model_path, x_path, selected, out):
    """Write sample_id,score for new data (columns matched by variable id)."""
    try:
        model = load_model(model_path)
        X = read_design(x_path)
        scores = predict(model, X, use_selected=selected)
    except (DataError, ValueError, KeyError, json.JSONDecodeError) as exc:
        _fail(exc)
    write_table(out, ["sample_id", "score"], [[sid, float(s)] for sid, s in zip(X.sample_ids, scores)])


@main.command()
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--x", "x_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--y", "y_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--folds", type=click.IntRange(min=2), default=10, show_default=True)
@click.option("--p-max", type=click.IntRange(min=1), default=100, show_default=True)
@click.option("--q-marg", type=click.FloatRange(0, 1, max_open=True), default=0.01, show_default=True)
@seed_option
@threads_option
@click.option("--out", type=click.Path(file_okay=False), required=True, help="Output directory.")
@config_option
def select(**params):
    """Post-hoc variable selection on a fitted model; writes an updated model.json."""
    try:
        model = load_model(params["model_path"])
        X = read_design(params["x_path"])
        sids, y = read_response(params["y_path"], model.kind)
        y = align_response(X, sids, y)
        labels = y.values if y.kind == "binary" else None
        n = X.shape[0]
        folds = make_folds(n, min(params["folds"], n), labels, params["seed"])
        cfg = SelectionConfig(p_max=params["p_max"], q_marg=params["q_marg"])
        model.selection = select_posthoc(model, X, y, folds, cfg, params["threads"])
    except (DataError, ValueError, KeyError, json.JSONDecodeError) as exc:
        _fail(exc)
    out = params["out"]
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "model.json"), "w") as fh:
        fh.write(dumps_model(model))
    sel = model.selection
    write_table(os.path.join(out, "selection.csv"), ["size", "cvl"],
                [[s, float(c)] for s, c in zip(sel.sizes, sel.cvls)])
    _echo_config(out, "select", params)
    click.echo(f"selected {len(sel.indices)} of {len(model.variable_ids)} variables")


@main.command()
@click.option("--groups", "G", type=click.IntRange(min=1), default=5, show_default=True)
@click.option("--group-size", "p_g", type=click.IntRange(min=1), default=100, show_default=True)
@click.option("--n", type=click.IntRange(min=2), default=100, show_default=True)
@click.option("--n-test", type=click.IntRange(min=2), default=1000, show_default=True)
@click.option("--rho", type=click.FloatRange(0, 1, max_open=True), default=0.0, show_default=True)
@click.option("--skew", "signal_skew", type=click.FloatRange(min=1), default=10.0, show_default=True)
@click.option("--sparsity", type=click.FloatRange(0, 1), default=0.0, show_default=True)
@click.option("--signal-variance", type=click.FloatRange(min=0), default=8.0, show_default=True)
@seed_option
@click.option("--out", type=click.Path(file_okay=False), required=True, help="Output directory.")
@config_option
def simulate(**params):
    """Simulate train/test data with a planted group structure."""
    out = params.pop("out")
    try:
        data = simulate_scenario(SimScenario(**params))
    except DataError as exc:
        _fail(exc)
    os.makedirs(out, exist_ok=True)
    write_design(os.path.join(out, "x_train.csv"), data.X)
    write_response(os.path.join(out, "y_train.csv"), data.X.sample_ids, data.y.values)
    write_design(os.path.join(out, "x_test.csv"), data.X_test)
    write_response(os.path.join(out, "y_test.csv"), data.X_test.sample_ids, data.y_test.values)
    part = data.partition
    write_table(os.path.join(out, "codata.tsv"), ["variable_id", "group"],
                [[vid, part.group_labels[g]] for vid, g in zip(data.X.variable_ids, part.group_of)],
                delimiter="\t")
    write_json(os.path.join(out, "truth.json"), data.truth())
    _echo_config(out, "simulate", params)


if __name__ == "__main__":  # pragma: no cover
    main()
