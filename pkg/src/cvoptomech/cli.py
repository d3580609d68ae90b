"""Command-line front end: single-point reports, parameter sweeps, teleportation
and membrane utilities.

Exit codes: 0 success, 1 bad input (config or CM file), 2 unstable dynamics
while metrics were requested (a partial report is still written).
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from typing import Optional

import click
import numpy as np

from . import __version__
from .dual import (
    assess_stability_dual,
    make_exp_filters,
    output_cm_dual,
    steady_cm_dual,
    steady_state_dual,
)
from .errors import (
    CvError,
    FixedPointDiverged,
    NegativeDiscriminant,
    NoRoot,
    NotEntangled,
    Unphysical,
    UnstableDrift,
)
from .gaussian import Convention, GaussianState, log_negativity
from .io import (
    DUAL_KEYS,
    FILTER_KEYS,
    SINGLE_KEYS,
    config_hash,
    dual_config,
    dual_filter_centres,
    load_config,
    read_cm,
    single_config,
    single_filters,
)
from .optomech import (
    MembraneSpec,
    assess_stability,
    derive_params,
    drift_matrix,
    intracavity_report,
    membrane_split,
    output_cm,
    steady_cm,
    tripartite_test,
)
from .teleportation import optimal_tgcp

EXIT_OK, EXIT_INPUT, EXIT_UNSTABLE = 0, 1, 2

SINGLE_METRICS = ("E_N_intracavity", "E_N_output", "n_eff", "min_pt_eigs", "F_opt", "stability")


def _clean(x):
    """JSON-friendly copy with numpy types converted and non-finite floats as strings."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _pair_negativity(V, i, j) -> float:
    idx = [2 * i, 2 * i + 1, 2 * j, 2 * j + 1]
    return float(log_negativity(GaussianState(V[np.ix_(idx, idx)], convention=Convention.HALF)).E_N)


def _fidelity(V_half) -> float:
    try:
        return float(optimal_tgcp(2 * np.asarray(V_half)).F_opt)
    except NotEntangled as exc:
        return float(exc.fidelity)


# -- per-point evaluation (also used by the sweep workers) ----------------------


def single_point(cfg: dict, metrics) -> dict:
    """Evaluate one configuration of the single-laser model.

    Returns a flat dict of named values; entries are NaN when the point is
    unstable.  Always contains ``stable``.
    """
    oc = single_config(cfg)
    dp = derive_params(oc)
    st = assess_stability(dp)
    out = {"stable": int(st["eigen_stable"]), "max_re_over_omega_m": st["max_re"] / dp.omega_m}
    nan = float("nan")
    model = drift_matrix(dp)
    V = steady_cm(model) if st["eigen_stable"] else None
    filters = single_filters(cfg, dp.omega_m)
    for metric in metrics:
        if metric == "stability":
            out.update(s1=st["s1"], s2=st["s2"])
        elif metric in ("E_N_intracavity", "n_eff"):
            rep = intracavity_report(V, dp) if V is not None else None
            if metric == "E_N_intracavity":
                out["E_N_intracavity"] = rep["E_N"] if rep else nan
                out["G_over_omega_m"] = dp.G / dp.omega_m
            else:
                out["n_eff"] = rep["n_eff"] if rep else nan
                out["n_eff_perturbative"] = rep["n_eff_perturbative"] if rep else nan
        elif metric == "E_N_output":
            if not filters:
                raise click.UsageError("E_N_output needs filter_omega_over_omega_m")
            Vo = output_cm(model, filters) if V is not None else None
            for k in range(len(filters)):
                out[f"E_N_output_{k}"] = _pair_negativity(Vo, 0, k + 1) if Vo is not None else nan
        elif metric == "min_pt_eigs":
            if len(filters) != 2:
                raise click.UsageError("min_pt_eigs needs exactly two filter centres")
            Vo = output_cm(model, filters) if V is not None else None
            vals = tripartite_test(Vo) if Vo is not None else [nan] * 3
            out.update({f"min_pt_eig_{j}": float(v) for j, v in enumerate(vals)})
        elif metric == "F_opt":
            if V is None:
                out["F_opt"] = nan
            elif filters:
                Vo = output_cm(model, filters[:1])
                out["F_opt"] = _fidelity(Vo)
            else:
                out["F_opt"] = _fidelity(V)
        else:
            raise click.UsageError(f"unknown metric {metric}")
    return out


def dual_point(cfg: dict, metrics) -> dict:
    dc = dual_config(cfg)
    ss = steady_state_dual(dc)
    st = assess_stability_dual(ss)
    nan = float("nan")
    out = {"stable": int(st["stable"]), "max_re": st["max_re"], "balance": int(st["balance"])}
    centres = dual_filter_centres(cfg)
    Vo = None
    if st["stable"] and centres is not None:
        filt = make_exp_filters(centres[0] * ss.omega_m, centres[1] * ss.omega_m,
                                ss.omega_m / cfg["filter_epsilon"])
        Vo = output_cm_dual(ss, filt)
    needs_filters = {"E_N_output", "min_pt_eigs"}
    for metric in metrics:
        if metric in needs_filters and centres is None:
            raise click.UsageError(f"{metric} needs filter_a/b_omega_over_omega_m")
        if metric == "stability":
            continue
        if metric == "E_N_intracavity":
            V = steady_cm_dual(ss) if st["stable"] else None
            for name, (i, j) in (("mirror_a", (0, 1)), ("mirror_b", (0, 2)), ("a_b", (1, 2))):
                out[f"E_N_intracavity_{name}"] = _pair_negativity(V, i, j) if V is not None else nan
        elif metric == "n_eff":
            V = steady_cm_dual(ss) if st["stable"] else None
            out["n_eff"] = float((V[0, 0] + V[1, 1] - 1) / 2) if V is not None else nan
        elif metric == "E_N_output":
            for name, (i, j) in (("mirror_a", (0, 1)), ("mirror_b", (0, 2)), ("a_b", (1, 2))):
                out[f"E_N_output_{name}"] = _pair_negativity(Vo, i, j) if Vo is not None else nan
        elif metric == "min_pt_eigs":
            vals = tripartite_test(Vo) if Vo is not None else [nan] * 3
            out.update({f"min_pt_eig_{j}": float(v) for j, v in enumerate(vals)})
        elif metric == "F_opt":
            if Vo is not None:
                out["F_opt"] = _fidelity(Vo[2:, 2:])
            elif st["stable"] and centres is None:
                out["F_opt"] = _fidelity(steady_cm_dual(ss)[2:, 2:])
            else:
                out["F_opt"] = nan
        else:
            raise click.UsageError(f"unknown metric {metric}")
    return out


def _task(args):
    kind, cfg, metrics = args
    fn = single_point if kind == "single" else dual_point
    try:
        return fn(cfg, metrics)
    except (FixedPointDiverged, UnstableDrift, Unphysical, NegativeDiscriminant, NoRoot):
        # the point itself is ill-posed (bistable, unphysical); mark it unstable
        return {"stable": 0}


# -- CLI ---------------------------------------------------------------------


@click.group()
@click.version_option(__version__)
def main():
    """Gaussian-state optomechanics and teleportation toolkit."""


def _metrics_option(f):
    return click.option("--metrics", default="E_N_intracavity,n_eff", show_default=True,
                        help="Comma-separated metrics; empty for none.")(f)


def _load(path, schema, overrides):
    try:
        return load_config(path, schema, overrides)
    except CvError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_INPUT)


def _split_metrics(text: str) -> list:
    return [m.strip() for m in text.split(",") if m.strip()]


def _provenance(cfg, seed):
    return {"config_sha256": config_hash(cfg), "version": __version__, "seed": seed}


def _emit(text: str, out: Optional[str]):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


@main.command()
@click.argument("config", type=click.Path(dir_okay=False))
@click.option("--set", "overrides", multiple=True, help="Override a config key (key=value).")
@_metrics_option
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def report(config, overrides, metrics, seed, out):
    """Single-laser report at one operating point."""
    cfg = _load(config, SINGLE_KEYS, overrides)
    wanted = _split_metrics(metrics)
    try:
        dp = derive_params(single_config(cfg))
        st = assess_stability(dp)
        rec = {
            "inputs": cfg,
            "derived": {**asdict(dp), "G_over_omega_m": dp.G / dp.omega_m,
                        "kappa_over_omega_m": dp.kappa / dp.omega_m},
            "stability": st,
            "provenance": _provenance(cfg, seed),
        }
        code = EXIT_OK
        if st["eigen_stable"]:
            rec["steady_cm"] = steady_cm(drift_matrix(dp))
            rec["metrics"] = single_point(cfg, wanted) if wanted else {}
        elif wanted:
            code = EXIT_UNSTABLE
    except CvError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    _emit(_dumps(rec), out)
    sys.exit(code)


@main.command("dual-report")
@click.argument("config", type=click.Path(dir_okay=False))
@click.option("--set", "overrides", multiple=True, help="Override a config key (key=value).")
@_metrics_option
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def dual_report(config, overrides, metrics, seed, out):
    """Two-laser report at one operating point."""
    cfg = _load(config, DUAL_KEYS, overrides)
    wanted = _split_metrics(metrics)
    try:
        ss = steady_state_dual(dual_config(cfg))
        st = assess_stability_dual(ss)
        rec = {
            "inputs": cfg,
            "steady_state": {**asdict(ss), "G_A_over_omega_m": ss.G_A / ss.omega_m,
                             "G_B_over_omega_m": ss.G_B / ss.omega_m},
            "stability": st,
            "provenance": _provenance(cfg, seed),
        }
        code = EXIT_OK
        if st["stable"]:
            rec["steady_cm"] = steady_cm_dual(ss)
            rec["metrics"] = dual_point(cfg, wanted) if wanted else {}
        elif wanted:
            code = EXIT_UNSTABLE
    except CvError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    _emit(_dumps(rec), out)
    sys.exit(code)


def _parse_axis(text: str, schema) -> tuple:
    """``name:start:stop:count[:log]`` to ``(name, values)``."""
    parts = text.split(":")
    if len(parts) not in (4, 5):
        raise click.BadParameter(f"axis {text!r} must be name:start:stop:count[:log]")
    name = parts[0]
    numeric = {k for k, t in {**schema, **FILTER_KEYS}.items() if t is float}
    if schema is SINGLE_KEYS:
        # a swept centre stands in for the whole list
        numeric.add("filter_omega_over_omega_m")
    if name not in numeric:
        raise click.BadParameter(f"axis parameter {name!r} is not a numeric config key")
    try:
        start, stop, count = float(parts[1]), float(parts[2]), int(parts[3])
    except ValueError as exc:
        raise click.BadParameter(str(exc)) from exc
    if not (math.isfinite(start) and math.isfinite(stop)):
        raise click.BadParameter("axis range must be finite")
    if len(parts) == 5:
        if parts[4] != "log" or start <= 0 or stop <= 0:
            raise click.BadParameter("log axis needs the 'log' flag and a positive range")
        values = np.geomspace(start, stop, count)
    else:
        values = np.linspace(start, stop, count)
    return name, values


def _format_cell(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    return repr(x) if math.isfinite(x) else "NaN"


def run_sweep(kind, cfg, axes, metrics, workers: int) -> str:
    """Evaluate the grid and return CSV text, rows in row-major axis order."""
    import itertools

    names = [a[0] for a in axes]
    points = list(itertools.product(*[a[1] for a in axes]))
    tasks = []
    for values in points:
        c = dict(cfg)
        c.update({n: float(v) for n, v in zip(names, values)})
        tasks.append((kind, c, tuple(metrics)))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        results = [_task(t) for t in tasks]
    columns = []
    for r in results:
        for key in r:
            if key != "stable" and key not in columns:
                columns.append(key)
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(names + columns + ["stable"])
    for values, r in zip(points, results):
        row = [_format_cell(v) for v in values]
        row += [_format_cell(r.get(c, float("nan"))) for c in columns]
        row.append(str(int(r.get("stable", 0))))
        writer.writerow(row)
    return buf.getvalue()


def _sweep_command(kind, schema, config, overrides, axis1, axis2, metric, workers, seed,
                   out, allow_single):
    cfg = _load(config, schema, overrides)
    axes = [_parse_axis(axis1, schema)]
    if axis2:
        axes.append(_parse_axis(axis2, schema))
    if not allow_single and any(len(v) < 2 for _, v in axes):
        raise click.BadParameter("each axis needs at least two points (see --allow-single)")
    try:
        text = run_sweep(kind, cfg, axes, _split_metrics(metric), workers)
    except CvError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    _emit(text, out)


def _sweep_options(f):
    f = click.option("--allow-single", is_flag=True, help="Permit axes with a single point.")(f)
    f = click.option("--out", type=click.Path(dir_okay=False), default=None)(f)
    f = click.option("--seed", type=int, default=0, show_default=True)(f)
    f = click.option("--workers", type=int, default=1, show_default=True)(f)
    f = click.option("--metric", default="E_N_intracavity", show_default=True,
                     help="Metric name (comma-separated for several).")(f)
    f = click.option("--axis2", default=None, help="Second axis, same syntax.")(f)
    f = click.option("--axis1", required=True, help="name:start:stop:count[:log]")(f)
    f = click.option("--set", "overrides", multiple=True, help="Override a config key.")(f)
    return click.argument("config", type=click.Path(dir_okay=False))(f)


@main.command()
@_sweep_options
def sweep(config, overrides, axis1, axis2, metric, workers, seed, out, allow_single):
    """Grid sweep of the single-laser model, CSV output."""
    _sweep_command("single", SINGLE_KEYS, config, overrides, axis1, axis2, metric, workers,
                   seed, out, allow_single)


@main.command("dual-sweep")
@_sweep_options
def dual_sweep(config, overrides, axis1, axis2, metric, workers, seed, out, allow_single):
    """Grid sweep of the two-laser model, CSV output."""
    _sweep_command("dual", DUAL_KEYS, config, overrides, axis1, axis2, metric, workers,
                   seed, out, allow_single)


@main.command()
@click.argument("cm_file", type=click.Path(dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def teleport(cm_file, out):
    """Optimal local preprocessing for coherent-state teleportation over a two-mode CM."""
    try:
        state = read_cm(cm_file)
        V = state.cm_one()
        neg = log_negativity(V)
        try:
            res = optimal_tgcp(V)
        except NotEntangled as exc:
            rec = {"nu": exc.nu, "E_N": neg.E_N, "bounds": {"lower": 0.5, "upper": 0.5},
                   "F_opt": exc.fidelity, "map": None, "standard_form": None}
        else:
            rec = {
                "nu": res.nu,
                "E_N": neg.E_N,
                "bounds": {"lower": res.bounds[0], "upper": res.bounds[1]},
                "F_opt": res.F_opt,
                "map": {"Sa": res.Sa, "Sb": res.Sb, "side": res.side, "tau": res.tau},
                "standard_form": {"n": res.n, "m": res.m, "d": res.d, "lambda": res.lam},
            }
    except (CvError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    _emit(_dumps(rec), out)


@main.command()
@click.option("--half-length", type=float, required=True, help="Half cavity length L (m).")
@click.option("--q0", type=float, required=True, help="Membrane rest position (m).")
@click.option("--reflectivity", "R", type=float, required=True)
@click.option("--transmissivity", "T", type=float, default=None,
              help="Defaults to 1 - R (lossless membrane).")
@click.option("--mode", "n", type=int, required=True, help="Cavity mode index n.")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def membrane(half_length, q0, R, T, n, out):
    """Frequency splitting of a cavity mode by a partially reflecting membrane."""
    try:
        spec = MembraneSpec(half_length, q0, R, 1 - R if T is None else T, n)
        rec = {"inputs": asdict(spec), **membrane_split(spec)}
    except CvError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    _emit(_dumps(rec), out)


if __name__ == "__main__":
    main()
