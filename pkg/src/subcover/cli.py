"""Command-line front end.

Every run creates ``<outdir>/<subcommand>-<timestamp>/`` containing a
``manifest`` that echoes the fully resolved configuration, a
``report.csv`` (byte-identical across reruns with the same seed and
across thread counts), a ``summary.json`` with verdicts, and SVG plots
where they make sense.

Exit codes: 0 all verdicts pass, 1 a verdict failed, 2 configuration
error.
"""

from __future__ import annotations

import json
import math
import os
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import __version__
from .covers import cover_result
from .diagnostics import (concentration_bound_check, delta_lambda_probe,
                          tilt_derivative, tilt_remainder)
from .errors import SubcoverError
from .experiments import (DEFAULT_TOLERANCES, ExperimentConfig,
                          run_experiment)
from .models import (GammaModel, StableModel, TruncatedStableModel,
                     drift_only, load_model, model_from_dict)
from .paths import SimConfig, dump_skeleton, sample_skeleton
from .renewal import clt_normalizers, estimate_renewal
from .reporting import (COVER_COLUMNS, DIAG_COLUMNS, RENEWAL_COLUMNS,
                        cover_row, renewal_row, save_rows_csv,
                        svg_line_plot, write_manifest, write_report_csv,
                        write_summary_json)

DEFAULT_OUT_ENV = "SUBCOVER_OUTDIR"


def _build_model(model, alpha, rate, shape, cut, drift):
    if model is None:
        raise SubcoverError("no model given (use --model or --config)")
    if "/" in model or model.endswith(".json"):
        return load_model(model)
    family = model.replace("-", "_")
    if family == "stable":
        return StableModel(alpha=alpha, drift=drift)
    if family == "gamma":
        return GammaModel(rate=rate, shape=shape, drift=drift)
    if family == "truncated_stable":
        if cut is None:
            raise SubcoverError("truncated-stable needs --cut")
        return TruncatedStableModel(alpha=alpha, cut=cut, drift=drift)
    if family in ("drift", "zero", "drift_only"):
        return drift_only(drift if drift > 0 else 1.0)
    raise SubcoverError(f"unknown model family {model!r}")


def _run_dir(out, name):
    root = Path(out or os.environ.get(DEFAULT_OUT_ENV, "subcover-runs"))
    stamp = time.strftime("%Y%m%d-%H%M%S", time.gmtime())
    base = root / f"{name}-{stamp}"
    run = base
    k = 1
    while run.exists():
        k += 1
        run = Path(f"{base}-{k}")
    (run / "plots").mkdir(parents=True)
    return run


def _parse_deltas(text):
    try:
        deltas = tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise SubcoverError(f"could not parse delta grid {text!r}")
    if not deltas:
        raise SubcoverError("empty delta grid")
    return deltas


def model_options(f):
    f = click.option("--drift", type=float, default=0.0, show_default=True,
                     help="Linear drift d >= 0.")(f)
    f = click.option("--cut", type=float, default=None,
                     help="Jump cutoff for truncated-stable.")(f)
    f = click.option("--shape", type=float, default=1.0, show_default=True,
                     help="Gamma shape (jump intensity scale).")(f)
    f = click.option("--rate", type=float, default=1.0, show_default=True,
                     help="Gamma rate (exponential decay of jumps).")(f)
    f = click.option("--alpha", type=float, default=0.5, show_default=True,
                     help="Stable index in (0,1).")(f)
    f = click.option("--model", default=None,
                     help="Family (stable, gamma, truncated-stable, drift) "
                          "or path to a model JSON file.")(f)
    return f


def run_options(f):
    f = click.option("--threads", type=int, default=1, show_default=True,
                     help="Worker threads; output is independent of it.")(f)
    f = click.option("--seed", type=int, default=None,
                     help="Stream seed (default 0, or the config's).")(f)
    f = click.option("--out", default=None,
                     help=f"Output root (default ${DEFAULT_OUT_ENV} or "
                          "./subcover-runs).")(f)
    f = click.option("--config", "config_path", default=None,
                     help="JSON config replacing model/grid flags; --seed, "
                          "--threads and --out still override.")(f)
    return f


@click.group()
@click.version_option(__version__)
def main():
    """Box-counting laboratory for subordinator ranges."""


def _load_config_file(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise SubcoverError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise SubcoverError(f"config file {path} is not valid JSON: {exc}")


def _experiment_config(kind, config_path, model, alpha, rate, shape, cut,
                       drift, t, deltas, n, seed, threads, eps,
                       defaults):
    if config_path:
        raw = _load_config_file(config_path)
        mdl = model_from_dict(raw["model"])
        return ExperimentConfig(
            model=mdl, kind=kind,
            deltas=tuple(raw.get("deltas", defaults["deltas"])),
            t=float(raw.get("t", 1.0)),
            n_paths=int(raw.get("n_paths", defaults["n"])),
            seed=seed if seed is not None else int(raw.get("seed", 0)),
            threads=threads, eps=raw.get("eps", "auto"),
            renewal_n=int(raw.get("renewal_n", 10_000)),
            subsequence_r=raw.get("subsequence_r"),
            tolerances=raw.get("tolerances"))
    mdl = _build_model(model, alpha, rate, shape, cut, drift)
    return ExperimentConfig(model=mdl, kind=kind,
                            deltas=_parse_deltas(deltas) if deltas
                            else defaults["deltas"],
                            t=t, n_paths=n if n else defaults["n"],
                            seed=seed or 0, threads=threads, eps=eps)


def _emit_experiment(report, cfg, run_dir, plot_spec):
    write_manifest({"command": report.kind, "version": __version__,
                    **cfg.to_dict()}, run_dir / "manifest")
    write_report_csv(report, run_dir / "report.csv")
    write_summary_json(report, run_dir / "summary.json")
    x = [math.log10(d) for d in cfg.deltas]
    for fname, (cols, target, ylabel) in plot_spec.items():
        series = [[row[c] for row in report.rows] for c in cols]
        svg_line_plot(run_dir / "plots" / fname, x, series, cols,
                      target=target, title=f"{report.kind}: {ylabel}",
                      ylabel=ylabel)
    for banner in report.banners:
        click.echo(f"[warn] {banner}")
    for row in report.rows:
        bits = " ".join(f"{c}={row[c]:.6g}" if isinstance(row[c], float)
                        else f"{c}={row[c]}" for c in report.columns)
        click.echo(bits)
    click.echo(f"verdict: {'PASS' if report.verdict else 'FAIL'} "
               f"({run_dir})")
    return 0 if report.verdict else 1


def _experiment_command(kind, plot_spec, defaults):
    @model_options
    @run_options
    @click.option("--eps", default="auto", show_default=True,
                  help="Jump cutoff, or 'auto'.")
    @click.option("--t", type=float, default=1.0, show_default=True)
    @click.option("--deltas", default=None,
                  help="Comma-separated decreasing box sizes.")
    @click.option("--n", type=int, default=None,
                  help=f"Paths per campaign (default {defaults['n']}).")
    @click.option("--renewal-n", type=int, default=None,
                  help="Samples for the renewal stage (clt-n, lln-n).")
    @click.option("--subsequence-r", type=float, default=None,
                  help="Geometric subsequence ratio for lln-l.")
    def cmd(model, alpha, rate, shape, cut, drift, t, deltas, n, seed,
            threads, eps, out, config_path, renewal_n, subsequence_r):
        try:
            cfg = _experiment_config(kind, config_path, model, alpha, rate,
                                     shape, cut, drift, t, deltas, n, seed,
                                     threads, eps, defaults)
            if renewal_n:
                cfg.renewal_n = renewal_n
            if subsequence_r:
                cfg.subsequence_r = subsequence_r
            run_dir = _run_dir(out, kind.replace("_", "-").lower())
            report = run_experiment(cfg)
        except SubcoverError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        sys.exit(_emit_experiment(report, cfg, run_dir, plot_spec))

    return cmd


main.command("lln-n")(_experiment_command(
    "lln_N", {"mean.svg": (["mean"], 1.0, "scaled count mean")},
    {"deltas": (1e-1, 1e-2, 1e-3, 1e-4), "n": 200}))

main.command("lln-l")(_experiment_command(
    "lln_L", {"mean.svg": (["mean"], 1.0, "scaled capped-count mean")},
    {"deltas": (1e-1, 1e-2, 1e-3, 1e-4), "n": 200}))

main.command("clt-l")(_experiment_command(
    "clt_L", {"ks.svg": (["ks", "threshold"], None, "KS distance")},
    {"deltas": (1e-1, 1e-2, 1e-3, 1e-4), "n": 2000}))

main.command("clt-n")(_experiment_command(
    "clt_N", {"ks.svg": (["ks", "threshold"], None, "KS distance")},
    {"deltas": (1e-1, 1e-2, 1e-3, 1e-4), "n": 2000}))

main.command("ratio")(_experiment_command(
    "ratio_NL", {"ratio.svg": (["mean_NL", "target"], None,
                               "count ratio N/L")},
    {"deltas": (1e-1, 1e-2, 1e-3, 1e-4, 1e-5), "n": 200}))

main.command("graph")(_experiment_command(
    "graph_identity", {"mismatches.svg": (["mesh_mismatches"], 0.0,
                                          "mesh identity mismatches")},
    {"deltas": (1e-1, 1e-2, 1e-3), "n": 200}))


@main.command()
@model_options
@run_options
@click.option("--t", type=float, default=1.0, show_default=True)
@click.option("--eps", default="auto", show_default=True)
@click.option("--delta-min", type=float, default=1e-4, show_default=True,
              help="Finest box size the skeletons must support.")
@click.option("--replicas", type=int, default=1, show_default=True)
def simulate(model, alpha, rate, shape, cut, drift, t, eps, delta_min,
             replicas, seed, threads, out, config_path):
    """Sample jump skeletons and dump them as CSV."""
    try:
        if config_path:
            raw = _load_config_file(config_path)
            mdl = model_from_dict(raw["model"])
        else:
            mdl = _build_model(model, alpha, rate, shape, cut, drift)
        run_dir = _run_dir(out, "simulate")
        cfg0 = SimConfig(t=t, eps=eps if eps != "auto" else "auto",
                         seed=seed or 0, delta_min=delta_min)
        skels = []
        for r in range(replicas):
            cfg = SimConfig(t=t, eps=cfg0.eps, seed=seed or 0,
                            replica_index=r, delta_min=delta_min)
            sk = sample_skeleton(mdl, cfg)
            dump_skeleton(sk, run_dir / f"skeleton-{r:04d}.csv")
            skels.append(sk)
        write_manifest({"command": "simulate", "version": __version__,
                        "model": mdl.to_dict(), "t": t, "eps": cfg0.eps,
                        "eps_resolved": skels[0].eps, "seed": seed or 0,
                        "replicas": replicas, "delta_min": delta_min},
                       run_dir / "manifest")
        write_manifest({"command": "simulate", "verdict": "PASS",
                        "replicas": replicas,
                        "events": [len(s) for s in skels]},
                       run_dir / "summary.json")
        click.echo(f"wrote {replicas} skeletons "
                   f"({sum(len(s) for s in skels)} events) to {run_dir}")
    except SubcoverError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    sys.exit(0)


@main.command()
@model_options
@run_options
@click.option("--t", type=float, default=1.0, show_default=True)
@click.option("--eps", default="auto", show_default=True)
@click.option("--deltas", default="1e-1,1e-2,1e-3", show_default=True)
@click.option("--replicas", type=int, default=10, show_default=True)
@click.option("--graph/--no-graph", default=True, show_default=True,
              help="Include the sequential graph cover (slower).")
def count(model, alpha, rate, shape, cut, drift, t, eps, deltas, replicas,
          graph, seed, threads, out, config_path):
    """Evaluate all counting schemes on sampled skeletons."""
    try:
        if config_path:
            raw = _load_config_file(config_path)
            mdl = model_from_dict(raw["model"])
        else:
            mdl = _build_model(model, alpha, rate, shape, cut, drift)
        grid = _parse_deltas(deltas)
        run_dir = _run_dir(out, "count")
        rows = []
        for r in range(replicas):
            cfg = SimConfig(t=t, eps=eps if eps != "auto" else "auto",
                            seed=seed or 0, replica_index=r,
                            delta_min=min(grid))
            sk = sample_skeleton(mdl, cfg)
            for d in sorted(grid, reverse=True):
                rows.append(cover_row(cover_result(sk, d, graph=graph)))
        save_rows_csv(COVER_COLUMNS, rows, run_dir / "report.csv")
        write_manifest({"command": "count", "version": __version__,
                        "model": mdl.to_dict(), "t": t, "eps": eps,
                        "deltas": list(grid), "replicas": replicas,
                        "graph": graph, "seed": seed or 0},
                       run_dir / "manifest")
        write_manifest({"command": "count", "verdict": "PASS",
                        "rows": len(rows)}, run_dir / "summary.json")
        click.echo(f"wrote {len(rows)} cover rows to {run_dir}")
    except SubcoverError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    sys.exit(0)


@main.command("renewal")
@model_options
@run_options
@click.option("--deltas", default="1e-2,1e-3,1e-4", show_default=True)
@click.option("--n", type=int, default=10_000, show_default=True)
def renewal_cmd(model, alpha, rate, shape, cut, drift, deltas, n, seed,
                threads, out, config_path):
    """Estimate the renewal function and CLT normalizers."""
    try:
        if config_path:
            raw = _load_config_file(config_path)
            mdl = model_from_dict(raw["model"])
        else:
            mdl = _build_model(model, alpha, rate, shape, cut, drift)
        grid = _parse_deltas(deltas)
        run_dir = _run_dir(out, "renewal")
        rows = []
        for j, d in enumerate(grid):
            est = estimate_renewal(mdl, d, n, seed=(seed or 0) + 101 * j)
            rows.append(renewal_row(est, clt_normalizers(est)))
            click.echo(f"delta={d:g} U_hat={est.U_hat:.6g} "
                       f"se={est.se_U:.3g}"
                       + (f" closed={est.closed_form_U:.6g}"
                          if est.closed_form_U else ""))
        save_rows_csv(RENEWAL_COLUMNS, rows, run_dir / "report.csv")
        write_manifest({"command": "renewal", "version": __version__,
                        "model": mdl.to_dict(), "deltas": list(grid),
                        "n": n, "seed": seed or 0}, run_dir / "manifest")
        write_manifest({"command": "renewal", "verdict": "PASS",
                        "rows": rows}, run_dir / "summary.json")
        click.echo(f"report in {run_dir}")
    except SubcoverError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    sys.exit(0)


@main.command()
@model_options
@run_options
@click.option("--deltas", default="1e-1,1e-2,1e-3", show_default=True)
@click.option("--alpha-param", type=float, default=1.0, show_default=True,
              help="Tilt target parameter: t = (1+alpha_param) U(delta).")
@click.option("--c-const", type=float, default=1.0, show_default=True,
              help="Universal constant knob in the concentration bound.")
@click.option("--mc-n", type=int, default=10_000, show_default=True)
def diagnose(model, alpha, rate, shape, cut, drift, deltas, alpha_param,
             c_const, mc_n, seed, threads, out, config_path):
    """Tilt diagnostics and the concentration-bound consistency check."""
    try:
        if config_path:
            raw = _load_config_file(config_path)
            mdl = model_from_dict(raw["model"])
        else:
            mdl = _build_model(model, alpha, rate, shape, cut, drift)
        grid = _parse_deltas(deltas)
        run_dir = _run_dir(out, "diagnose")
        probe = delta_lambda_probe(mdl, alpha_param, grid, seed=seed or 0)
        rows = []
        ok = probe.bounded
        for row in probe.rows:
            rec = {"delta": row.delta, "u_or_lambda": row.lam,
                   "delta_lambda": row.delta_lambda, "tR": row.tR}
            if row.in_bracket:
                rec["g"] = tilt_derivative(mdl, row.delta, row.lam)
                rec["R"] = tilt_remainder(mdl, row.delta, row.lam)
                chk = concentration_bound_check(
                    mdl, row.delta, row.t_used, eps_jp=1.0,
                    c_const=c_const, n=mc_n, seed=(seed or 0) + 7)
                rec["bound"] = chk.bound
                rec["empirical_p"] = chk.empirical_p
                ok = ok and chk.consistent
            rows.append(rec)
            click.echo(" ".join(f"{k}={v:.6g}" if isinstance(v, float)
                                else f"{k}={v}" for k, v in rec.items()))
        save_rows_csv(DIAG_COLUMNS, rows, run_dir / "report.csv")
        write_manifest({"command": "diagnose", "version": __version__,
                        "model": mdl.to_dict(), "deltas": list(grid),
                        "alpha_param": alpha_param, "c_const": c_const,
                        "mc_n": mc_n, "seed": seed or 0},
                       run_dir / "manifest")
        write_manifest({"command": "diagnose",
                        "verdict": "PASS" if ok else "FAIL",
                        "slope": probe.slope, "slope_se": probe.slope_se},
                       run_dir / "summary.json")
        click.echo(f"verdict: {'PASS' if ok else 'FAIL'} ({run_dir})")
    except SubcoverError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    sys.exit(0 if ok else 1)


@main.command()
@model_options
@run_options
@click.option("--deltas", default=None,
              help="Decreasing grid; default 2^-5 .. 2^-20.")
def condition2(model, alpha, rate, shape, cut, drift, deltas, seed, threads,
               out, config_path):
    """Doubling-ratio probe of the integrated tail."""
    try:
        if config_path:
            raw = _load_config_file(config_path)
            mdl = model_from_dict(raw["model"])
        else:
            mdl = _build_model(model, alpha, rate, shape, cut, drift)
        grid = _parse_deltas(deltas) if deltas else \
            tuple(2.0 ** -k for k in range(5, 21))
        run_dir = _run_dir(out, "condition2")
        res = mdl.check_condition_2(grid)
        rows = [{"delta": d, "ratio": r}
                for d, r in zip(res.deltas, res.ratios)]
        save_rows_csv(["delta", "ratio"], rows, run_dir / "report.csv")
        write_manifest({"command": "condition2", "version": __version__,
                        "model": mdl.to_dict(), "deltas": list(grid),
                        "seed": seed or 0}, run_dir / "manifest")
        write_manifest({"command": "condition2",
                        "verdict": "PASS" if res.satisfied else
                        ("N/A" if not res.applicable else "FAIL"),
                        "liminf_estimate": res.liminf_estimate,
                        "applicable": res.applicable},
                       run_dir / "summary.json")
        if res.applicable:
            svg_line_plot(run_dir / "plots" / "ratio.svg",
                          [math.log10(d) for d in res.deltas],
                          [res.ratios], ["ratio"], target=1.0,
                          title="integrated-tail doubling ratio",
                          ylabel="I(2d)/I(d)")
        for row in rows:
            click.echo(f"delta={row['delta']:.6g} ratio={row['ratio']:.6f}")
        if not res.applicable:
            click.echo("condition vacuous / not applicable (zero measure)")
            sys.exit(0)
        click.echo(f"liminf estimate: {res.liminf_estimate:.6f} -> "
                   f"{'PASS' if res.satisfied else 'FAIL'}")
    except SubcoverError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    sys.exit(0 if res.satisfied else 1)


if __name__ == "__main__":
    main()
