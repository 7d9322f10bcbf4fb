"""Command-line interface: generate / fit / eval / bench.

Progress goes to standard error; every machine-readable artifact is a file,
never stdout.  Each artifact embeds the run configuration and the version
string, so any output can be traced back to the exact invocation.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from pathlib import Path

import numpy as np

from . import data_io
from .errors import (ConfigError, DimensionError, NumericError, ParseError,
                     ShapeError)
from .figures import render_bench_figures
from .graphs import gen_er_dag, gen_sf_dag
from .optimizer import HyperParams, fit
from .postproc import metrics, postprocess, project_multigranularity
from .sem import decompose_macro, sample_gp_sem

_METRIC_FIELDS = ("precision", "recall", "f1", "shd", "runtime_seconds")


def _progress(msg):
    print(msg, file=sys.stderr, flush=True)


def _run_config(args, command):
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    return {"command": command, "version": data_io.version_string(), **cfg}


def _replicate_seeds(seed, rep):
    """Independent integer seeds (graph, data, macro) for one replicate."""
    rng = np.random.default_rng([seed, rep])
    return tuple(int(s) for s in rng.integers(2 ** 31, size=3))


def _make_dataset(graph_kind, d, degree, sem_kind, n, macros, micro_per_macro,
                  noise_scale, seed, rep):
    graph_seed, data_seed, macro_seed = _replicate_seeds(seed, rep)
    gen = {"er": gen_er_dag, "sf": gen_sf_dag}[graph_kind]
    g = gen(d, degree, seed=graph_seed)
    ds = sample_gp_sem(g, n, additive=(sem_kind == "gp-add"),
                       noise_scale=noise_scale, seed=data_seed)
    if macros > 0:
        ds = decompose_macro(ds, macros, micro_per_macro=micro_per_macro,
                             seed=macro_seed)
    return ds


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------

def cmd_generate(args):
    if args.reps < 0:
        raise ConfigError("--reps must be non-negative")
    if args.reps == 0:
        _progress("generate: 0 replicates requested, nothing to write")
        return 0
    out = Path(args.out)
    cfg = _run_config(args, "generate")
    for r in range(args.reps):
        ds = _make_dataset(args.graph, args.d, args.degree, args.sem, args.n,
                           args.macros, args.micro_per_macro,
                           args.noise_scale, args.seed, r)
        p = data_io.write_dataset(ds, out / f"rep{r:03d}.csv",
                                  extra_meta={"run_config": cfg})
        _progress(f"generate: wrote {p} ({ds.n} x {ds.d})")
    data_io.write_json(cfg, out / "config.json")
    return 0


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

def _hp_from_args(args):
    return HyperParams(
        alpha1=args.alpha1, alpha2=args.alpha2, eta=args.eta, rho=args.rho,
        mu0=args.mu0, gamma0=args.gamma0, h_tolerance=args.h_tol,
        mu_max=args.mu_max, epsilon=args.epsilon, max_outer=args.max_outer,
        inner_max_evals=args.inner_max_evals, constraint=args.constraint,
        q=args.q, m1=args.m1, m2=args.m2, activation=args.activation,
        support_threshold=args.support_threshold, seed=args.seed)


def _fit_result_dict(res, cfg):
    return {
        "version": data_io.version_string(),
        "run_config": cfg,
        "hyperparams": res.hp.to_dict(),
        "n": res.n, "d": res.d,
        "converged": res.converged,
        "reason": res.reason,
        "h_final": res.h_final,
        "objective_final": res.objective_final,
        "runtime_seconds": res.runtime_seconds,
        "trace": res.trace,
        "warnings": res.warnings,
        "c": res.c.tolist(),
        "s": res.s.tolist(),
        "a": res.a.tolist(),
        "macro_supports": res.macro_supports.astype(int).tolist(),
        "centering": {"mean": res.x_mean.tolist()},
    }


def _checkpoint_dict(res):
    return {
        "version": data_io.version_string(),
        "seed": res.hp.seed,
        "hyperparams": res.hp.to_dict(),
        "shapes": {k: list(v.shape) for k, v in res.params.arrays.items()},
        "params": {k: v.tolist() for k, v in res.params.arrays.items()},
    }


def cmd_fit(args):
    ds = data_io.read_dataset(args.data)
    hp = _hp_from_args(args)
    cfg = _run_config(args, "fit")
    out = Path(args.out)
    _progress(f"fit: {ds.n} samples x {ds.d} variables, "
              f"constraint={hp.constraint}, seed={hp.seed}")
    res = fit(ds.X, hp)
    _progress(f"fit: reason={res.reason} h={res.h_final:.3e} "
              f"outer_iterations={len(res.trace)} "
              f"runtime={res.runtime_seconds:.1f}s")
    for w in res.warnings:
        _progress(f"fit: warning: {w}")
    g_micro = postprocess(res.c, hp.epsilon)
    g_mg = postprocess(res.s, hp.epsilon, macro_supports=res.macro_supports)
    data_io.write_json(cfg, out / "config.json")
    data_io.write_json(_fit_result_dict(res, cfg), out / "fit_result.json")
    data_io.write_json(_checkpoint_dict(res), out / "checkpoint.json")
    data_io.write_graph(g_micro, out / "graph_micro.csv", config=cfg)
    data_io.write_graph(g_mg, out / "graph_mg.csv", config=cfg)
    _progress(f"fit: wrote artifacts to {out}")
    return 0


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def cmd_eval(args):
    est = data_io.read_graph(args.est)
    truth = data_io.read_truth(args.truth)
    if args.project_macros:
        if est.macros:
            est = project_multigranularity(est)
        if truth.macros:
            truth = project_multigranularity(truth)
    runtime = 0.0
    if args.fit_result:
        runtime = float(data_io.read_json(args.fit_result)["runtime_seconds"])
    rep = metrics(est, truth, runtime_seconds=runtime)
    cfg = _run_config(args, "eval")
    out = Path(args.out)
    data_io.write_json({"version": data_io.version_string(),
                        "run_config": cfg, **rep.to_dict()},
                       out / "metrics.json")
    _progress(f"eval: precision={rep.precision:.4f} recall={rep.recall:.4f} "
              f"f1={rep.f1:.4f} shd={rep.shd}")
    return 0


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------

def _bench_replicate(task):
    """One grid cell replicate: generate, fit, postprocess, score."""
    row = {"graph": task["graph"], "d": task["d"],
           "constraint": task["constraint"], "seed": task["seed"],
           "status": "ok", "error": ""}
    try:
        ds = _make_dataset(task["graph"], task["d"], task["degree"],
                           task["sem"], task["n"], task["macros"],
                           task["micro_per_macro"], task["noise_scale"],
                           task["seed"], rep=0)
        hp = HyperParams(constraint=task["constraint"], seed=task["seed"],
                         **task["hp_over"])
        res = fit(ds.X, hp)
        est = postprocess(res.c, hp.epsilon)
        truth = ds.truth
        if truth.macros:
            truth = project_multigranularity(truth)
        rep = metrics(est, truth, runtime_seconds=res.runtime_seconds)
        row.update(rep.to_dict())
        row["fit_reason"] = res.reason
        row["converged"] = res.converged
    except Exception as exc:  # noqa: BLE001 — cell failures recorded, run continues
        row["status"] = "failed"
        row["error"] = f"{type(exc).__name__}: {exc}"
        for f in _METRIC_FIELDS:
            row[f] = ""
        row["fit_reason"] = ""
        row["converged"] = ""
    return row


_DETAIL_COLUMNS = ("graph", "d", "constraint", "seed", "status", "error",
                   "precision", "recall", "f1", "shd", "runtime_seconds",
                   "fit_reason", "converged")


def _summarize_cell(graph_kind, d, constraint, rows):
    ok = [r for r in rows if r["status"] == "ok"]
    cell = {"graph": graph_kind, "d": d, "constraint": constraint,
            "n_ok": len(ok), "n_failed": len(rows) - len(ok)}
    for f in _METRIC_FIELDS:
        if ok:
            vals = np.array([float(r[f]) for r in ok])
            cell[f"{f}_mean"] = float(vals.mean())
            cell[f"{f}_std"] = float(vals.std())
        else:
            cell[f"{f}_mean"] = ""
            cell[f"{f}_std"] = ""
    return cell


def _pool_size(args):
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("MGCSL_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"MGCSL_THREADS must be an integer, got {env!r}") from exc
    return os.cpu_count() or 1


def _split_list(raw, conv, flag):
    out = []
    for part in str(raw).split(","):
        part = part.strip()
        if not part:
            continue
        try:
            out.append(conv(part))
        except ValueError as exc:
            raise ConfigError(f"bad value {part!r} in {flag}") from exc
    return out


def cmd_bench(args):
    graph_kinds = _split_list(args.graphs, str, "--graphs")
    dims = _split_list(args.dims, int, "--dims")
    constraints = _split_list(args.constraints, str, "--constraints")
    for gk in graph_kinds:
        if gk not in ("er", "sf"):
            raise ConfigError(f"unknown graph kind {gk!r} in --graphs")
    for c in constraints:
        if c not in ("schur", "exp"):
            raise ConfigError(f"unknown constraint {c!r} in --constraints")
    if args.seeds < 0:
        raise ConfigError("--seeds must be non-negative")
    hp_over = {"alpha1": args.alpha1, "alpha2": args.alpha2,
               "epsilon": args.epsilon, "max_outer": args.max_outer,
               "inner_max_evals": args.inner_max_evals}
    tasks = [{"graph": gk, "d": d, "constraint": c, "seed": args.seed_base + i,
              "degree": args.degree, "sem": args.sem, "n": args.n,
              "macros": args.macros, "micro_per_macro": args.micro_per_macro,
              "noise_scale": args.noise_scale, "hp_over": hp_over}
             for gk in graph_kinds for d in dims for c in constraints
             for i in range(args.seeds)]
    out = Path(args.out)
    cfg = _run_config(args, "bench")
    threads = _pool_size(args)
    _progress(f"bench: {len(tasks)} replicates over "
              f"{len(graph_kinds) * len(dims) * len(constraints)} cells, "
              f"pool size {threads}")

    t0 = time.perf_counter()
    rows = []
    if not tasks:
        pass
    elif threads == 1 or len(tasks) == 1:
        for k, task in enumerate(tasks):
            row = _bench_replicate(task)
            rows.append(row)
            _progress(f"bench: [{k + 1}/{len(tasks)}] {row['graph']}-d{row['d']} "
                      f"{row['constraint']} seed={row['seed']}: {row['status']}")
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futs = {pool.submit(_bench_replicate, t): t for t in tasks}
            for k, fut in enumerate(as_completed(futs)):
                row = fut.result()
                rows.append(row)
                _progress(f"bench: [{k + 1}/{len(tasks)}] {row['graph']}-"
                          f"d{row['d']} {row['constraint']} "
                          f"seed={row['seed']}: {row['status']}")
        rows.sort(key=lambda r: (r["graph"], r["d"], r["constraint"], r["seed"]))

    summary = []
    for gk in graph_kinds:
        for d in dims:
            for c in constraints:
                cell_rows = [r for r in rows
                             if (r["graph"], r["d"], r["constraint"]) == (gk, d, c)]
                if cell_rows:
                    summary.append(_summarize_cell(gk, d, c, cell_rows))
    # Runtime ratio of each cell against the schur cell on the same graph/d.
    base = {(s["graph"], s["d"]): s["runtime_seconds_mean"] for s in summary
            if s["constraint"] == "schur" and s["runtime_seconds_mean"] != ""}
    for s in summary:
        b = base.get((s["graph"], s["d"]))
        if b and s["runtime_seconds_mean"] != "":
            s["runtime_ratio_vs_schur"] = float(s["runtime_seconds_mean"] / b)
        else:
            s["runtime_ratio_vs_schur"] = ""

    out.mkdir(parents=True, exist_ok=True)
    with open(out / "detail.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=_DETAIL_COLUMNS)
        w.writeheader()
        w.writerows(rows)
    sum_cols = list(summary[0].keys()) if summary else \
        ["graph", "d", "constraint", "n_ok", "n_failed"]
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=sum_cols)
        w.writeheader()
        w.writerows(summary)
    data_io.write_json({"version": data_io.version_string(), "run_config": cfg,
                        "cells": summary,
                        "total_seconds": time.perf_counter() - t0},
                       out / "summary.json")
    data_io.write_json(cfg, out / "config.json")
    figs = render_bench_figures(summary, out / "figures")
    n_failed = sum(1 for r in rows if r["status"] != "ok")
    _progress(f"bench: wrote {len(rows)} detail rows, {len(summary)} summary "
              f"cells, {len(figs)} figures to {out}"
              + (f" ({n_failed} replicate(s) failed)" if n_failed else ""))
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(
        prog="mgcsl",
        description="Multi-granularity causal structure learning: synthetic "
                    "benchmarks, model fitting, scoring, and sweep harness.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write synthetic dataset replicates")
    g.add_argument("--graph", choices=("er", "sf"), required=True)
    g.add_argument("--d", type=int, required=True, help="number of variables")
    g.add_argument("--degree", type=float, required=True,
                   help="expected (er) or per-node (sf) edge degree")
    g.add_argument("--sem", choices=("gp", "gp-add"), default="gp")
    g.add_argument("--n", type=int, required=True, help="samples per replicate")
    g.add_argument("--macros", type=int, default=0,
                   help="number of columns to expand into micro blocks")
    g.add_argument("--micro-per-macro", type=int, default=8)
    g.add_argument("--noise-scale", type=float, default=1.0)
    g.add_argument("--reps", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    f = sub.add_parser("fit", help="fit the model to one dataset")
    f.add_argument("--data", required=True)
    f.add_argument("--alpha1", type=float, default=0.1)
    f.add_argument("--alpha2", type=float, default=0.01)
    f.add_argument("--eta", type=float, default=300.0)
    f.add_argument("--rho", type=float, default=0.25)
    f.add_argument("--mu0", type=float, default=1e-3)
    f.add_argument("--gamma0", type=float, default=0.0)
    f.add_argument("--h-tol", type=float, default=0.1)
    f.add_argument("--mu-max", type=float, default=1e16)
    f.add_argument("--epsilon", type=float, default=0.2)
    f.add_argument("--max-outer", type=int, default=8)
    f.add_argument("--inner-max-evals", type=int, default=1200)
    f.add_argument("--constraint", choices=("schur", "exp"), default="schur")
    f.add_argument("--q", type=int, default=5)
    f.add_argument("--m1", type=int, default=None)
    f.add_argument("--m2", type=int, default=10)
    f.add_argument("--activation", choices=("sigmoid", "tanh"),
                   default="sigmoid")
    f.add_argument("--support-threshold", type=float, default=0.01)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("eval", help="score an estimated graph against truth")
    e.add_argument("--est", required=True, help="estimated graph CSV")
    e.add_argument("--truth", required=True, help="ground-truth JSON")
    e.add_argument("--project-macros", action="store_true",
                   help="expand macro edges to member edges before scoring")
    e.add_argument("--fit-result", default=None,
                   help="fit_result.json to source runtime_seconds from")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("bench", help="generate+fit+eval over a grid")
    b.add_argument("--graphs", default="er", help="comma list of er,sf")
    b.add_argument("--dims", default="20", help="comma list of node counts")
    b.add_argument("--constraints", default="schur",
                   help="comma list of schur,exp")
    b.add_argument("--seeds", type=int, default=3,
                   help="replicates per cell (seeds seed_base..)")
    b.add_argument("--seed-base", type=int, default=0)
    b.add_argument("--degree", type=float, default=2.0)
    b.add_argument("--sem", choices=("gp", "gp-add"), default="gp")
    b.add_argument("--n", type=int, default=300)
    b.add_argument("--macros", type=int, default=0)
    b.add_argument("--micro-per-macro", type=int, default=8)
    b.add_argument("--noise-scale", type=float, default=1.0)
    b.add_argument("--alpha1", type=float, default=0.1)
    b.add_argument("--alpha2", type=float, default=0.01)
    b.add_argument("--epsilon", type=float, default=0.2)
    b.add_argument("--max-outer", type=int, default=8)
    b.add_argument("--inner-max-evals", type=int, default=1200)
    b.add_argument("--threads", type=int, default=None,
                   help="worker pool size (default: MGCSL_THREADS or cores)")
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DimensionError, ShapeError, NumericError,
            ParseError, OSError) as exc:
        _progress(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
