"""Command-line entry point: ``privclust <command> [--config PATH] [--seed N] [--out DIR] [--workers N]``.

Commands:
    simulate      five-step protocol over the (epsilon, fraction, seed) grid
    select        server recommendation for a noisy CSV with its sidecar
    attack        membership-inference TPR per epsilon
    gapviz        original vs. noisy coordinates of two clusters, per epsilon
    ingest-check  parse a CSV and print its schema

Exit codes: 0 success, 1 runtime failure, 2 configuration error.

Features are clustered in their original units unless the config sets
``experiment.standardize: true``; with it, the server z-scores the noisy
sample and the owners z-score their pooled clean rows. Output goes under
``--out``, else ``$PRIVCLUST_OUT``, else ``./runs``.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, config
from . import data as dm
from .errors import ConfigError, ParseError, PrivclustError
from .ldp import discretize, perturb_dataset, read_noisy, write_noisy
from .metrics import silhouette
from .mia import attack_power, count_inversions
from .protocol import derive_seed, run_protocol
from .selection import server_recommend

log = logging.getLogger("privclust")

ENV_OUT = "PRIVCLUST_OUT"
DEFAULT_OUT = "runs"
DISPLAY = {"kmeans": "K-Means", "hierarchical": "HC", "gmm": "GMM", "dbscan": "DBSCAN"}

RESULT_COLUMNS = [
    "dataset", "algorithm", "recommended", "shared", "epsilon", "seed", "k_or_eps",
    "ARI", "Silhouette", "CH", "Homogeneity", "Completeness", "Accuracy_raw", "Accuracy_mapped",
    "server_silhouette", "server_ch",
]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "nan" if math.isnan(v) else format(v, ".10g")
    return str(v)


def _write_rows(path: Path, header, rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def run_dir(root: Path, command: str, cfg: config.ExperimentConfig) -> Path:
    """Fresh directory named by command, config hash and seeds; never reuses an existing one."""
    seeds = cfg.seeds[0] if len(cfg.seeds) == 1 else "grid"
    base = root / f"{command}-{cfg.digest()}-seed{seeds}"
    path, i = base, 1
    while path.exists():
        i += 1
        path = base.with_name(f"{base.name}.{i}")
    path.mkdir(parents=True)
    return path


def _write_meta(path: Path, command: str, cfg: config.ExperimentConfig, extra: dict | None = None) -> None:
    meta = {
        "command": command,
        "version": __version__,
        "config_hash": cfg.digest(),
        "config": cfg.as_dict(),
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        **(extra or {}),
    }
    (path / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True, default=list) + "\n", encoding="utf-8")


# --------------------------------------------------------------------------- simulate

def _simulate_one(cfg: config.ExperimentConfig, eps: float, f: float, seed: int):
    ds = cfg.dataset.load()
    owners = dm.partition(ds, cfg.shares, seed=derive_seed(seed, 10))
    report = run_protocol(owners, eps, f, cfg.protocol, seed)
    rec = report.recommendation
    scored = {sc.candidate: sc for sc in rec.scored}
    rows = []
    for cand, m in report.candidate_metrics:
        sc = scored[cand]
        vals = [math.nan] * 7 if m is None else [m.ari, m.silhouette, m.ch, m.homogeneity, m.completeness,
                                                   m.accuracy_raw, m.accuracy_mapped]
        rows.append([
            ds.name, DISPLAY[cand.kind], int(cand == rec.best_algorithm), f, eps, seed, cand.describe(),
            *vals,
            math.nan if sc.silhouette_score is None else sc.silhouette_score,
            math.nan if sc.ch_index is None else sc.ch_index,
        ])
    return rows, report.to_record(), report.server_input


def cmd_simulate(args, cfg: config.ExperimentConfig) -> int:
    grid = [(e, f, s) for e in cfg.epsilons for f in cfg.fractions for s in cfg.seeds]
    out = run_dir(args.out_root, "simulate", cfg)
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(_simulate_one, [cfg] * len(grid), *zip(*grid)))
    else:
        results = [_simulate_one(cfg, *g) for g in grid]
    (out / "runs").mkdir()
    (out / "shares").mkdir()
    all_rows = []
    for (eps, f, seed), (rows, record, shared) in zip(grid, results):
        tag = f"eps{eps:g}_f{f:g}_seed{seed}"
        (out / "runs" / f"{tag}.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n",
                                                   encoding="utf-8")
        write_noisy(shared, out / "shares" / f"{tag}.csv")
        all_rows.extend(rows)
    _write_rows(out / "results.csv", RESULT_COLUMNS, all_rows)
    _write_meta(out, "simulate", cfg, {"runs": len(grid)})
    chosen = [r for r in all_rows if r[2] == 1]
    print(f"{len(grid)} runs -> {out}")
    for r in chosen:
        print(f"  eps={r[4]:g} f={r[3]:g} seed={r[5]}: {r[1]} ({r[6]}) ARI={_fmt(r[7])}")
    return 0


# --------------------------------------------------------------------------- select

def cmd_select(args, cfg: config.ExperimentConfig) -> int:
    if not args.noisy:
        raise ConfigError("select needs --noisy PATH")
    try:
        noisy = read_noisy(args.noisy)
    except ParseError as exc:
        if "sidecar" in str(exc):
            raise ConfigError(str(exc)) from None
        raise
    rec = server_recommend(noisy, cfg.selection, seed=cfg.seeds[0])
    out = run_dir(args.out_root, "select", cfg)
    (out / "recommendation.json").write_text(json.dumps(rec.to_record(), indent=2, sort_keys=True) + "\n",
                                             encoding="utf-8")
    _write_meta(out, "select", cfg, {"noisy": str(args.noisy)})
    print(f"recommended: {DISPLAY[rec.best_algorithm.kind]} ({rec.best_algorithm.describe()})")
    print(f"max silhouette {rec.max_silhouette:.4f}, threshold {rec.silhouette_threshold:.4f}, "
          f"CH {rec.best_ch_index:.2f}")
    for sc in rec.scored:
        sil = "-" if sc.silhouette_score is None else f"{sc.silhouette_score:.4f}"
        ch = "-" if sc.ch_index is None else f"{sc.ch_index:.2f}"
        print(f"  {DISPLAY[sc.candidate.kind]:8s} {sc.candidate.describe():28s} silhouette {sil:>8s}  CH {ch}")
    print(f"-> {out / 'recommendation.json'}")
    return 0


# --------------------------------------------------------------------------- attack

def cmd_attack(args, cfg: config.ExperimentConfig) -> int:
    at = cfg.attack
    if cfg.dataset.source == "blobs":
        def factory(seed):
            return cfg.dataset.load(seed=derive_seed(seed, 600))
    else:
        fixed = cfg.dataset.load()

        def factory(seed):
            return fixed
    curve = attack_power(factory, at.epsilons, at.case_size, at.control_size, at.target_fpr,
                         cfg.seeds, cfg.bins, at.null)
    out = run_dir(args.out_root, "attack", cfg)
    curve.write_csv(out / "attack.csv")
    tpr = curve.tpr
    inv, drop = count_inversions(list(tpr))
    trend = "non-decreasing" if inv == 0 else f"{inv} inversion(s), largest drop {drop:.4f}"
    summary = (f"epsilons: {', '.join(f'{e:g}' for e in curve.epsilons)}\n"
               f"TPR at FPR {at.target_fpr:g}: {', '.join(f'{t:.4f}' for t in tpr)}\n"
               f"trend: {trend}\nmin TPR {tpr.min():.4f}, max TPR {tpr.max():.4f}\n")
    (out / "summary.txt").write_text(summary, encoding="utf-8")
    _write_meta(out, "attack", cfg)
    print(summary, end="")
    print(f"-> {out / 'attack.csv'}")
    return 0


# --------------------------------------------------------------------------- gapviz

def gap_fixture(ds: dm.Dataset, clusters, dims) -> dm.Dataset:
    """Rows of two ground-truth clusters, projected onto two columns."""
    if ds.labels is None:
        raise ConfigError("gapviz: dataset has no labels")
    present = list(dict.fromkeys(ds.labels.tolist()))
    chosen = list(clusters) if clusters else present[:2]
    if len(set(chosen)) < 2 or any(c not in present for c in chosen):
        raise ConfigError(f"gapviz: need two clusters present in the data, got {chosen} of {present}")
    rows = np.flatnonzero(np.isin(ds.labels, chosen))
    sub = ds.take(rows)
    schema = tuple(sub.schema[j] for j in dims)
    return dm.Dataset(schema, sub.rows[:, list(dims)], ids=sub.ids, labels=sub.labels, name=ds.name)


def cmd_gapviz(args, cfg: config.ExperimentConfig) -> int:
    gv = cfg.gapviz
    ds = cfg.dataset.load()
    if max(gv.dims) >= ds.d:
        raise ConfigError(f"gapviz.dims: dataset has only {ds.d} columns")
    fix = gap_fixture(ds, gv.clusters, gv.dims)
    disc = discretize(fix, cfg.bins)
    widths = [f.bin_edges[1] - f.bin_edges[0] for f in disc.schema]
    seed = cfg.seeds[0]
    out = run_dir(args.out_root, "gapviz", cfg)
    summary = []
    for eps in gv.epsilons:
        noisy = perturb_dataset(disc, eps, derive_seed(seed, 700)).decoded()
        rows = [[int(fix.ids[i]), fix.rows[i, 0], fix.rows[i, 1], noisy[i, 0], noisy[i, 1], fix.labels[i]]
                for i in range(fix.n)]
        _write_rows(out / f"gap_eps{eps:g}.csv", ["id", "x_orig", "y_orig", "x_noisy", "y_noisy", "cluster"], rows)
        disp = float(np.mean(np.linalg.norm(noisy - fix.rows, axis=1)))
        summary.append([eps, silhouette(noisy, fix.labels), disp, max(widths)])
    _write_rows(out / "gap_summary.csv", ["epsilon", "silhouette_noisy", "mean_displacement", "bin_width"], summary)
    _write_meta(out, "gapviz", cfg)
    for eps, sil, disp, _ in summary:
        print(f"eps={eps:g}: silhouette under original labels {sil:.3f}, mean displacement {disp:.3f}")
    print(f"-> {out}")
    return 0


# --------------------------------------------------------------------------- ingest-check

def cmd_ingest_check(args, cfg: config.ExperimentConfig) -> int:
    ds_cfg = cfg.dataset
    path = args.csv or ds_cfg.path
    if not path:
        raise ConfigError("ingest-check needs --csv PATH or dataset.path")
    ds = dm.ingest_csv(path, ds_cfg.hints, label_column=ds_cfg.label_column, id_column=ds_cfg.id_column)
    print(f"{path}: {ds.n} rows, {ds.d} features")
    for f in ds.schema:
        extra = f"m={f.m} {list(f.categories)}" if f.kind == dm.CATEGORICAL else ""
        print(f"  {f.name:24s} {f.kind:12s} {extra}")
    if ds.labels is not None:
        print(f"labels: {len(np.unique(ds.labels))} classes")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "select": cmd_select,
    "attack": cmd_attack,
    "gapviz": cmd_gapviz,
    "ingest-check": cmd_ingest_check,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML experiment config")
    common.add_argument("--seed", type=int, help="single seed, overrides experiment.seeds")
    common.add_argument("--out", type=Path, help=f"output root (default ${ENV_OUT} or ./{DEFAULT_OUT})")
    common.add_argument("--workers", type=int, help="worker processes for grid runs")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="privclust", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="run the protocol over the experiment grid")
    p = sub.add_parser("select", parents=[common], help="server recommendation for a noisy CSV")
    p.add_argument("--noisy", type=Path, help="noisy CSV (sidecar <file>.meta.json next to it)")
    sub.add_parser("attack", parents=[common], help="membership-inference curve")
    sub.add_parser("gapviz", parents=[common], help="original vs noisy points of two clusters")
    p = sub.add_parser("ingest-check", parents=[common], help="parse a CSV and print its schema")
    p.add_argument("--csv", type=Path)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args.out_root = Path(args.out or os.environ.get(ENV_OUT) or DEFAULT_OUT)
    try:
        cfg = config.load(args.config) if args.config else config.ExperimentConfig()
        if args.seed is not None:
            cfg = replace(cfg, seeds=(args.seed,))
        if args.workers is not None:
            cfg = replace(cfg, workers=args.workers)
        config.validate(cfg)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except PrivclustError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
