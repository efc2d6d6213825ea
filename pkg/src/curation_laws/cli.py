"""Batch front end: config-driven sweeps, comparisons, and reports.

Usage:
    curation-laws theory|simulate|compare|collapse|lens|probe
        --config FILE [--seed N] [--trials N] [--out FILE] [--tolerance X]

The config file is a single JSON document with keys ``task`` ("classification"
or "regression"), ``axes`` (named value lists swept as a Cartesian product),
``fixed`` (remaining scalars), ``trials``, ``seed``, ``output``. Command-line
flags override the file. Output is CSV (default) or JSON-lines chosen by the
output extension, with the effective merged config echoed as a leading
``#``-comment line. Exit codes: 0 success, 2 config error, 3 tolerance
exceeded (compare), 4 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence

from .curation import (
    CurationMode,
    GeometrySpec,
    constants as curation_constants,
    gamma_bounds,
    make_qpu,
    strategy_from_spec,
)
from .laws import (
    RegressionGeometry,
    classification_error,
    regression_error,
)
from .simulator import (
    CollapseConfig,
    EmptyKeptSetError,
    ExperimentConfig,
    collapse_loop,
    margin_probe,
    resolvent_probe,
    run_trials,
)

__all__ = ["main"]

#: relative comparison switches to absolute below this theory magnitude
ABS_COMPARISON_FLOOR = 1e-2

MAX_GRID_POINTS = 100_000

AXIS_NAMES = ("n", "p", "strategy", "rho", "rho_g", "rho_star", "lambda",
              "sigma", "mode", "u")

COMPARE_COLUMNS = ["n", "d", "phi", "mode", "strategy", "p_keep", "u", "rho",
                   "rho_g", "rho_star", "lambda", "sigma", "theory",
                   "empirical_mean", "empirical_se", "rel_err",
                   "skipped_trials"]

_POINT_COLUMNS = ["n", "d", "phi", "mode", "strategy", "p_keep", "u", "rho",
                  "rho_g", "rho_star", "lambda", "sigma"]


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


def _load_config(path: str) -> Dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def _merge_overrides(cfg: Dict, args: argparse.Namespace) -> Dict:
    merged = dict(cfg)
    merged.setdefault("axes", {})
    merged.setdefault("fixed", {})
    if args.seed is not None:
        merged["seed"] = args.seed
    if args.trials is not None:
        merged["trials"] = args.trials
    if args.out is not None:
        merged["output"] = args.out
    if args.tolerance is not None:
        merged["tolerance"] = args.tolerance
    return merged


def _grid(cfg: Dict) -> List[Dict]:
    axes = cfg.get("axes", {})
    if not isinstance(axes, dict):
        raise ConfigError("axes must be an object of name -> list")
    for name, values in axes.items():
        if name not in AXIS_NAMES:
            raise ConfigError(f"unknown axis {name!r}; allowed: {AXIS_NAMES}")
        if not isinstance(values, list) or not values:
            raise ConfigError(f"axis {name!r} must be a non-empty list")
    names = list(axes)
    size = math.prod(len(axes[n]) for n in names) if names else 1
    if size > MAX_GRID_POINTS:
        raise ConfigError(f"grid has {size} points, exceeding {MAX_GRID_POINTS}")
    fixed = cfg.get("fixed", {})
    if not isinstance(fixed, dict):
        raise ConfigError("fixed must be an object")
    points = []
    for combo in itertools.product(*(axes[n] for n in names)):
        point = dict(fixed)
        point.update(dict(zip(names, combo)))
        points.append(point)
    return points


def _mode_of(point: Dict) -> CurationMode:
    tag = point.get("mode", "label_agnostic")
    try:
        return CurationMode(tag)
    except ValueError as exc:
        raise ConfigError(f"unknown mode {tag!r}") from exc


def _strategy_of(point: Dict) -> Dict:
    spec = point.get("strategy")
    if spec is None:
        raise ConfigError("missing strategy")
    if isinstance(spec, str):
        spec = {"strategy": spec}
    spec = dict(spec)
    if "p" in point and "p" not in spec and spec.get("strategy") != "all":
        spec["p"] = point["p"]
    if "u" in point and "u" not in spec and spec.get("strategy") == "qpu":
        spec["u"] = point["u"]
    return spec


def _geometry_of(point: Dict, task: str, strict: bool = True):
    rho = float(point.get("rho", 1.0))
    rho_g = float(point.get("rho_g", 0.0))
    rho_star = float(point.get("rho_star", 0.0))
    if task == "regression":
        return RegressionGeometry(float(point.get("r", 1.0)), rho, rho_g,
                                  rho_star, strict=strict)
    return GeometrySpec(rho, rho_g, rho_star, strict=strict)


def _phi_of(point: Dict) -> float:
    if "phi" in point:
        return float(point["phi"])
    if "n" in point and "d" in point:
        return float(point["d"]) / float(point["n"])
    raise ConfigError("need either phi or both n and d")


def _point_columns(point: Dict, task: str) -> Dict:
    spec = _strategy_of(point)
    q = strategy_from_spec(spec)
    return {
        "n": point.get("n", ""),
        "d": point.get("d", ""),
        "phi": _phi_of(point),
        "mode": _mode_of(point).value,
        "strategy": spec.get("strategy"),
        "p_keep": q.keep_fraction(),
        "u": spec.get("u", ""),
        "rho": point.get("rho", 1.0),
        "rho_g": point.get("rho_g", 0.0),
        "rho_star": point.get("rho_star", 0.0),
        "lambda": point.get("lambda", ""),
        "sigma": point.get("sigma", 0.0),
    }


def _theory_value(point: Dict, task: str) -> Dict:
    """Prediction fields for one grid point."""
    q = strategy_from_spec(_strategy_of(point))
    mode = _mode_of(point)
    phi = _phi_of(point)
    lam = float(point["lambda"])
    strict = bool(point.get("strict_geometry", True))
    if task == "regression":
        rg = _geometry_of(point, task, strict)
        geom = GeometrySpec(rg.rho, rg.rho_g, rg.rho_star, strict=strict)
        c = curation_constants(q, mode, geom)
        pred = regression_error(rg, c, phi, lam, float(point.get("sigma", 0.0)))
        return {"B": pred.bias_B, "V": pred.variance_V, "total": pred.total,
                "theory": pred.total}
    geom = _geometry_of(point, task, strict)
    c = curation_constants(q, mode, geom)
    pred = classification_error(geom, c, phi, lam)
    return {"m0": pred.m0, "nu0": pred.nu0, "error": pred.error,
            "theory": pred.error}


def _experiment_config(point: Dict, task: str, trials: int,
                       seed: int) -> ExperimentConfig:
    if "n" not in point or "d" not in point:
        raise ConfigError("simulation requires n and d")
    return ExperimentConfig(
        n=int(point["n"]), d=int(point["d"]), lam=float(point["lambda"]),
        mode=_mode_of(point), strategy=strategy_from_spec(_strategy_of(point)),
        geometry=_geometry_of(point, task),
        sigma=float(point.get("sigma", 0.0)), trials=trials, seed=seed)


def _thread_count() -> int:
    env = os.environ.get("CURATION_LAWS_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise ConfigError(f"CURATION_LAWS_THREADS={env!r} not an integer") from exc
        if n < 1:
            raise ConfigError("CURATION_LAWS_THREADS must be >= 1")
        return n
    return min(8, os.cpu_count() or 1)


def _map_grid(fn, points: Sequence[Dict]) -> List:
    """Apply fn to each point on a worker pool; results in grid order."""
    workers = _thread_count()
    if workers == 1 or len(points) <= 1:
        return [fn(pt) for pt in points]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, points))


def _write_rows(path: Optional[str], columns: List[str], rows: List[Dict],
                merged_cfg: Dict) -> None:
    comment = "# " + json.dumps(merged_cfg, sort_keys=True, default=str)
    jsonl = bool(path) and path.endswith((".jsonl", ".ndjson"))
    buf = io.StringIO()
    buf.write(comment + "\n")
    if jsonl:
        for row in rows:
            buf.write(json.dumps({k: row.get(k, "") for k in columns}) + "\n")
    else:
        writer = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore",
                                lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in columns})
    data = buf.getvalue()
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)
    else:
        sys.stdout.write(data)


def _row_with_error(point: Dict, task: str, exc: Exception) -> Dict:
    row = _safe_point_columns(point, task)
    row["row_error"] = f"{type(exc).__name__}: {exc}"
    return row


def _safe_point_columns(point: Dict, task: str) -> Dict:
    try:
        return _point_columns(point, task)
    except Exception:
        return {k: point.get(k, "") for k in _POINT_COLUMNS}


def cmd_theory(cfg: Dict) -> int:
    task = cfg.get("task", "classification")
    points = _grid(cfg)
    extra = (["B", "V", "total"] if task == "regression"
             else ["m0", "nu0", "error"])
    columns = _POINT_COLUMNS + extra + ["row_error"]

    def one(pt: Dict) -> Dict:
        try:
            row = _point_columns(pt, task)
            row.update(_theory_value(pt, task))
            row["row_error"] = ""
            return row
        except Exception as exc:  # noqa: BLE001 - per-row error reporting
            return _row_with_error(pt, task, exc)

    rows = _map_grid(one, points)
    _write_rows(cfg.get("output"), columns, rows, cfg)
    return 0


def cmd_simulate(cfg: Dict) -> int:
    task = cfg.get("task", "classification")
    points = _grid(cfg)
    trials = int(cfg.get("trials", 1))
    seed = int(cfg.get("seed", 0))
    columns = _POINT_COLUMNS + ["empirical_mean", "empirical_se",
                                "kept_fraction", "skipped_trials", "row_error"]

    def one(indexed) -> Dict:
        idx, pt = indexed
        try:
            agg = run_trials(_experiment_config(pt, task, trials, seed),
                             stream=idx)
            row = _point_columns(pt, task)
            row.update({"empirical_mean": agg.mean, "empirical_se": agg.std_error,
                        "kept_fraction": agg.kept_fraction_mean,
                        "skipped_trials": agg.skipped_trials, "row_error": ""})
            return row
        except Exception as exc:  # noqa: BLE001
            return _row_with_error(pt, task, exc)

    rows = _map_grid(one, list(enumerate(points)))
    _write_rows(cfg.get("output"), columns, rows, cfg)
    return 0


def compare_point(point: Dict, task: str, trials: int, seed: int,
                  stream: int) -> Dict:
    row = _point_columns(point, task)
    theory = _theory_value(point, task)["theory"]
    agg = run_trials(_experiment_config(point, task, trials, seed),
                     stream=stream)
    if abs(theory) < ABS_COMPARISON_FLOOR:
        rel = abs(agg.mean - theory)
    else:
        rel = abs(agg.mean - theory) / abs(theory)
    row.update({"theory": theory, "empirical_mean": agg.mean,
                "empirical_se": agg.std_error, "rel_err": rel,
                "skipped_trials": agg.skipped_trials})
    return row


def cmd_compare(cfg: Dict) -> int:
    task = cfg.get("task", "classification")
    points = _grid(cfg)
    trials = int(cfg.get("trials", 1))
    seed = int(cfg.get("seed", 0))
    tolerance = float(cfg.get("tolerance", 0.05))

    def one(indexed) -> Dict:
        idx, pt = indexed
        return compare_point(pt, task, trials, seed, idx)

    rows = _map_grid(one, list(enumerate(points)))
    _write_rows(cfg.get("output"), COMPARE_COLUMNS, rows, cfg)
    rels = [r["rel_err"] for r in rows]
    mean_rel = sum(rels) / len(rels)
    max_rel = max(rels)
    print(f"compare: {len(rows)} points, mean rel err {mean_rel:.4f}, "
          f"max rel err {max_rel:.4f}, tolerance {tolerance}", file=sys.stderr)
    return 3 if max_rel > tolerance else 0


def cmd_collapse(cfg: Dict) -> int:
    fixed = dict(cfg.get("fixed", {}))
    fixed.update({k: v for k, v in cfg.items()
                  if k in ("n", "d", "lambda", "strategy", "mode",
                           "rho", "rho_g", "rho_star")})
    rounds = int(cfg.get("rounds", 0))
    seed = int(cfg.get("seed", 0))
    base = _experiment_config(fixed, "classification", 1, seed)
    fresh = bool(cfg.get("fresh_inputs_each_round", True))
    curated = collapse_loop(CollapseConfig(
        base=base, rounds=rounds, curate_each_round=True,
        fresh_inputs_each_round=fresh, curate_from_round=1))
    uncurated = collapse_loop(CollapseConfig(
        base=base, rounds=rounds, curate_each_round=False,
        fresh_inputs_each_round=fresh))
    columns = ["round", "error_uncurated", "error_curated", "rho_curated",
               "rho_uncurated", "kept_fraction"]
    rows = []
    for rnd in range(min(len(curated), len(uncurated))):
        rows.append({
            "round": rnd,
            "error_uncurated": uncurated[rnd]["error"],
            "error_curated": curated[rnd]["error"],
            "rho_curated": curated[rnd]["rho"],
            "rho_uncurated": uncurated[rnd]["rho"],
            "kept_fraction": curated[rnd]["kept_fraction"],
        })
    _write_rows(cfg.get("output"), columns, rows, cfg)
    return 0


def cmd_lens(cfg: Dict) -> int:
    p_grid = cfg.get("axes", {}).get("p") or cfg.get("p_grid")
    if not p_grid:
        raise ConfigError("lens requires axes.p (or p_grid) with p values")
    u_samples = (0.0, 0.25, 0.5, 0.75, 1.0)
    columns = (["p", "gamma_min", "gamma_max"]
               + [f"gamma_u_{u}" for u in u_samples])
    rows = []
    for p in p_grid:
        p = float(p)
        gmin, gmax = gamma_bounds(p)
        row = {"p": p, "gamma_min": gmin, "gamma_max": gmax}
        for u in u_samples:
            q = make_qpu(p, u)
            # gamma = E[q(G) G^2] via the closed interval sums
            geom = GeometrySpec(1.0, 0.0, 0.0)
            c = curation_constants(q, CurationMode.LABEL_AGNOSTIC, geom)
            row[f"gamma_u_{u}"] = c.gamma
        rows.append(row)
    _write_rows(cfg.get("output"), columns, rows, cfg)
    return 0


def cmd_probe(cfg: Dict) -> int:
    kind = cfg.get("probe", "resolvent")
    fixed = dict(cfg.get("fixed", {}))
    trials = int(cfg.get("trials", 20))
    seed = int(cfg.get("seed", 0))
    base = _experiment_config(fixed, "classification", trials, seed)
    if kind == "resolvent":
        report = resolvent_probe(base)
    elif kind == "margin":
        report = margin_probe(base, n_test=int(cfg.get("n_test", 100_000)))
    else:
        raise ConfigError(f"unknown probe kind {kind!r}")
    columns = list(report)
    _write_rows(cfg.get("output"), columns, [report], cfg)
    return 0


_COMMANDS = {
    "theory": cmd_theory,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "collapse": cmd_collapse,
    "lens": cmd_lens,
    "probe": cmd_probe,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="curation-laws",
        description="Exact scaling-law predictions for data curation, "
                    "with a built-in Monte Carlo validator.")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="JSON config file")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--trials", type=int, default=None)
    parser.add_argument("--out", default=None, help="output file (.csv/.jsonl)")
    parser.add_argument("--tolerance", type=float, default=None,
                        help="max relative error for compare (default 0.05)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _merge_overrides(_load_config(args.config), args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (EmptyKeptSetError, RuntimeError, ValueError, OSError) as exc:
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
