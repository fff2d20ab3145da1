"""Command-line experiment runner.

Subcommands ``run``, ``sweep-sparsity``, ``prop1`` and ``eval`` all read one
YAML experiment file and write CSV files into the output directory. Exit codes:
0 success, 2 configuration error, 3 runtime failure (partial results kept).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import os
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from .envs import REGISTRY, config_to_dict, env_config, make_env
from .errors import ConfigError, InvalidArgument
from .learner import LearningCurve, TrainConfig, Trainer, curve_point, evaluate
from .metrics import SMOOTHERS, prop1_experiment, stability_distance
from .sparsify import TopologyCriterion, edge_budget
from .values import ValueTables

WORKERS_ENV = "SPARSECG_WORKERS"
EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

_TRAIN_KEYS = tuple(f.name for f in dataclasses.fields(TrainConfig) if f.name not in ("criterion", "seed"))


@dataclass(frozen=True)
class EnvSpec:
    name: str
    params: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class SweepConfig:
    lambdas: tuple[float, ...] = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
    orders: tuple[str, ...] = ("descending",)
    eval_episodes: int = 32
    eval_seed: int = 12345
    # train missing checkpoints instead of failing
    train_if_missing: bool = True


@dataclass(frozen=True)
class Prop1Config:
    n_instances: int = 1000
    n_agents: int = 4
    n_actions: int = 3
    seed: int = 0
    low: float = -1.0
    high: float = 1.0
    iterations: int = 5
    n_bins: int = 10
    n_boot: int = 1000


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    env: EnvSpec
    train: Mapping[str, Any]
    criterion: TopologyCriterion
    n_seeds: int = 1
    seed: int = 0
    output_dir: str = "results"
    sweep: SweepConfig = field(default_factory=SweepConfig)
    prop1: Prop1Config = field(default_factory=Prop1Config)

    @property
    def seeds(self) -> list[int]:
        return [self.seed + k for k in range(self.n_seeds)]

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(criterion=self.criterion, seed=seed, **self.train)

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "env": {"name": self.env.name, "params": config_to_dict(env_config(self.env.name, self.env.params))},
            "train": {k: _plain(getattr(self.train_config(self.seed), k)) for k in _TRAIN_KEYS},
            "criterion": dataclasses.asdict(self.criterion),
            "n_seeds": self.n_seeds,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "sweep": {k: _plain(v) for k, v in dataclasses.asdict(self.sweep).items()},
            "prop1": dataclasses.asdict(self.prop1),
        }

    def config_hash(self) -> str:
        """Stable digest of the canonical form (output_dir excluded)."""
        d = self.to_dict()
        d.pop("output_dir")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _plain(v):
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    return v


def _section(raw, cls, where: str) -> dict:
    if raw is None:
        return {}
    if not isinstance(raw, Mapping):
        raise ConfigError(f"{where} must be a mapping")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    return dict(raw)


def parse_config(data: Mapping[str, Any]) -> ExperimentConfig:
    """Validate a decoded config mapping; every unknown key is an error."""
    if not isinstance(data, Mapping):
        raise ConfigError("config must be a mapping at top level")
    top = {"name", "env", "train", "criterion", "n_seeds", "seed", "output_dir", "sweep", "prop1"}
    unknown = set(data) - top
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    env_raw = data.get("env")
    if not isinstance(env_raw, Mapping) or "name" not in env_raw:
        raise ConfigError("env section with a name is required")
    env_raw = _section(env_raw, EnvSpec, "env")
    if env_raw["name"] not in REGISTRY:
        raise ConfigError(f"unknown environment {env_raw['name']!r}")
    params = dict(env_raw.get("params") or {})
    env_config(env_raw["name"], params)

    train = dict(data.get("train") or {})
    unknown = set(train) - set(_TRAIN_KEYS)
    if unknown:
        raise ConfigError(f"unknown keys in train: {sorted(unknown)}")
    try:
        crit = TopologyCriterion(**_section(data.get("criterion"), TopologyCriterion, "criterion"))
        sweep_raw = _section(data.get("sweep"), SweepConfig, "sweep")
        for k in ("lambdas", "orders"):
            if k in sweep_raw:
                sweep_raw[k] = tuple(sweep_raw[k])
        sweep = SweepConfig(**sweep_raw)
        prop1 = Prop1Config(**_section(data.get("prop1"), Prop1Config, "prop1"))
        cfg = ExperimentConfig(
            name=str(data.get("name", "experiment")),
            env=EnvSpec(env_raw["name"], params),
            train=train,
            criterion=crit,
            n_seeds=int(data.get("n_seeds", 1)),
            seed=int(data.get("seed", 0)),
            output_dir=str(data.get("output_dir", "results")),
            sweep=sweep,
            prop1=prop1,
        )
        cfg.train_config(cfg.seed)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from e
    if cfg.n_seeds < 1:
        raise ConfigError("n_seeds must be >= 1")
    for lam in cfg.sweep.lambdas:
        if not 0.0 <= lam <= 1.0:
            raise ConfigError(f"sweep lambda {lam} outside [0, 1]")
    for o in cfg.sweep.orders:
        if o not in ("descending", "ascending"):
            raise ConfigError(f"unknown sweep order {o!r}")
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"malformed YAML in {path}: {e}") from e
    return parse_config(data)


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True)


# -- CSV helpers -----------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, rows: list[dict], columns: list[str] | None = None) -> None:
    if columns is None:
        columns = []
        for r in rows:
            for k in r:
                if k not in columns:
                    columns.append(k)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c, "")) for c in columns])


def read_csv(path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_curve(path, curve: LearningCurve) -> None:
    write_csv(path, curve.points, curve.columns())


# -- run -------------------------------------------------------------------------

def final_performance(y: np.ndarray) -> float:
    """Mean of the last 10% of curve points (at least one)."""
    k = max(1, int(np.ceil(0.1 * len(y))))
    return float(np.mean(y[-k:]))


def temporal_average(x: np.ndarray, y: np.ndarray) -> float:
    """Area under the curve divided by the step span it covers."""
    if len(y) == 1:
        return float(y[0])
    return float(np.sum((y[1:] + y[:-1]) * np.diff(x)) / 2.0 / (x[-1] - x[0]))


def run_record(cfg: ExperimentConfig, seed: int, curve: LearningCurve) -> dict:
    rec: dict[str, Any] = {"config_hash": cfg.config_hash(), "seed": seed, "n_points": len(curve)}
    y = curve.column("eval_return_mean")
    x = curve.column("env_steps")
    if len(y):
        rec["final_performance"] = final_performance(y)
        rec["temporal_average"] = temporal_average(x, y)
        rec["edges_used_mean"] = float(np.mean(curve.column("edges_used_mean")))
        rec["messages_per_selection"] = float(np.mean(curve.column("messages_per_selection")))
    for m in SMOOTHERS:
        rec[f"stability_{m}"] = stability_distance(y, m).distance if len(y) >= 2 else float("nan")
    return rec


def _train_seed(args) -> dict:
    cfg, seed, out = args
    env = make_env(cfg.env.name, cfg.env.params)
    tr = Trainer(env, cfg.train_config(seed))
    curve = tr.train()
    write_curve(out / f"curve_seed{seed}.csv", curve)
    tr.tables.save(out / f"tables_seed{seed}.npz")
    return run_record(cfg, seed, curve)


def _pool_map(fn, jobs):
    """Results in job order; a failing job yields its exception instead of a result."""
    workers = max(1, int(os.environ.get(WORKERS_ENV, "1") or 1))
    out = []
    if workers == 1 or len(jobs) <= 1:
        for j in jobs:
            try:
                out.append(fn(j))
            except Exception as e:  # noqa: BLE001
                out.append(e)
        return out
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as ex:
        futs = [ex.submit(fn, j) for j in jobs]
        for f in futs:
            try:
                out.append(f.result())
            except Exception as e:  # noqa: BLE001
                out.append(e)
    return out


AGG_STATS = ("median", "p25", "p75")


def aggregate_rows(curves: list[list[dict[str, str]]]) -> list[dict]:
    """Per evaluation index: median and 25/75 percentiles across seeds of every curve column."""
    if not curves:
        return []
    n_points = min(len(c) for c in curves)
    cols = [c for c in curves[0][0].keys()] if n_points else []
    rows = []
    for k in range(n_points):
        row: dict[str, Any] = {"point": k}
        for c in cols:
            vals = np.array([float(cur[k][c]) for cur in curves if cur[k].get(c, "") != ""])
            if len(vals) == 0:
                continue
            row[f"{c}_median"] = float(np.median(vals))
            row[f"{c}_p25"] = float(np.percentile(vals, 25))
            row[f"{c}_p75"] = float(np.percentile(vals, 75))
        rows.append(row)
    return rows


def cmd_run(cfg: ExperimentConfig, out: Path, seeds: list[int]) -> int:
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.yaml").write_text(dump_config(cfg))
    results = _pool_map(_train_seed, [(cfg, s, out) for s in seeds])
    records, failed = [], []
    for s, r in zip(seeds, results):
        if isinstance(r, Exception):
            failed.append((s, r))
        else:
            records.append(r)
    curves = [read_csv(out / f"curve_seed{r['seed']}.csv") for r in records]
    write_csv(out / "aggregate.csv", aggregate_rows(curves))
    write_csv(out / "summary.csv", records)
    for s, e in failed:
        print(f"seed {s} failed: {e!r}", file=sys.stderr)
    return EXIT_RUNTIME if failed else EXIT_OK


# -- sweep / eval ------------------------------------------------------------------

def _eval_seeds(cfg: ExperimentConfig) -> list[int]:
    rng = np.random.default_rng(cfg.sweep.eval_seed)
    return [int(x) for x in rng.integers(2**31, size=cfg.sweep.eval_episodes)]


def _load_or_train(cfg: ExperimentConfig, seed: int, out: Path, allow_train: bool) -> ValueTables:
    path = out / f"tables_seed{seed}.npz"
    if path.exists():
        return ValueTables.load(path)
    if not allow_train:
        raise FileNotFoundError(f"missing checkpoint {path}; run training first or enable train_if_missing")
    out.mkdir(parents=True, exist_ok=True)
    env = make_env(cfg.env.name, cfg.env.params)
    tr = Trainer(env, cfg.train_config(seed))
    write_curve(out / f"curve_seed{seed}.csv", tr.train())
    tr.tables.save(path)
    return tr.tables


def _eval_row(env, tables, crit, cfg, seeds) -> dict:
    train = cfg.train_config(cfg.seed)
    res = evaluate(env, tables, tables.snapshot(), crit, seeds, train.maxsum_iterations, crit.rng_seed,
                   train.history, train.normalize_messages, train.qtot_all_pairs)
    n = env.n_agents
    m = n * (n - 1) // 2
    row = curve_point(0, res)
    row.pop("env_steps")
    row["saved_fraction"] = 1.0 - res.edges_used_mean / m if m else 0.0
    return row


def _sweep_seed(args) -> list[dict]:
    cfg, seed, out, lambdas, allow_train = args
    tables = _load_or_train(cfg, seed, out, allow_train)
    env = make_env(cfg.env.name, cfg.env.params)
    seeds = _eval_seeds(cfg)
    rows = []
    for order in cfg.sweep.orders:
        for lam in lambdas:
            crit = dataclasses.replace(cfg.criterion, lam=float(lam), order=order)
            row = {"seed": seed, "order": order, "lambda": float(lam),
                   "budget": edge_budget(env.n_agents, float(lam)) if crit.kind not in ("full", "none")
                   else crit.budget(env.n_agents)}
            row.update(_eval_row(env, tables, crit, cfg, seeds))
            rows.append(row)
    return rows


def cmd_sweep(cfg: ExperimentConfig, out: Path, seeds: list[int], lambdas: list[float]) -> int:
    lambdas = sorted(float(x) for x in lambdas)
    results = _pool_map(_sweep_seed, [(cfg, s, out, lambdas, cfg.sweep.train_if_missing) for s in seeds])
    rows, failed = [], []
    for s, r in zip(seeds, results):
        if isinstance(r, Exception):
            failed.append((s, r))
        else:
            rows.extend(r)
    out.mkdir(parents=True, exist_ok=True)
    rows.sort(key=lambda r: (r["order"], r["lambda"], r["seed"]))
    write_csv(out / "sweep.csv", rows)
    summary = []
    for order in cfg.sweep.orders:
        for lam in lambdas:
            sel = [r for r in rows if r["order"] == order and r["lambda"] == lam]
            if not sel:
                continue
            ret = np.array([r["eval_return_mean"] for r in sel])
            summary.append({"order": order, "lambda": lam, "n_seeds": len(sel),
                            "return_median": float(np.median(ret)),
                            "return_p25": float(np.percentile(ret, 25)),
                            "return_p75": float(np.percentile(ret, 75)),
                            "edges_used_mean": float(np.mean([r["edges_used_mean"] for r in sel])),
                            "messages_per_selection": float(np.mean([r["messages_per_selection"] for r in sel]))})
    write_csv(out / "sweep_summary.csv", summary)
    for s, e in failed:
        print(f"seed {s} failed: {e!r}", file=sys.stderr)
    return EXIT_RUNTIME if failed else EXIT_OK


def cmd_eval(cfg: ExperimentConfig, out: Path, seeds: list[int]) -> int:
    rows, failed = [], []
    env = make_env(cfg.env.name, cfg.env.params)
    ev = _eval_seeds(cfg)
    for s in seeds:
        try:
            tables = _load_or_train(cfg, s, out, False)
            row = {"seed": s, "criterion": cfg.criterion.kind, "lambda": cfg.criterion.lam}
            row.update(_eval_row(env, tables, cfg.criterion, cfg, ev))
            rows.append(row)
        except Exception as e:  # noqa: BLE001
            failed.append((s, e))
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "eval.csv", rows)
    for s, e in failed:
        print(f"seed {s} failed: {e!r}", file=sys.stderr)
    return EXIT_RUNTIME if failed else EXIT_OK


def cmd_prop1(cfg: ExperimentConfig, out: Path, seed: int | None) -> int:
    p = cfg.prop1 if seed is None else dataclasses.replace(cfg.prop1, seed=seed)
    rep = prop1_experiment(p.n_instances, p.n_agents, p.n_actions, p.seed, p.low, p.high,
                           p.iterations, p.n_bins, p.n_boot)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "prop1_rows.csv", rep.rows)
    write_csv(out / "prop1_summary.csv", rep.summary)
    write_csv(out / "prop1_positive_bound.csv", [rep.positive_bound])
    return EXIT_OK


# -- entry point -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sparsecg", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "train every seed and aggregate curves"),
                        ("sweep-sparsity", "evaluate trained tables across edge budgets"),
                        ("prop1", "edge-removal Monte-Carlo study"),
                        ("eval", "greedy evaluation of saved tables")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="YAML experiment file")
        p.add_argument("--seed", type=int, help="run only this seed")
        p.add_argument("--criterion", help="override criterion kind")
        p.add_argument("--lambda", dest="lam", help="edge budget fraction; a comma list for sweep-sparsity")
        p.add_argument("--out", help="output directory (default: config output_dir)")
    return ap


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    crit = cfg.criterion
    if args.criterion is not None:
        crit = dataclasses.replace(crit, kind=args.criterion)
    if args.lam is not None and args.command != "sweep-sparsity":
        crit = dataclasses.replace(crit, lam=float(args.lam))
    return dataclasses.replace(cfg, criterion=crit)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        lambdas = list(cfg.sweep.lambdas)
        if args.command == "sweep-sparsity" and args.lam is not None:
            lambdas = [float(x) for x in args.lam.split(",") if x.strip()]
            if any(not 0.0 <= x <= 1.0 for x in lambdas):
                raise ConfigError("lambdas must lie in [0, 1]")
    except (ConfigError, InvalidArgument, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out or cfg.output_dir)
    seeds = [args.seed] if args.seed is not None else cfg.seeds
    try:
        if args.command == "run":
            return cmd_run(cfg, out, seeds)
        if args.command == "sweep-sparsity":
            return cmd_sweep(cfg, out, seeds, lambdas)
        if args.command == "eval":
            return cmd_eval(cfg, out, seeds)
        return cmd_prop1(cfg, out, args.seed)
    except Exception:  # noqa: BLE001
        traceback.print_exc()
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
