"""Benchmark harness: tune once on the full dataset, then sweep
folds x schedule sizes x model families, recording agreement, calibration,
accuracy, and fit wall time.

Every cell appends one JSON line to an append-only log as soon as it
finishes, and completed (dataset, family, fold, size) keys are skipped on
rerun, so an interrupted sweep resumes where it stopped. A failing cell
becomes a failed record instead of aborting the sweep.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # 3.10
    import tomli as tomllib

from .data import (
    Dataset,
    FoldPlan,
    derive_seed,
    downsample,
    load_csv,
    make_schedule,
    stratified_folds,
    stratified_order,
)
from .errors import ConfigError, InvalidArgument, MissingFile
from .forest import forest_predict_batch, forest_posterior_batch, max_features_grid, train_forest
from .metrics import ConfusionMatrix, accuracy, cohen_kappa, ece, timed
from .network import (
    SearchSpace,
    TrainConfig,
    predict_proba_batch,
    random_search,
    train,
)

CSV_COLUMNS = ("dataset", "family", "fold", "size", "kappa", "ece",
               "accuracy", "seconds", "seed")

FAMILIES = ("forest", "network")


@dataclass(frozen=True)
class RunRecord:
    """One benchmark cell: a model family fit at one fold and train size."""

    dataset: str
    family: str
    fold: int
    size: int
    kappa: float
    ece: float
    accuracy: float
    train_wall_seconds: float
    seed: int
    timestamp: str
    hyperparams: dict = field(default_factory=dict)
    failed: bool = False
    error: str = ""

    def __post_init__(self):
        if not self.failed:
            if not (-1.0 - 1e-12 <= self.kappa <= 1.0 + 1e-12):
                raise InvalidArgument(f"kappa out of range: {self.kappa}")
            if not (-1e-12 <= self.ece <= 1.0 + 1e-12):
                raise InvalidArgument(f"ece out of range: {self.ece}")

    @property
    def key(self) -> tuple[str, str, int, int]:
        return (self.dataset, self.family, self.fold, self.size)

    def to_json(self) -> str:
        d = {
            "dataset": self.dataset,
            "family": self.family,
            "fold": self.fold,
            "size": self.size,
            "kappa": None if math.isnan(self.kappa) else self.kappa,
            "ece": None if math.isnan(self.ece) else self.ece,
            "accuracy": None if math.isnan(self.accuracy) else self.accuracy,
            "train_wall_seconds": self.train_wall_seconds,
            "seed": self.seed,
            "timestamp": self.timestamp,
            "hyperparams": self.hyperparams,
            "failed": self.failed,
            "error": self.error,
        }
        return json.dumps(d, sort_keys=True)

    @staticmethod
    def from_dict(d: dict) -> "RunRecord":
        nan = float("nan")
        seconds = d.get("train_wall_seconds")
        return RunRecord(
            dataset=d["dataset"],
            family=d["family"],
            fold=int(d["fold"]),
            size=int(d["size"]),
            kappa=nan if d.get("kappa") is None else float(d["kappa"]),
            ece=nan if d.get("ece") is None else float(d["ece"]),
            accuracy=nan if d.get("accuracy") is None else float(d["accuracy"]),
            train_wall_seconds=nan if seconds is None else float(seconds),
            seed=int(d.get("seed", 0)),
            timestamp=d.get("timestamp", ""),
            hyperparams=d.get("hyperparams", {}),
            failed=bool(d.get("failed", False)),
            error=d.get("error", ""),
        )


@dataclass(frozen=True)
class BenchConfig:
    datasets: tuple[str, ...]
    out_dir: str
    sample_cap: int = 10000
    fold_count: int = 5
    schedule_steps: int = 8
    families: tuple[str, ...] = FAMILIES
    tree_count: int = 500
    max_features: tuple[int, ...] | None = None
    search: SearchSpace = field(default_factory=SearchSpace)
    train: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 0

    def __post_init__(self):
        if not self.datasets:
            raise ConfigError("datasets must not be empty")
        if not self.out_dir:
            raise ConfigError("out_dir must be set")
        if self.fold_count < 2:
            raise ConfigError("fold_count must be >= 2")
        if self.sample_cap < 2 * self.fold_count:
            raise ConfigError("sample_cap too small for the fold count")
        if self.schedule_steps < 2:
            raise ConfigError("schedule_steps must be >= 2")
        if self.tree_count < 1:
            raise ConfigError("tree_count must be >= 1")
        bad = [f for f in self.families if f not in FAMILIES]
        if bad or not self.families:
            raise ConfigError(f"families must be a nonempty subset of {FAMILIES}")
        if self.max_features is not None:
            if not self.max_features or any(m < 1 for m in self.max_features):
                raise ConfigError("max_features entries must be >= 1")


_TOP_KEYS = {"datasets", "out_dir", "sample_cap", "fold_count",
             "schedule_steps", "families", "seed", "forest", "network"}
_FOREST_KEYS = {"tree_count", "max_features"}
_NETWORK_KEYS = {"width_min", "width_max", "depth_min", "depth_max",
                 "l2_min", "l2_max", "draws", "train"}
_TRAIN_KEYS = {"learning_rate", "momentum", "batch_size", "max_epochs",
               "patience", "validation_fraction"}


def _reject_unknown(table: dict, allowed: set, where: str) -> None:
    unknown = sorted(set(table) - allowed)
    if unknown:
        raise ConfigError(f"unknown {where} keys: {', '.join(unknown)}")


def load_config(path: str | os.PathLike) -> BenchConfig:
    """BenchConfig from a TOML file; unknown keys are rejected."""
    path = Path(path)
    if not path.exists():
        raise MissingFile(f"config file not found: {path}")
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    _reject_unknown(raw, _TOP_KEYS, "config")
    forest_tbl = raw.get("forest", {})
    _reject_unknown(forest_tbl, _FOREST_KEYS, "[forest]")
    network_tbl = dict(raw.get("network", {}))
    _reject_unknown(network_tbl, _NETWORK_KEYS, "[network]")
    train_tbl = network_tbl.pop("train", {})
    _reject_unknown(train_tbl, _TRAIN_KEYS, "[network.train]")
    try:
        search = SearchSpace(**network_tbl)
        train_cfg = TrainConfig(**train_tbl)
    except InvalidArgument as exc:
        raise ConfigError(str(exc)) from exc
    max_features = forest_tbl.get("max_features")
    kwargs = dict(
        datasets=tuple(raw.get("datasets", ())),
        out_dir=raw.get("out_dir", ""),
        tree_count=int(forest_tbl.get("tree_count", 500)),
        max_features=None if max_features is None else tuple(int(m) for m in max_features),
        search=search,
        train=train_cfg,
    )
    for key in ("sample_cap", "fold_count", "schedule_steps", "seed"):
        if key in raw:
            kwargs[key] = int(raw[key])
    if "families" in raw:
        kwargs["families"] = tuple(raw["families"])
    return BenchConfig(**kwargs)


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def tune_forest(ds: Dataset, plan: FoldPlan, grid, tree_count: int,
                seed: int) -> dict:
    """Mean-fold-kappa winner over the tried feature counts.

    Ties go to the smallest feature count (the grid is ascending).
    """
    scores = []
    for m in grid:
        kappas = []
        for f in range(plan.fold_count):
            tr = ds.subset(plan.train_indices(f))
            te = ds.subset(plan.test_indices(f))
            model = train_forest(tr, tree_count, m,
                                 seed=derive_seed(seed, "tune-forest", m, f))
            preds = forest_predict_batch(model, te.features)
            cm = ConfusionMatrix.from_predictions(preds, te.labels, ds.class_count)
            kappas.append(cohen_kappa(cm))
        scores.append(float(np.mean(kappas)))
    best = max(range(len(grid)), key=lambda i: (scores[i], -i))
    return {
        "tree_count": tree_count,
        "max_features": int(grid[best]),
        "grid": [int(m) for m in grid],
        "scores": scores,
    }


def tune_network(ds: Dataset, plan: FoldPlan, space: SearchSpace,
                 base_train: TrainConfig, seed: int) -> dict:
    result = random_search(ds, space, seed=seed, base_cfg=base_train, plan=plan)
    return {"arch": list(result.arch), "l2": result.l2,
            "draws": space.draws}


def _evaluate(probs: np.ndarray, truth: np.ndarray, class_count: int) -> dict:
    preds = np.argmax(probs, axis=1)
    cm = ConfusionMatrix.from_predictions(preds, truth, class_count)
    return {
        "kappa": cohen_kappa(cm),
        "ece": ece(probs, truth),
        "accuracy": accuracy(preds, truth),
    }


def _run_cell(job: dict) -> dict:
    """Train and score one benchmark cell; exceptions become a failure."""
    train_ds = Dataset(
        job["X_train"], job["y_train"], job["class_count"], job["dataset"]
    )
    base = {
        "dataset": job["dataset"], "family": job["family"],
        "fold": job["fold"], "size": job["size"], "seed": job["seed"],
        "hyperparams": job["hyperparams"], "timestamp": _utc_now(),
    }
    try:
        hp = job["hyperparams"]
        if job["family"] == "forest":
            model, seconds = timed(
                train_forest, train_ds, hp["tree_count"], hp["max_features"],
                seed=job["seed"],
            )
            probs = forest_posterior_batch(model, job["X_test"])
        else:
            cfg = TrainConfig(**{**job["train_kwargs"], "l2": hp["l2"],
                                 "seed": job["seed"]})
            (model, _), seconds = timed(train, train_ds, tuple(hp["arch"]), cfg)
            probs = predict_proba_batch(model, job["X_test"])
        scores = _evaluate(probs, job["y_test"], job["class_count"])
        return {**base, **scores, "train_wall_seconds": seconds,
                "failed": False, "error": ""}
    except Exception as exc:  # noqa: BLE001 - failure isolation by contract
        return {**base, "kappa": None, "ece": None, "accuracy": None,
                "train_wall_seconds": None, "failed": True,
                "error": f"{type(exc).__name__}: {exc}"}


def _train_kwargs(cfg: BenchConfig) -> dict:
    t = cfg.train
    return {
        "learning_rate": t.learning_rate, "momentum": t.momentum,
        "batch_size": t.batch_size, "max_epochs": t.max_epochs,
        "patience": t.patience, "validation_fraction": t.validation_fraction,
    }


def _tuning_path(out_dir: Path, name: str) -> Path:
    return out_dir / f"tuning_{name}.json"


def _tune_dataset(cfg: BenchConfig, ds: Dataset, plan: FoldPlan, name: str,
                  out_dir: Path, progress) -> dict:
    """Hyperparameters fixed once per dataset, cached across reruns."""
    path = _tuning_path(out_dir, name)
    tuned = {}
    if path.exists():
        with open(path, encoding="utf-8") as fh:
            tuned = json.load(fh)
        if all(f in tuned for f in cfg.families):
            return tuned
    if "forest" in cfg.families and "forest" not in tuned:
        grid = cfg.max_features or max_features_grid(ds.d)
        progress(f"[{name}] tuning forest over max_features {list(grid)}")
        tuned["forest"] = tune_forest(
            ds, plan, grid, cfg.tree_count, derive_seed(cfg.seed, "tune", name, "forest")
        )
    if "network" in cfg.families and "network" not in tuned:
        progress(f"[{name}] tuning network ({cfg.search.draws} draws)")
        tuned["network"] = tune_network(
            ds, plan, cfg.search, cfg.train,
            derive_seed(cfg.seed, "tune", name, "network"),
        )
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(tuned, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return tuned


def load_records(path: str | os.PathLike) -> list[RunRecord]:
    """Parse a record log; duplicate keys keep the latest line."""
    by_key: dict = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                record = RunRecord.from_dict(json.loads(line))
                by_key[record.key] = record
    return list(by_key.values())


def run_benchmark(cfg: BenchConfig, jobs: int = 1,
                  progress=lambda msg: None) -> list[RunRecord]:
    """The full protocol over every configured dataset.

    Returns all records (existing plus new). Worker count changes only
    wall times and log order, never results; the CSV export is sorted.
    """
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / "records.jsonl"
    records: list[RunRecord] = load_records(log_path) if log_path.exists() else []
    done = {r.key for r in records}

    pending: list[dict] = []
    for path in cfg.datasets:
        ds = load_csv(path)
        name = Path(path).stem
        ds = downsample(ds, cfg.sample_cap,
                        seed=derive_seed(cfg.seed, "downsample", name))
        plan = stratified_folds(ds, cfg.fold_count,
                                seed=derive_seed(cfg.seed, "folds", name))
        pool_sizes = [len(plan.train_indices(f)) for f in range(cfg.fold_count)]
        schedule = make_schedule(ds.class_count, min(pool_sizes),
                                 cfg.schedule_steps)
        tuned = _tune_dataset(cfg, ds, plan, name, out_dir, progress)
        progress(f"[{name}] n={ds.n} d={ds.d} C={ds.class_count} "
                 f"schedule={list(schedule.sizes)}")
        for fold in range(cfg.fold_count):
            pool = plan.train_indices(fold)
            order = stratified_order(ds.labels[pool], ds.class_count,
                                     seed=derive_seed(cfg.seed, "order", name, fold))
            test = ds.subset(plan.test_indices(fold))
            for size in schedule.sizes:
                subset = ds.subset(pool[order[:size]])
                for family in cfg.families:
                    if (name, family, fold, size) in done:
                        continue
                    pending.append({
                        "dataset": name, "family": family, "fold": fold,
                        "size": size,
                        "seed": derive_seed(cfg.seed, "cell", name, family,
                                            fold, size),
                        "hyperparams": tuned[family],
                        "train_kwargs": _train_kwargs(cfg),
                        "X_train": subset.features, "y_train": subset.labels,
                        "X_test": test.features, "y_test": test.labels,
                        "class_count": ds.class_count,
                    })

    progress(f"{len(pending)} cells to run, {len(done)} already recorded")
    with open(log_path, "a", encoding="utf-8") as log:
        def record_result(result: dict) -> None:
            record = RunRecord.from_dict(result)
            records.append(record)
            log.write(record.to_json() + "\n")
            log.flush()
            status = "FAILED " + record.error if record.failed else (
                f"kappa={record.kappa:.3f} ece={record.ece:.3f} "
                f"{record.train_wall_seconds:.2f}s"
            )
            progress(f"[{record.dataset}] {record.family} fold={record.fold} "
                     f"size={record.size}: {status}")

        if jobs > 1 and len(pending) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool_exec:
                futures = [pool_exec.submit(_run_cell, job) for job in pending]
                for future in as_completed(futures):
                    record_result(future.result())
        else:
            for job in pending:
                record_result(_run_cell(job))

    export_csv(records, out_dir / "records.csv")
    return records


def export_csv(records: list[RunRecord], path: str | os.PathLike) -> None:
    """Fixed-column CSV sorted by key; failed cells leave metrics blank."""
    lines = [",".join(CSV_COLUMNS)]
    for r in sorted(records, key=lambda r: r.key):
        if r.failed:
            metric_cells = ["", "", "", ""]
        else:
            metric_cells = [repr(r.kappa), repr(r.ece), repr(r.accuracy),
                            repr(r.train_wall_seconds)]
        lines.append(",".join([
            r.dataset, r.family, str(r.fold), str(r.size), *metric_cells,
            str(r.seed),
        ]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


@dataclass(frozen=True)
class GroupStat:
    """Fold-aggregated metrics for one (dataset, family, size) group."""

    dataset: str
    family: str
    size: int
    mean_kappa: float
    mean_ece: float
    mean_accuracy: float
    median_seconds: float
    runs: int


def quartiles(values) -> tuple[float, float]:
    """25th and 75th percentiles, linear interpolation."""
    arr = np.asarray(values, dtype=np.float64)
    return float(np.percentile(arr, 25)), float(np.percentile(arr, 75))


def aggregate(records: list[RunRecord]) -> list[GroupStat]:
    """Mean kappa/ECE/accuracy and median wall time per group."""
    ok = [r for r in records if not r.failed]
    if not ok:
        raise InvalidArgument("no successful records to aggregate")
    groups: dict[tuple, list[RunRecord]] = {}
    for r in ok:
        groups.setdefault((r.dataset, r.family, r.size), []).append(r)
    out = []
    for (dataset, family, size), rs in sorted(groups.items()):
        out.append(GroupStat(
            dataset=dataset,
            family=family,
            size=size,
            mean_kappa=float(np.mean([r.kappa for r in rs])),
            mean_ece=float(np.mean([r.ece for r in rs])),
            mean_accuracy=float(np.mean([r.accuracy for r in rs])),
            median_seconds=float(np.median([r.train_wall_seconds for r in rs])),
            runs=len(rs),
        ))
    return out


@dataclass(frozen=True)
class BandCurve:
    """Cross-dataset center line and interquartile band for one family."""

    family: str
    metric: str
    xs: tuple[float, ...]
    center: tuple[float, ...]
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    per_dataset: dict


def _metric_of(stat: GroupStat, metric: str) -> float:
    return {
        "kappa": stat.mean_kappa,
        "ece": stat.mean_ece,
        "accuracy": stat.mean_accuracy,
        "time": stat.median_seconds,
    }[metric]


def family_band(stats: list[GroupStat], family: str, metric: str,
                grid_points: int = 25) -> BandCurve:
    """Interpolate per-dataset curves onto a shared log grid and take the
    center (mean; median for time) plus 25th/75th percentiles pointwise.
    Grid points cover only sizes where a dataset's curve is defined."""
    curves: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    for stat in stats:
        if stat.family != family:
            continue
        xs, ys = curves.setdefault(stat.dataset, ([], []))
        xs.append(stat.size)
        ys.append(_metric_of(stat, metric))
    if not curves:
        raise InvalidArgument(f"no records for family {family!r}")
    for name, (xs, ys) in curves.items():
        order = np.argsort(xs)
        curves[name] = (np.asarray(xs, float)[order], np.asarray(ys, float)[order])
    lo = min(float(xs[0]) for xs, _ in curves.values())
    hi = max(float(xs[-1]) for xs, _ in curves.values())
    if hi <= lo:
        grid = np.array([lo])
    else:
        grid = np.exp(np.linspace(math.log(lo), math.log(hi), grid_points))
    xs_out, center, band_lo, band_hi = [], [], [], []
    for x in grid:
        vals = []
        for xs, ys in curves.values():
            if xs[0] * (1 - 1e-9) <= x <= xs[-1] * (1 + 1e-9):
                vals.append(float(np.interp(math.log(x), np.log(xs), ys)))
        if not vals:
            continue
        xs_out.append(float(x))
        center.append(float(np.median(vals) if metric == "time" else np.mean(vals)))
        q25, q75 = quartiles(vals)
        band_lo.append(q25)
        band_hi.append(q75)
    return BandCurve(family, metric, tuple(xs_out), tuple(center),
                     tuple(band_lo), tuple(band_hi), curves)
