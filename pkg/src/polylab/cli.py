"""Command line surface: dataset generation, model training, partition
maps, the benchmark sweep, learning-curve plots, and a summary report.

Exit codes: 0 success, 1 runtime failure, 2 usage or config error. Every
command prints its resolved configuration and seed; --seed falls back to
the POLYLAB_SEED environment variable, then to 0.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, bench, plots
from .data import (
    derive_seed,
    gen_gaussian_xor,
    load_csv,
    save_csv,
    xor_bayes_accuracy,
)
from .errors import ConfigError, InvalidArgument, PolylabError, TrainingDiverged
from .forest import (
    forest_from_dict,
    forest_predict_batch,
    forest_to_dict,
    max_features_grid,
    train_forest,
)
from .metrics import accuracy
from .network import (
    NetworkModel,
    TrainConfig,
    network_from_dict,
    network_to_dict,
    predict_batch,
    train,
)
from .partition import (
    cell_posteriors,
    enumerate_forest_regions_2d,
    enumerate_regions_2d,
    label_grid,
    model_depth,
    regions_to_json,
    render_partition_svg,
    resolve_layer,
)

def resolve_seed(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get("POLYLAB_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError as exc:
        raise ConfigError("POLYLAB_SEED must be an integer") from exc


def announce(command: str, seed: int, cfg: dict) -> None:
    print(f"command: {command}")
    print(f"seed: {seed}")
    print("config: " + json.dumps(cfg, sort_keys=True, default=str))


def write_manifest(out_dir: Path, command: str, seed: int,
                   files: list[Path]) -> Path:
    manifest = {
        "command": command,
        "seed": seed,
        "files": sorted(str(f.relative_to(out_dir)) for f in files),
    }
    path = out_dir / "manifest.json"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def load_model(path: str | os.PathLike):
    p = Path(path)
    if not p.exists():
        raise InvalidArgument(f"model file not found: {p}")
    with open(p, encoding="utf-8") as fh:
        payload = json.load(fh)
    family = payload.get("family")
    if family == "forest":
        return forest_from_dict(payload)
    if family == "network":
        return network_from_dict(payload)
    raise InvalidArgument(f"unrecognized model family: {family!r}")


def _inflated_bbox(features: np.ndarray) -> tuple[float, float, float, float]:
    """Data bounding box inflated 10% per side."""
    lo, hi = features.min(axis=0), features.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    lo, hi = lo - 0.1 * span, hi + 0.1 * span
    return float(lo[0]), float(hi[0]), float(lo[1]), float(hi[1])


def cmd_gen_xor(args) -> int:
    seed = resolve_seed(args.seed)
    announce("gen-xor", seed, {
        "n_train": args.n_train, "n_test": args.n_test,
        "sigma": args.sigma, "out": args.out,
    })
    train_ds, test_ds = gen_gaussian_xor(args.n_train, args.n_test,
                                         args.sigma, seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    train_path = out_dir / "xor_train.csv"
    test_path = out_dir / "xor_test.csv"
    save_csv(train_ds, train_path)
    save_csv(test_ds, test_path)
    bayes = xor_bayes_accuracy(args.sigma)
    print(f"wrote {train_path} ({train_ds.n} rows)")
    print(f"wrote {test_path} ({test_ds.n} rows)")
    print(f"bayes accuracy (quadrature, sigma={args.sigma:g}): {bayes:.4f}")
    manifest = write_manifest(out_dir, "gen-xor", seed,
                              [train_path, test_path])
    print(f"manifest: {manifest}")
    return 0


def _parse_max_features(token: str, d: int) -> int | None:
    if token == "all":
        return None
    if token == "sqrt":
        return max(1, int(np.floor(np.sqrt(d) + 0.5)))
    try:
        value = int(token)
    except ValueError as exc:
        raise InvalidArgument(
            f"--max-features must be an integer, 'sqrt', or 'all', got {token!r}"
        ) from exc
    if not (1 <= value <= d):
        raise InvalidArgument(f"--max-features must be in [1, {d}]")
    return value


def _parse_arch(text: str) -> tuple[int, ...]:
    try:
        widths = tuple(int(w) for w in text.split(",") if w.strip())
    except ValueError as exc:
        raise InvalidArgument(f"--arch must be comma-separated integers, got {text!r}") from exc
    if not widths or any(w < 1 for w in widths):
        raise InvalidArgument("--arch widths must be positive")
    return widths


def cmd_train(args) -> int:
    seed = resolve_seed(args.seed)
    ds = load_csv(args.data)
    if args.family == "forest":
        max_features = _parse_max_features(args.max_features, ds.d)
        cfg = {"family": "forest", "data": args.data, "trees": args.trees,
               "max_features": args.max_features, "out": args.out}
        announce("train", seed, cfg)
        model = train_forest(ds, args.trees, max_features, seed=seed)
        payload = forest_to_dict(model)
        preds = forest_predict_batch(model, ds.features)
    else:
        arch = _parse_arch(args.arch)
        cfg = {"family": "network", "data": args.data, "arch": list(arch),
               "l2": args.l2, "learning_rate": args.lr,
               "batch_size": args.batch, "max_epochs": args.epochs,
               "patience": args.patience, "out": args.out}
        announce("train", seed, cfg)
        train_cfg = TrainConfig(learning_rate=args.lr, batch_size=args.batch,
                                l2=args.l2, max_epochs=args.epochs,
                                patience=args.patience, seed=seed)
        model, history = train(ds, arch, train_cfg)
        payload = network_to_dict(model)
        preds = predict_batch(model, ds.features)
        print(f"stopped after epoch {history.stopped_epoch} "
              f"(best validation epoch {history.best_epoch})")
    payload["seed"] = seed
    payload["trained_on"] = ds.name
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")
    print(f"training accuracy: {accuracy(preds, ds.labels):.4f}")
    print(f"wrote {out}")
    return 0


def cmd_partition_map(args) -> int:
    seed = resolve_seed(args.seed)
    announce("partition-map", seed, {
        "model": args.model, "data": args.data, "mode": args.mode,
        "layer": args.layer, "grid": args.grid, "exact": args.exact,
        "domain": args.domain, "out": args.out,
    })
    model = load_model(args.model)
    if model.dimension != 2:
        raise InvalidArgument(
            f"partition maps need a 2-D model, got {model.dimension} inputs"
            + ("; --exact supports 2-D only" if args.exact else "")
        )
    ds = load_csv(args.data) if args.data else None
    if args.domain:
        parts = [float(v) for v in args.domain.split(",")]
        if len(parts) != 4:
            raise InvalidArgument("--domain must be xmin,xmax,ymin,ymax")
        domain = tuple(parts)
    elif ds is not None:
        domain = _inflated_bbox(ds.features)
    else:
        raise InvalidArgument("provide --data or --domain to fix the plot window")
    layer = resolve_layer(model, args.layer)

    def partition_at(limit: int):
        if not args.exact:
            return label_grid(model, domain, args.grid, limit)
        if isinstance(model, NetworkModel):
            return enumerate_regions_2d(model, domain, limit)
        return enumerate_forest_regions_2d(model, domain, limit)

    if args.regions_json and not args.exact:
        raise InvalidArgument("--regions-json requires --exact")
    source = partition_at(layer)
    if args.mode == "class-tint" or (args.mode == "layer-overlay" and ds is not None):
        if ds is None:
            raise InvalidArgument("class-tint needs --data to estimate posteriors")
        cell_posteriors(source, model, ds)
    overlays = []
    if args.mode == "layer-overlay":
        overlays = [partition_at(l) for l in range(1, layer)]
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    render_partition_svg(source, out, args.mode, overlays=overlays)
    cells = len(source) if isinstance(source, list) else source.region_count
    print(f"regions: {cells}")
    if args.regions_json and isinstance(source, list):
        with open(args.regions_json, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(regions_to_json(source), fh, sort_keys=True)
            fh.write("\n")
        print(f"wrote {args.regions_json}")
    print(f"wrote {out}")
    return 0


def cmd_bench(args) -> int:
    cfg = bench.load_config(args.config)
    if args.out:
        cfg = bench.BenchConfig(**{**cfg.__dict__, "out_dir": args.out})
    if args.seed is not None:
        cfg = bench.BenchConfig(**{**cfg.__dict__, "seed": args.seed})
    announce("bench", cfg.seed, {
        "config": args.config, "datasets": list(cfg.datasets),
        "out_dir": cfg.out_dir, "sample_cap": cfg.sample_cap,
        "fold_count": cfg.fold_count, "schedule_steps": cfg.schedule_steps,
        "families": list(cfg.families), "tree_count": cfg.tree_count,
        "draws": cfg.search.draws, "jobs": args.jobs,
    })
    records = bench.run_benchmark(cfg, jobs=args.jobs, progress=print)
    ok = [r for r in records if not r.failed]
    failed = len(records) - len(ok)
    out_dir = Path(cfg.out_dir)
    files = [out_dir / "records.jsonl", out_dir / "records.csv"]
    files += sorted(out_dir.glob("tuning_*.json"))
    manifest = write_manifest(out_dir, "bench", cfg.seed, files)
    print(f"{len(ok)} records ({failed} failed); manifest: {manifest}")
    return 0


def _load_record_log(path: str) -> list[bench.RunRecord]:
    p = Path(path)
    if not p.exists():
        raise InvalidArgument(f"records file not found: {p}")
    return bench.load_records(p)


def cmd_plot(args) -> int:
    seed = resolve_seed(args.seed)
    announce("plot", seed, {"records": args.records, "metric": args.metric,
                            "out": args.out})
    records = _load_record_log(args.records)
    stats = bench.aggregate(records)
    families = sorted({s.family for s in stats})
    series, bands, legend = [], [], []
    for family in families:
        curve = bench.family_band(stats, family, args.metric)
        color = plots.FAMILY_COLORS.get(family, "#555555")
        for name, (xs, ys) in sorted(curve.per_dataset.items()):
            series.append(plots.Series(
                label=f"{family}:{name}", xs=tuple(xs), ys=tuple(ys),
                color=color, width=1.0, opacity=0.35,
            ))
        bands.append(plots.Band(curve.xs, curve.lo, curve.hi, color))
        center_label = "median" if args.metric == "time" else "mean"
        series.append(plots.Series(
            label=f"{family} {center_label}", xs=curve.xs, ys=curve.center,
            color=color, width=2.5, markers=True,
        ))
        legend.append((family, color))
    y_names = {"kappa": "Cohen's kappa", "ece": "expected calibration error",
               "time": "fit wall time (s)"}
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    plots.line_chart(
        out, series, bands=bands, x_label="training samples",
        y_label=y_names[args.metric], log_x=True,
        log_y=args.metric == "time", legend=legend,
    )
    print(f"wrote {out}")
    return 0


def cmd_report(args) -> int:
    seed = resolve_seed(args.seed)
    announce("report", seed, {"records": args.records, "out": args.out})
    records = _load_record_log(args.records)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ok = [r for r in records if not r.failed]
    if not ok:
        print("no records")
        return 0
    stats = bench.aggregate(records)
    lines = [
        "# Benchmark report",
        "",
        f"{len(ok)} successful records, {len(records) - len(ok)} failed.",
        "",
        "| dataset | family | size | kappa | ece | accuracy | median s | runs |",
        "|---|---|---:|---:|---:|---:|---:|---:|",
    ]
    for s in stats:
        lines.append(
            f"| {s.dataset} | {s.family} | {s.size} | {s.mean_kappa:.4f} "
            f"| {s.mean_ece:.4f} | {s.mean_accuracy:.4f} "
            f"| {s.median_seconds:.3f} | {s.runs} |"
        )
    report_path = out_dir / "report.md"
    with open(report_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    manifest = write_manifest(out_dir, "report", seed, [report_path])
    print(f"wrote {report_path}")
    print(f"manifest: {manifest}")
    return 0


def _add_seed(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None,
                   help="master seed (default: POLYLAB_SEED or 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polylab",
        description="Partition-and-vote lab: forests, ReLU networks, and "
                    "the polytope partitions they carve.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-xor", help="generate the Gaussian XOR dataset")
    p.add_argument("--n-train", type=int, default=4096,
                   help="training rows (default 4096)")
    p.add_argument("--n-test", type=int, default=1000,
                   help="test rows (default 1000)")
    p.add_argument("--sigma", type=float, default=0.5,
                   help="noise scale (default 0.5)")
    p.add_argument("--out", required=True, help="output directory")
    _add_seed(p)
    p.set_defaults(func=cmd_gen_xor)

    p = sub.add_parser("train", help="train one model on a CSV dataset")
    p.add_argument("--data", required=True, help="training CSV")
    p.add_argument("--family", choices=("forest", "network"), required=True)
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--trees", type=int, default=500,
                   help="forest: ensemble size (default 500)")
    p.add_argument("--max-features", default="all",
                   help="forest: per-split feature draw; integer, 'sqrt', or "
                        "'all' (default all)")
    p.add_argument("--arch", default="64",
                   help="network: comma-separated hidden widths (default 64)")
    p.add_argument("--l2", type=float, default=1e-4,
                   help="network: L2 penalty (default 1e-4)")
    p.add_argument("--lr", type=float, default=1e-3,
                   help="network: learning rate (default 1e-3)")
    p.add_argument("--batch", type=int, default=64,
                   help="network: batch size (default 64)")
    p.add_argument("--epochs", type=int, default=200,
                   help="network: epoch cap (default 200)")
    p.add_argument("--patience", type=int, default=3,
                   help="network: early-stopping patience (default 3)")
    _add_seed(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("partition-map",
                       help="render a model's input-space partition")
    p.add_argument("--model", required=True, help="model JSON from train")
    p.add_argument("--data", default=None,
                   help="CSV for posteriors and the default window")
    p.add_argument("--mode", choices=("unique-color", "class-tint",
                                      "layer-overlay"),
                   default="unique-color")
    p.add_argument("--layer", type=int, default=None,
                   help="layer limit (default: full depth)")
    p.add_argument("--grid", type=int, default=256,
                   help="raster resolution per axis (default 256)")
    p.add_argument("--exact", action="store_true",
                   help="exact cell enumeration instead of a raster (2-D)")
    p.add_argument("--domain", default=None,
                   help="plot window as xmin,xmax,ymin,ymax")
    p.add_argument("--regions-json", default=None,
                   help="with --exact: also dump the region inventory here")
    p.add_argument("--out", required=True, help="output SVG path")
    _add_seed(p)
    p.set_defaults(func=cmd_partition_map)

    p = sub.add_parser("bench", help="run the benchmark sweep")
    p.add_argument("--config", required=True, help="TOML benchmark config")
    p.add_argument("--out", default=None, help="override out_dir")
    p.add_argument("--jobs", type=int, default=1,
                   help="worker processes (default 1)")
    _add_seed(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("plot", help="learning-curve chart from a record log")
    p.add_argument("--records", required=True, help="records.jsonl path")
    p.add_argument("--metric", choices=("kappa", "ece", "time"),
                   required=True)
    p.add_argument("--out", required=True, help="output SVG path")
    _add_seed(p)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("report", help="summary table from a record log")
    p.add_argument("--records", required=True, help="records.jsonl path")
    p.add_argument("--out", required=True, help="output directory")
    _add_seed(p)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TrainingDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except PolylabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
