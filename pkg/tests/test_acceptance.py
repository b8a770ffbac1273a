"""Release acceptance checks.

Each test covers one release criterion end to end and prints exactly one
PASS/FAIL line with its headline numbers and wall time. Criteria are
checked at full strength here; the unit suites cover the fine grain.
"""

import math
import statistics
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from polylab.bench import BenchConfig, load_config, run_benchmark
from polylab.cli import main as cli_main
from polylab.data import (
    Dataset,
    gen_gaussian_xor,
    save_csv,
    stratified_folds,
    xor_bayes_accuracy,
)
from polylab.forest import forest_predict_batch, train_forest, train_tree
from polylab.metrics import ConfusionMatrix, accuracy, cohen_kappa, ece
from polylab.network import (
    NetworkModel,
    SearchSpace,
    TrainConfig,
    init_params,
    loss_and_gradients,
    predict_batch,
    random_search,
)
from polylab.network import train as train_network
from polylab.partition import (
    code_table,
    enumerate_regions_2d,
    label_grid,
    render_partition_svg,
)
from polylab.partition.grid import grid_posteriors

from oracles import ece_naive, kappa_naive

REPO = Path(__file__).resolve().parent.parent


def report(name: str, ok: bool, detail: str) -> bool:
    print(f"{name}: {'PASS' if ok else 'FAIL'} ({detail})")
    return ok


def make_net(rng: np.random.Generator, hidden) -> NetworkModel:
    """Random 2-input binary net; nonzero biases so lines miss the origin."""
    weights, biases = init_params(2, tuple(hidden), 2, rng)
    biases = [rng.normal(0.0, 0.3, size=b.shape) for b in biases]
    return NetworkModel(tuple(weights), tuple(biases), 2, 2)


# ---------------------------------------------------------------- metrics


def test_metric_oracles():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20260816)

    worst_kappa = 0.0
    for _ in range(1000):
        c = int(rng.integers(2, 11))
        n = int(rng.integers(1, 501))
        truth = rng.integers(0, c, n)
        if rng.random() < 0.1:  # constant predictors hit the degenerate branch
            preds = np.full(n, int(rng.integers(0, c)))
        else:
            preds = rng.integers(0, c, n)
        got = cohen_kappa(ConfusionMatrix.from_predictions(preds, truth, c))
        worst_kappa = max(worst_kappa, abs(got - kappa_naive(preds, truth, c)))

    worst_ece = 0.0
    for _ in range(1000):
        c = int(rng.integers(2, 11))
        n = int(rng.integers(1, 501))
        probs = rng.random((n, c)) + 1e-9
        probs /= probs.sum(axis=1, keepdims=True)
        truth = rng.integers(0, c, n)
        worst_ece = max(worst_ece, abs(ece(probs, truth) - ece_naive(probs, truth)))

    hand_kappa = cohen_kappa(
        ConfusionMatrix.from_predictions([0, 0, 1, 1], [0, 1, 1, 1], 2)
    )
    hand_ece = ece(np.array([[0.95, 0.05], [0.55, 0.45]]), np.array([0, 1]))

    elapsed = time.perf_counter() - t0
    ok = (
        worst_kappa < 1e-12
        and worst_ece < 1e-12
        and hand_kappa == 0.5
        and abs(hand_ece - 0.30) < 1e-12
        and elapsed < 10.0
    )
    assert report(
        "metric oracles",
        ok,
        f"max |dkappa| {worst_kappa:.2e}, max |dece| {worst_ece:.2e}, "
        f"hand cases {hand_kappa:.2f}/{hand_ece:.2f}, {elapsed:.1f}s",
    )


# -------------------------------------------------------------- convexity


def test_region_convexity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7321)
    pairs_per_net = 10_000
    total = violations = 0

    for _ in range(20):
        depth = int(rng.integers(1, 4))
        hidden = tuple(int(w) for w in rng.integers(2, 17, size=depth))
        model = make_net(rng, hidden)
        pool = rng.uniform(-2.0, 2.0, size=(4096, 2))
        ids, _ = code_table(model, pool)

        left, right, need = [], [], pairs_per_net
        for _ in range(500):
            if need <= 0:
                break
            i = rng.integers(0, len(pool), size=4 * need + 1000)
            j = rng.integers(0, len(pool), size=4 * need + 1000)
            keep = (ids[i] == ids[j]) & (i != j)
            left.append(i[keep][:need])
            right.append(j[keep][:need])
            need -= len(left[-1])
        assert need == 0, "could not collect same-code pairs"

        a = pool[np.concatenate(left)]
        b = pool[np.concatenate(right)]
        mid = 0.5 * (a + b)
        ids3, _ = code_table(model, np.vstack([a, b, mid]))
        n = len(a)
        bad = (ids3[:n] != ids3[2 * n:]) | (ids3[n:2 * n] != ids3[2 * n:])
        violations += int(bad.sum())
        total += n

    elapsed = time.perf_counter() - t0
    ok = violations == 0 and total == 20 * pairs_per_net and elapsed < 30.0
    assert report(
        "region convexity",
        ok,
        f"{violations} midpoint violations over {total} pairs, {elapsed:.1f}s",
    )


# ------------------------------------------------- exact enumeration


def _line_window(W: np.ndarray, b: np.ndarray):
    """Box holding the origin and every pairwise line intersection."""
    pts = [np.zeros(2)]
    k = W.shape[1]
    for i in range(k):
        for j in range(i + 1, k):
            M = np.array([[W[0, i], W[1, i]], [W[0, j], W[1, j]]])
            if abs(M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]) < 1e-12:
                continue  # parallel pair
            pts.append(np.linalg.solve(M, -np.array([b[i], b[j]])))
    pts = np.asarray(pts)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = np.maximum(hi - lo, 1.0)
    mid = 0.5 * (lo + hi)
    return (
        float(mid[0] - 0.65 * span[0]),
        float(mid[0] + 0.65 * span[0]),
        float(mid[1] - 0.65 * span[1]),
        float(mid[1] + 0.65 * span[1]),
    )


def test_exact_enumeration_matches_grid():
    t0 = time.perf_counter()

    # Grid containment: every rasterized code must appear in the exact
    # list, and the raster can only merge regions, never invent them.
    rng = np.random.default_rng(7)
    domain = (-2.0, 2.0, -2.0, 2.0)
    containment_ok = True
    for _ in range(20):
        depth = int(rng.integers(1, 3))
        hidden = tuple(int(w) for w in rng.integers(2, 9, size=depth))
        model = make_net(rng, hidden)
        cells = enumerate_regions_2d(model, domain)
        exact = {cell.code for cell in cells}
        grid = label_grid(model, domain, 256)
        containment_ok &= all(code in exact for code in grid.codes)
        containment_ok &= len(grid.codes) <= len(cells)

    # Cell-count law for one hidden layer: k lines in general position
    # cut the plane into 1 + k + k(k-1)/2 cells; a window drawn around
    # all pairwise intersections must realize that count.
    rng = np.random.default_rng(1234)
    hits = 0
    bound_ok = True
    for _ in range(20):
        k = int(rng.integers(2, 9))
        model = make_net(rng, (k,))
        window = _line_window(model.weights[0], model.biases[0])
        cells = enumerate_regions_2d(model, window)
        bound = 1 + k + k * (k - 1) // 2
        bound_ok &= len(cells) <= bound
        hits += len(cells) == bound

    elapsed = time.perf_counter() - t0
    ok = containment_ok and bound_ok and hits >= 18 and elapsed < 120.0
    assert report(
        "exact enumeration",
        ok,
        f"grid containment {containment_ok}, count law {hits}/20, {elapsed:.1f}s",
    )


# ------------------------------------------------------ XOR vs Bayes


def _quadrant_majorities(model, predict):
    """Majority prediction per XOR quadrant, keyed by sign pair."""
    out = {}
    for sx in (1, -1):
        for sy in (1, -1):
            gx = np.linspace(0.1, 2.4, 24) * sx
            gy = np.linspace(0.1, 2.4, 24) * sy
            pts = np.column_stack([np.repeat(gx, 24), np.tile(gy, 24)])
            preds = predict(model, pts)
            out[(sx, sy)] = int(np.bincount(preds, minlength=2).argmax())
    return out


def _map_quadrant_majorities(grid):
    """Majority tinted class per quadrant of a posterior-annotated grid.

    Raster cells whose region holds no training points render neutral,
    so they carry no class vote.
    """
    xmin, xmax, ymin, ymax = grid.domain
    res = grid.resolution
    xs = xmin + (np.arange(res) + 0.5) * (xmax - xmin) / res
    ys = ymin + (np.arange(res) + 0.5) * (ymax - ymin) / res
    cls = np.full((res, res), -1)
    for rid, post in enumerate(grid.posterior):
        if post is not None:
            cls[grid.ids == rid] = int(np.argmax(post))
    out = {}
    for sx in (1, -1):
        for sy in (1, -1):
            mask = (np.sign(ys)[:, None] == sy) & (np.sign(xs)[None, :] == sx)
            votes = cls[mask & (cls >= 0)]
            out[(sx, sy)] = int(np.bincount(votes, minlength=2).argmax())
    return out


def test_xor_learners_reach_bayes(tmp_path):
    t0 = time.perf_counter()
    train_ds, test_ds = gen_gaussian_xor(4096, 1000, sigma=0.5, seed=20260816)
    bayes = xor_bayes_accuracy(0.5)

    forest = train_forest(train_ds, 500, seed=1)
    forest_acc = accuracy(forest_predict_batch(forest, test_ds.features), test_ds.labels)

    plan = stratified_folds(train_ds, 3, seed=3)
    space = SearchSpace(width_min=20, width_max=200, depth_min=1, depth_max=3, draws=3)
    found = random_search(train_ds, space, seed=4, plan=plan)
    net, _ = train_network(train_ds, found.arch, TrainConfig(l2=found.l2, seed=5))
    net_acc = accuracy(predict_batch(net, test_ds.features), test_ds.labels)

    # The rendered maps must put the right class in each quadrant: class 0
    # owns (+,+) and (-,-), class 1 owns the off-diagonal pair.
    want = {(1, 1): 0, (-1, -1): 0, (1, -1): 1, (-1, 1): 1}
    quadrants_ok = (
        _quadrant_majorities(forest, forest_predict_batch) == want
        and _quadrant_majorities(net, predict_batch) == want
    )

    domain = (-2.5, 2.5, -2.5, 2.5)
    maps_ok = True
    for tag, model in (("forest", forest), ("network", net)):
        grid = grid_posteriors(label_grid(model, domain, 64), model, train_ds)
        out = tmp_path / f"xor_{tag}.svg"
        render_partition_svg(grid, out, mode="class-tint")
        maps_ok &= out.read_text().startswith("<svg")
        maps_ok &= _map_quadrant_majorities(grid) == want

    elapsed = time.perf_counter() - t0
    ok = (
        abs(forest_acc - bayes) <= 0.05
        and abs(net_acc - bayes) <= 0.05
        and quadrants_ok
        and maps_ok
        and elapsed < 300.0
    )
    assert report(
        "xor vs bayes",
        ok,
        f"bayes {bayes:.4f}, forest {forest_acc:.4f}, network {net_acc:.4f}, "
        f"quadrants {quadrants_ok and maps_ok}, {elapsed:.0f}s",
    )


# -------------------------------------------------------- gradients


def _numeric_gradients(weights, biases, X, y, l2: float, eps: float = 1e-6):
    wg = [np.zeros_like(W) for W in weights]
    bg = [np.zeros_like(b) for b in biases]
    for arr, grad in list(zip(weights, wg)) + list(zip(biases, bg)):
        flat, gflat = arr.ravel(), grad.ravel()
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + eps
            up = loss_and_gradients(weights, biases, X, y, l2)[0]
            flat[i] = keep - eps
            down = loss_and_gradients(weights, biases, X, y, l2)[0]
            flat[i] = keep
            gflat[i] = (up - down) / (2.0 * eps)
    return wg, bg


def test_gradient_check():
    t0 = time.perf_counter()
    rng = np.random.default_rng(99)
    worst = 0.0
    for _ in range(50):
        d = int(rng.integers(1, 5))
        c = int(rng.integers(2, 5))
        depth = int(rng.integers(0, 3))
        hidden = tuple(int(w) for w in rng.integers(1, 6, size=depth))
        n = int(rng.integers(2, 7))
        l2 = float(rng.choice([0.0, 1e-3, 1e-1]))

        weights, biases = init_params(d, hidden, c, rng)
        biases = [rng.normal(0.0, 0.5, size=b.shape) for b in biases]
        X = rng.normal(size=(n, d))
        y = rng.integers(0, c, size=n)

        _, wg, bg = loss_and_gradients(weights, biases, X, y, l2)
        nwg, nbg = _numeric_gradients(weights, biases, X, y, l2)
        ana = np.concatenate([g.ravel() for g in wg + bg])
        num = np.concatenate([g.ravel() for g in nwg + nbg])
        rel = float(
            np.linalg.norm(ana - num)
            / max(np.linalg.norm(ana), np.linalg.norm(num), 1e-12)
        )
        worst = max(worst, rel)

    elapsed = time.perf_counter() - t0
    ok = worst < 1e-4 and elapsed < 10.0
    assert report(
        "gradient check",
        ok,
        f"worst relative error {worst:.2e} over 50 configs, {elapsed:.1f}s",
    )


# ------------------------------------------------------ split oracle


def _oracle_split(X: np.ndarray, y: np.ndarray, class_count: int):
    """Exhaustive best (feature, midpoint) under the squared-count score,
    replicating the trainer's arithmetic and tie order exactly."""
    n = len(y)
    counts = np.bincount(y, minlength=class_count).astype(np.int64)
    parent = float((counts * counts).sum()) / n
    best = None
    for f in range(X.shape[1]):
        vals = np.unique(X[:, f])
        for lo, hi in zip(vals[:-1], vals[1:]):
            thr = lo + (hi - lo) / 2.0
            if thr >= hi:  # adjacent floats: fall back to the left value
                thr = lo
            mask = X[:, f] <= thr
            cl = np.bincount(y[mask], minlength=class_count).astype(np.int64)
            cr = counts - cl
            nl = int(mask.sum())
            score = float((cl * cl).sum()) / nl + float((cr * cr).sum()) / (n - nl)
            if best is None or score > best[0]:
                best = (score, f, float(thr))
    if best is None or not (best[0] > parent):
        return None
    return best[1], best[2]


def test_split_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(606)
    mismatches = 0
    for t in range(200):
        n = int(rng.integers(2, 13))
        d = int(rng.integers(1, 4))
        c = int(rng.integers(2, 4))
        X = rng.integers(0, 10, size=(n, d)) / 10.0  # coarse grid forces ties
        y = rng.integers(0, c, size=n).astype(np.int64)
        root = train_tree(Dataset(X, y, c, name=f"s{t}"), max_features=d)
        got = None if root.feature < 0 else (root.feature, float(root.threshold))
        if got != _oracle_split(X, y, c):
            mismatches += 1

    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 5.0
    assert report(
        "split oracle",
        ok,
        f"{mismatches} mismatches over 200 datasets, {elapsed:.1f}s",
    )


# ---------------------------------------------------- benchmark trends


def _ranks(values) -> np.ndarray:
    vals = np.asarray(values, dtype=float)
    order = np.argsort(vals, kind="stable")
    ranks = np.empty(len(vals))
    ranks[order] = np.arange(1, len(vals) + 1, dtype=float)
    for v in np.unique(vals):
        mask = vals == v
        if mask.sum() > 1:
            ranks[mask] = ranks[mask].mean()
    return ranks


def spearman(xs, ys) -> float:
    rx, ry = _ranks(xs), _ranks(ys)
    rx -= rx.mean()
    ry -= ry.mean()
    return float((rx * ry).sum() / math.sqrt((rx * rx).sum() * (ry * ry).sum()))


def test_benchmark_trends(tmp_path):
    t0 = time.perf_counter()
    cfg = load_config(REPO / "configs" / "bench.toml")
    cfg = replace(
        cfg,
        datasets=tuple(str((REPO / p).resolve()) for p in cfg.datasets),
        out_dir=str(tmp_path / "desk"),
    )
    records = run_benchmark(cfg)
    failed = sum(r.failed for r in records)
    ok_records = [r for r in records if not r.failed]

    # Schedule index = rank of the record's train size within its dataset.
    sizes = {}
    for r in ok_records:
        sizes.setdefault((r.dataset, r.family), set()).add(r.size)
    index_of = {
        key: {s: i for i, s in enumerate(sorted(vals))}
        for key, vals in sizes.items()
    }

    kappas: dict = {}
    seconds: dict = {}
    for r in ok_records:
        idx = index_of[(r.dataset, r.family)][r.size]
        kappas.setdefault((r.family, idx), []).append(r.kappa)
        seconds.setdefault((r.family, idx), []).append(r.train_wall_seconds)

    steps = cfg.schedule_steps
    rho = {}
    for family in ("forest", "network"):
        means = [statistics.fmean(kappas[(family, i)]) for i in range(steps)]
        rho[family] = spearman(range(steps), means)
    med = {
        (family, i): statistics.median(seconds[(family, i)])
        for family in ("forest", "network")
        for i in (0, steps - 1)
    }
    cost_gap = med[("forest", 0)] > med[("network", 0)]
    growth_f = med[("forest", steps - 1)] / med[("forest", 0)]
    growth_n = med[("network", steps - 1)] / med[("network", 0)]

    elapsed = time.perf_counter() - t0
    ok = (
        failed == 0
        and rho["forest"] > 0.8
        and rho["network"] > 0.8
        and cost_gap
        and growth_n > growth_f
        and elapsed < 1800.0
    )
    assert report(
        "benchmark trends",
        ok,
        f"spearman forest {rho['forest']:.3f} network {rho['network']:.3f}, "
        f"small-n cost forest {med[('forest', 0)]:.4f}s vs network "
        f"{med[('network', 0)]:.4f}s, growth network {growth_n:.1f}x vs "
        f"forest {growth_f:.1f}x, {failed} failed, {elapsed:.0f}s",
    )


# ------------------------------------------------------- determinism


def _strip_seconds(csv_text: str) -> str:
    rows = [line.split(",") for line in csv_text.splitlines()]
    return "\n".join(",".join(row[:7] + row[8:]) for row in rows)


def _mini_bench(root: Path, tag: str) -> Path:
    out = root / f"run_{tag}"
    csv = root / "mini.csv"
    if not csv.exists():
        train_ds, _ = gen_gaussian_xor(400, 1, sigma=0.5, seed=977)
        save_csv(train_ds, csv)
    cfg = BenchConfig(
        datasets=(str(csv),),
        out_dir=str(out),
        fold_count=2,
        schedule_steps=2,
        tree_count=5,
        search=SearchSpace(4, 8, 1, 1, draws=1),
        train=TrainConfig(max_epochs=15),
        seed=11,
    )
    run_benchmark(cfg)
    for metric in ("kappa", "ece"):
        code = cli_main([
            "plot", "--records", str(out / "records.jsonl"),
            "--metric", metric, "--out", str(out / f"{metric}.svg"),
        ])
        assert code == 0
    return out


def _partition_maps(root: Path, tag: str) -> tuple[bytes, bytes]:
    train_ds, _ = gen_gaussian_xor(300, 1, sigma=0.5, seed=41)
    forest = train_forest(train_ds, 20, seed=3)
    net, _ = train_network(train_ds, [8], TrainConfig(seed=3, max_epochs=20))
    domain = (-2.5, 2.5, -2.5, 2.5)
    blobs = []
    for kind, model in (("forest", forest), ("network", net)):
        grid = grid_posteriors(label_grid(model, domain, 48), model, train_ds)
        path = root / f"{kind}_{tag}.svg"
        render_partition_svg(grid, path, mode="class-tint")
        blobs.append(path.read_bytes())
    return blobs[0], blobs[1]


def test_pipeline_determinism(tmp_path):
    t0 = time.perf_counter()
    first = _mini_bench(tmp_path, "a")
    second = _mini_bench(tmp_path, "b")

    csv_ok = _strip_seconds((first / "records.csv").read_text()) == _strip_seconds(
        (second / "records.csv").read_text()
    )
    # Wall time feeds the time chart, so only the metric charts are
    # expected to be reproducible byte for byte.
    plots_ok = all(
        (first / name).read_bytes() == (second / name).read_bytes()
        for name in ("kappa.svg", "ece.svg")
    )
    maps_ok = _partition_maps(tmp_path, "a") == _partition_maps(tmp_path, "b")

    elapsed = time.perf_counter() - t0
    ok = csv_ok and plots_ok and maps_ok
    assert report(
        "pipeline determinism",
        ok,
        f"csv {csv_ok}, metric plots {plots_ok}, partition maps {maps_ok}, "
        f"{elapsed:.0f}s",
    )
