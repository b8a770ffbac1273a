#!/usr/bin/env python3
"""Regenerate the bundled CSV datasets under data/.

Every dataset is small (n <= 5000), low-dimensional, and drawn with a fixed
seed so the files are bit-reproducible. Rerunning this script must leave a
clean git tree.
"""
import argparse
from pathlib import Path

import numpy as np

from polylab.data import Dataset, gen_gaussian_xor, save_csv


def moons(n: int, noise: float, seed: int) -> Dataset:
    """Two interleaved half-circles with isotropic coordinate noise."""
    rng = np.random.default_rng(seed)
    per = n // 2
    t0 = rng.uniform(0.0, np.pi, per)
    t1 = rng.uniform(0.0, np.pi, n - per)
    pts = np.concatenate([
        np.column_stack([np.cos(t0), np.sin(t0)]),
        np.column_stack([1.0 - np.cos(t1), 0.5 - np.sin(t1)]),
    ])
    pts += rng.normal(0.0, noise, pts.shape)
    labels = np.concatenate([
        np.zeros(per, np.int64), np.ones(n - per, np.int64),
    ])
    order = rng.permutation(n)
    return Dataset(pts[order], labels[order], 2, name="moons")


def rings(n: int, noise: float, seed: int) -> Dataset:
    """Two concentric circles, radius 0.6 inside and 1.4 outside."""
    rng = np.random.default_rng(seed)
    per = n // 2
    a0 = rng.uniform(0.0, 2.0 * np.pi, per)
    a1 = rng.uniform(0.0, 2.0 * np.pi, n - per)
    pts = np.concatenate([
        np.column_stack([0.6 * np.cos(a0), 0.6 * np.sin(a0)]),
        np.column_stack([1.4 * np.cos(a1), 1.4 * np.sin(a1)]),
    ])
    pts += rng.normal(0.0, noise, pts.shape)
    labels = np.concatenate([
        np.zeros(per, np.int64), np.ones(n - per, np.int64),
    ])
    order = rng.permutation(n)
    return Dataset(pts[order], labels[order], 2, name="rings")


def blobs3(n: int, sigma: float, seed: int) -> Dataset:
    """Three Gaussian blobs in four dimensions, one axis per class."""
    rng = np.random.default_rng(seed)
    centers = np.array([
        [1.4, 0.0, 0.0, 0.0],
        [0.0, 1.4, 0.0, 0.0],
        [0.0, 0.0, 1.4, 0.0],
    ])
    labels = rng.integers(0, 3, size=n)
    pts = centers[labels] + rng.normal(0.0, sigma, (n, 4))
    return Dataset(pts, labels.astype(np.int64), 3, name="blobs3")


def stripes(n: int, jitter: float, seed: int) -> Dataset:
    """Diagonal stripes over a 4x4 box; class = sign of sin(pi*(x+y)/2)."""
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-2.0, 2.0, (n, 2))
    noisy = pts + rng.normal(0.0, jitter, pts.shape)
    labels = (np.sin(0.5 * np.pi * (noisy[:, 0] + noisy[:, 1])) > 0).astype(np.int64)
    return Dataset(pts, labels, 2, name="stripes")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data"))
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    xor_train, _ = gen_gaussian_xor(2000, 1, sigma=0.5, seed=20260801)
    datasets = [
        Dataset(xor_train.features, xor_train.labels, 2, name="xor"),
        moons(1600, noise=0.18, seed=20260802),
        rings(1600, noise=0.15, seed=20260803),
        blobs3(1500, sigma=0.55, seed=20260804),
        stripes(1600, jitter=0.05, seed=20260805),
    ]
    for ds in datasets:
        path = out / f"{ds.name}.csv"
        save_csv(ds, path)
        print(f"wrote {path} n={ds.n} d={ds.d} C={ds.class_count}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
