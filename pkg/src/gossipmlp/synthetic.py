"""Seeded synthetic datasets for experiments and benchmarks.

These stand in for external benchmark downloads: a linearly separable teacher
for convergence/overlap studies, and a hypercube-cluster generator (the
construction behind the Madelon benchmark: a few informative dimensions,
linear-combination redundant features, and a large block of noise probes).
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
from sklearn.datasets import make_classification

from .data import Dataset


def linear_teacher_dataset(
    n_train: int = 1000,
    n_features: int = 50,
    n_test: int = 300,
    seed: int = 0,
    label_noise: float = 0.0,
) -> Dataset:
    """Labels from the sign of a random linear rule over all features.

    The threshold sits at the median score, so classes are balanced.  With
    ``label_noise`` = 0 the data is exactly linearly separable.
    """
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n_train + n_test, n_features))
    teacher = rng.normal(size=n_features)
    scores = X @ teacher
    y = (scores > np.median(scores)).astype(np.float64)
    if label_noise > 0.0:
        flips = rng.random(len(y)) < label_noise
        y[flips] = 1.0 - y[flips]
    return Dataset(
        X_train=X[:n_train],
        y_train=y[:n_train],
        X_test=X[n_train:],
        y_test=y[n_train:],
    )


def hypercube_cluster_dataset(
    n_train: int = 2000,
    n_test: int = 600,
    n_features: int = 500,
    n_informative: int = 5,
    n_redundant: int = 15,
    n_clusters_per_class: int = 2,
    class_sep: float = 1.0,
    flip_y: float = 0.01,
    seed: int = 0,
) -> Dataset:
    """Hard nonlinear binary task: informative hypercube clusters plus noise probes.

    Defaults mirror the Madelon benchmark's shape (2000/600 rows, 500
    features of which 5 are informative and 15 redundant).
    """
    X, y = make_classification(
        n_samples=n_train + n_test,
        n_features=n_features,
        n_informative=n_informative,
        n_redundant=n_redundant,
        n_repeated=0,
        n_classes=2,
        n_clusters_per_class=n_clusters_per_class,
        class_sep=class_sep,
        flip_y=flip_y,
        shuffle=True,
        random_state=seed,
    )
    y = y.astype(np.float64)
    return Dataset(
        X_train=X[:n_train],
        y_train=y[:n_train],
        X_test=X[n_train:],
        y_test=y[n_train:],
    )


def write_dataset_csv(ds: Dataset, train_path, test_path) -> None:
    """Write a dataset as two headerless CSV files with the label last."""
    for path, X, y in ((train_path, ds.X_train, ds.y_train), (test_path, ds.X_test, ds.y_test)):
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            for row, label in zip(X, y):
                writer.writerow([repr(float(v)) for v in row] + [int(label)])


def main(argv=None) -> int:
    """Generate a synthetic train/test pair on disk.

    ``python -m gossipmlp.synthetic linear --out data/linear`` writes
    ``train.csv`` and ``test.csv`` ready for the experiment configs.
    """
    import argparse

    parser = argparse.ArgumentParser(prog="python -m gossipmlp.synthetic")
    parser.add_argument("kind", choices=["linear", "hypercube"],
                        help="linear teacher or hard hypercube-cluster task")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    if args.kind == "linear":
        ds = linear_teacher_dataset(n_train=1000, n_features=50, n_test=300, seed=args.seed)
    else:
        ds = hypercube_cluster_dataset(
            n_clusters_per_class=8, class_sep=1.0, flip_y=0.01, seed=args.seed
        )
    out = Path(args.out)
    write_dataset_csv(ds, out / "train.csv", out / "test.csv")
    print(f"wrote {out / 'train.csv'} ({ds.n_train} rows) and "
          f"{out / 'test.csv'} ({ds.n_test} rows), {ds.n_features} features")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
