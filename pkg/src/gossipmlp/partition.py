"""Vertical (columnwise) partitioning of a feature space across nodes.

Every node sees all rows but only its assigned feature columns.  A partition
consists of one shared subset handed to every node (sized by the overlap
ratio) plus near-equal disjoint shards of the remaining columns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class VerticalPartition:
    """Per-node sorted global feature indices."""

    assignments: tuple[np.ndarray, ...]
    m: int
    n_features: int
    overlap_ratio: float
    seed: int

    def __post_init__(self) -> None:
        if len(self.assignments) != self.m:
            raise ConfigurationError("assignment count does not match node count")

    def sizes(self) -> list[int]:
        return [len(a) for a in self.assignments]


def make_partition(n: int, m: int, overlap_ratio: float, seed: int) -> VerticalPartition:
    """Split ``n`` feature indices over ``m`` nodes.

    A shared set of round(overlap_ratio * n) indices is sampled without
    replacement and given to every node; the remaining indices are shuffled
    and chunked into ``m`` parts whose sizes differ by at most one.
    Deterministic given ``seed``.
    """
    if m < 1:
        raise ConfigurationError(f"node count must be >= 1, got {m}")
    if n < m:
        raise ConfigurationError(f"need at least one feature per node: n={n} < m={m}")
    if not 0.0 <= overlap_ratio <= 1.0:
        raise ConfigurationError(f"overlap_ratio must be in [0, 1], got {overlap_ratio}")

    rng = np.random.default_rng(seed)
    n_shared = int(np.floor(overlap_ratio * n + 0.5))  # round-half-up
    all_idx = np.arange(n)
    shared = np.sort(rng.choice(n, size=n_shared, replace=False))
    rest = np.setdiff1d(all_idx, shared, assume_unique=True)
    rng.shuffle(rest)
    parts = np.array_split(rest, m)
    assignments = tuple(
        np.union1d(shared, part).astype(np.intp) for part in parts
    )
    return VerticalPartition(
        assignments=assignments,
        m=m,
        n_features=n,
        overlap_ratio=overlap_ratio,
        seed=seed,
    )


def take_columns(X: np.ndarray, assignment: np.ndarray) -> np.ndarray:
    """Column-subset of ``X`` in assignment (sorted global index) order."""
    return np.ascontiguousarray(X[:, assignment])


def project(dataset, part: VerticalPartition, node: int) -> tuple[np.ndarray, np.ndarray]:
    """Node-local train/test matrices.  Labels are shared and not projected."""
    if not 0 <= node < part.m:
        raise ValueError(f"node id {node} out of range for {part.m} nodes")
    if part.n_features != dataset.n_features:
        raise ValueError(
            f"partition covers {part.n_features} features but dataset has {dataset.n_features}"
        )
    idx = part.assignments[node]
    return take_columns(dataset.X_train, idx), take_columns(dataset.X_test, idx)
