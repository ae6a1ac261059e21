"""ROC-AUC with rank-based ties handling, closed-form confidence intervals,
and the centralized-vs-distributed weight-norm convergence diagnostic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import UndefinedMetricError
from .mlp import MlpModel, weight_rms

Z_95 = 1.96  # two-sided 95% normal quantile, as conventionally rounded


@dataclass(frozen=True)
class AucEstimate:
    theta: float
    n_samples: int
    n_pos: int
    n_neg: int


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float
    upper: float
    se: float
    level: float = 0.95

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper


def _midranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with tied values sharing the mean of their rank range."""
    _, inverse, counts = np.unique(values, return_inverse=True, return_counts=True)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    mid = starts + (counts + 1) / 2.0
    return mid[inverse]


def roc_auc(y: np.ndarray, scores: np.ndarray) -> AucEstimate:
    """Mann-Whitney AUC: (concordant + half of tied pairs) / (n_pos * n_neg).

    Computed by rank summation with midranks for ties, O(n log n).
    """
    y = np.asarray(y)
    scores = np.asarray(scores, dtype=np.float64)
    if y.shape != scores.shape or y.ndim != 1:
        raise ValueError(f"y and scores must be matching vectors, got {y.shape} vs {scores.shape}")
    pos_mask = y == 1
    n_pos = int(pos_mask.sum())
    n_neg = int(len(y) - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC is undefined when only one class is present")
    ranks = _midranks(scores)
    rank_sum_pos = float(ranks[pos_mask].sum())
    theta = (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
    return AucEstimate(theta=theta, n_samples=len(y), n_pos=n_pos, n_neg=n_neg)


def hanley_mcneil_ci(theta: float, n: int) -> ConfidenceInterval:
    """Closed-form standard error of an AUC estimate and its symmetric 95% CI.

    SE^2 = [theta(1-theta) + (n-1)(Q1 + Q2 - 2 theta^2)] / n^2 with
    Q1 = theta / (2 - theta) and Q2 = 2 theta^2 / (1 + theta).  The interval
    theta +- 1.96 SE is not clipped to [0, 1].
    """
    if not 0.0 < theta < 1.0:
        raise UndefinedMetricError(
            f"standard error is degenerate for theta={theta}; need 0 < theta < 1"
        )
    if n < 2:
        raise ValueError(f"need n >= 2 samples, got {n}")
    q1 = theta / (2.0 - theta)
    q2 = 2.0 * theta * theta / (1.0 + theta)
    se = float(
        np.sqrt((theta * (1.0 - theta) + (n - 1) * (q1 + q2 - 2.0 * theta * theta)) / (n * n))
    )
    return ConfidenceInterval(lower=theta - Z_95 * se, upper=theta + Z_95 * se, se=se)


def convergence_metric(cent_model: MlpModel, node_models: Sequence[MlpModel]) -> float:
    """Gap between parameter RMS magnitudes of the centralized and node models.

    Both sides are reduced to ||w||_2 / sqrt(dim) so differently sized
    parameter vectors are comparable; node values are averaged.
    """
    if not node_models:
        raise ValueError("need at least one node model")
    node_rms = float(np.mean([weight_rms(m) for m in node_models]))
    return abs(weight_rms(cent_model) - node_rms)


def averaged_auc_over_trials(thetas: Sequence[float]) -> tuple[float, float]:
    """Mean and population standard deviation of per-trial AUCs."""
    if len(thetas) == 0:
        raise ValueError("need at least one trial")
    arr = np.asarray(thetas, dtype=np.float64)
    return float(arr.mean()), float(arr.std())


def roc_curve_points(y: np.ndarray, scores: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(fpr, tpr, thresholds) swept from the highest score down, starting at (0, 0)."""
    y = np.asarray(y)
    scores = np.asarray(scores, dtype=np.float64)
    est = roc_auc(y, scores)  # validates shapes and both classes present
    order = np.argsort(-scores, kind="mergesort")
    ys = y[order]
    ss = scores[order]
    # threshold boundaries: last index of each tied block
    distinct = np.nonzero(np.diff(ss))[0]
    idx = np.concatenate([distinct, [len(ss) - 1]])
    tps = np.cumsum(ys == 1)[idx]
    fps = (idx + 1) - tps
    tpr = np.concatenate([[0.0], tps / est.n_pos])
    fpr = np.concatenate([[0.0], fps / est.n_neg])
    thresholds = np.concatenate([[np.inf], ss[idx]])
    return fpr, tpr, thresholds


def roc_curve_to_csv(y: np.ndarray, scores: np.ndarray, path) -> None:
    fpr, tpr, thresholds = roc_curve_points(y, scores)
    with open(path, "w") as fh:
        fh.write("fpr,tpr,threshold\n")
        for f, t, thr in zip(fpr, tpr, thresholds):
            fh.write(f"{f!r},{t!r},{thr!r}\n")
