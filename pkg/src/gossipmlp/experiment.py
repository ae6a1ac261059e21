"""Config-driven experiment orchestration.

A run pairs a centralized baseline with gossip-distributed trials over the
same seeds, aggregates test AUCs with their closed-form confidence interval,
and reports whether the two are statistically comparable (the centralized
AUC falls inside the distributed CI).  All outputs are deterministic given
the config: rerunning writes byte-identical artifacts.
"""

from __future__ import annotations

import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .data import Dataset, load_dataset, parse_label_rule, scale_features, SCALING_METHODS
from .errors import ConfigurationError
from .estimators import GossipMlpClassifier, MlpClassifier
from .gossip import RoundLog, round_logs_to_csv
from .metrics import (
    ConfidenceInterval,
    averaged_auc_over_trials,
    hanley_mcneil_ci,
    roc_auc,
    roc_curve_to_csv,
)
from .mlp import ACTIVATIONS, LOSSES

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

DEFAULT_OVERLAP_GRID = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class DatasetConfig:
    train_path: str
    test_path: str
    format: str = "csv"
    label_rule: str = "identity"
    label_column: str | int | None = None
    scaling: str = "none"


@dataclass
class ExperimentConfig:
    dataset: DatasetConfig
    m: int = 10
    topology: str = "complete"
    topology_degree: int | None = None
    hidden_neurons_centralized: int = 50
    learning_rate: float = 0.1
    loss: str = "cross_entropy"
    hidden_activation: str = "relu"
    T: int = 600
    stop_tol: float = 1e-5
    overlap_ratio: float = 0.0
    trials: int = 3
    seeds: list[int] = field(default_factory=lambda: [1, 2, 3])
    gossip_grad_scale: str = "half"
    grad_reduction: str = "mean"
    minibatch: int | None = None

    def validate(self, check_files: bool = True) -> None:
        if self.m < 1:
            raise ConfigurationError(f"config key 'm': must be >= 1, got {self.m}")
        if self.hidden_neurons_centralized < self.m:
            raise ConfigurationError(
                "config key 'hidden_neurons_centralized': must be >= m so each node "
                f"gets a hidden unit, got {self.hidden_neurons_centralized} < {self.m}"
            )
        if self.learning_rate < 0:
            raise ConfigurationError(
                f"config key 'learning_rate': must be >= 0, got {self.learning_rate}"
            )
        if self.T < 1:
            raise ConfigurationError(f"config key 'T': must be >= 1, got {self.T}")
        if not 0.0 <= self.overlap_ratio <= 1.0:
            raise ConfigurationError(
                f"config key 'overlap_ratio': must be in [0, 1], got {self.overlap_ratio}"
            )
        if len(self.seeds) == 0:
            raise ConfigurationError("config key 'seeds': need at least one seed")
        if self.trials != len(self.seeds):
            raise ConfigurationError(
                f"config key 'trials': {self.trials} does not match {len(self.seeds)} seeds"
            )
        if self.loss not in LOSSES:
            raise ConfigurationError(
                f"config key 'loss': unknown {self.loss!r}, expected one of {LOSSES}"
            )
        if self.hidden_activation not in ACTIVATIONS:
            raise ConfigurationError(
                f"config key 'hidden_activation': unknown {self.hidden_activation!r}"
            )
        if self.topology not in ("complete", "ring", "random_regular"):
            raise ConfigurationError(f"config key 'topology': unknown {self.topology!r}")
        if self.topology == "random_regular" and self.topology_degree is None:
            raise ConfigurationError("config key 'topology_degree': required for random_regular")
        if self.gossip_grad_scale not in ("half", "full"):
            raise ConfigurationError(
                f"config key 'gossip_grad_scale': expected half or full, got {self.gossip_grad_scale!r}"
            )
        if self.grad_reduction not in ("mean", "sum"):
            raise ConfigurationError(
                f"config key 'grad_reduction': expected mean or sum, got {self.grad_reduction!r}"
            )
        if self.minibatch is not None and self.minibatch < 1:
            raise ConfigurationError(
                f"config key 'minibatch': must be >= 1, got {self.minibatch}"
            )
        if self.dataset.scaling not in SCALING_METHODS:
            raise ConfigurationError(
                f"config key 'dataset.scaling': unknown {self.dataset.scaling!r}"
            )
        if self.dataset.format not in ("csv", "svmlight"):
            raise ConfigurationError(
                f"config key 'dataset.format': unknown {self.dataset.format!r}"
            )
        parse_label_rule(self.dataset.label_rule)
        if check_files:
            for key, path in (
                ("dataset.train_path", self.dataset.train_path),
                ("dataset.test_path", self.dataset.test_path),
            ):
                if not Path(path).is_file():
                    raise ConfigurationError(f"config key '{key}': file not found: {path}")


_DATASET_KEYS = {"train_path", "test_path", "format", "label_rule", "label_column", "scaling"}
_TOP_KEYS = {
    "m", "topology", "topology_degree", "hidden_neurons_centralized", "learning_rate",
    "loss", "hidden_activation", "T", "stop_tol", "overlap_ratio", "trials", "seeds",
    "gossip_grad_scale", "grad_reduction", "minibatch", "dataset",
}


def config_from_mapping(mapping: dict) -> ExperimentConfig:
    """Build a config from a parsed mapping, rejecting unknown keys by name."""
    for key in mapping:
        if key not in _TOP_KEYS:
            raise ConfigurationError(f"unknown config key {key!r}")
    raw_ds = mapping.get("dataset")
    if not isinstance(raw_ds, dict):
        raise ConfigurationError("config key 'dataset': section is required")
    for key in raw_ds:
        if key not in _DATASET_KEYS:
            raise ConfigurationError(f"unknown config key 'dataset.{key}'")
    for key in ("train_path", "test_path"):
        if key not in raw_ds:
            raise ConfigurationError(f"config key 'dataset.{key}' is required")
    dataset = DatasetConfig(**raw_ds)

    top = {k: v for k, v in mapping.items() if k != "dataset"}
    if "seeds" in top:
        raw_seeds = top["seeds"]
        if isinstance(raw_seeds, (int, float)):
            raw_seeds = [raw_seeds]  # a single-seed override parses as a scalar
        top["seeds"] = [int(s) for s in raw_seeds]
        top["trials"] = int(top.get("trials", len(top["seeds"])))
    elif "trials" in top:
        top["seeds"] = list(range(1, int(top["trials"]) + 1))
    return ExperimentConfig(dataset=dataset, **top)


def _coerce_override(value: str):
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            pass
    if value.lower() in ("true", "false"):
        return value.lower() == "true"
    if "," in value:
        return [_coerce_override(v) for v in value.split(",")]
    return value


def apply_overrides(mapping: dict, overrides: list[str]) -> dict:
    """Apply ``dotted.key=value`` pairs onto the parsed config mapping."""
    for item in overrides:
        if "=" not in item:
            raise ConfigurationError(f"override {item!r} is not of the form key=value")
        dotted, value = item.split("=", 1)
        keys = dotted.strip().split(".")
        target = mapping
        for key in keys[:-1]:
            target = target.setdefault(key, {})
            if not isinstance(target, dict):
                raise ConfigurationError(f"override {dotted!r} does not address a section")
        target[keys[-1]] = _coerce_override(value.strip())
    return mapping


def load_config(path, overrides: list[str] | None = None) -> ExperimentConfig:
    """Parse a TOML config file.  Relative dataset paths resolve against it."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            mapping = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path}: {exc}") from None
    if overrides:
        apply_overrides(mapping, overrides)
    cfg = config_from_mapping(mapping)
    base = path.parent
    for attr in ("train_path", "test_path"):
        p = Path(getattr(cfg.dataset, attr))
        if not p.is_absolute():
            setattr(cfg.dataset, attr, str(base / p))
    return cfg


def prepare_dataset(cfg: ExperimentConfig) -> Dataset:
    ds = load_dataset(
        cfg.dataset.train_path,
        cfg.dataset.test_path,
        format=cfg.dataset.format,
        label_rule=cfg.dataset.label_rule,
        label_column=cfg.dataset.label_column,
    )
    return scale_features(ds, cfg.dataset.scaling)


# ---------------------------------------------------------------------------
# single-seed runs
# ---------------------------------------------------------------------------

@dataclass
class CentralizedResult:
    seed: int
    theta: float
    n_iterations: int
    loss_trace: list[float]
    rms_trace: list[float]
    test_scores: np.ndarray
    classifier: MlpClassifier


@dataclass
class TrialResult:
    seed: int
    theta_distributed: float
    ci: ConfidenceInterval
    n_rounds: int
    round_logs: list[RoundLog]
    test_scores: np.ndarray
    classifier: GossipMlpClassifier
    theta_centralized: float | None = None
    n_centralized_iterations: int | None = None
    convergence_trace: list[float] | None = None


def _boundary_safe_ci(theta: float, n: int) -> ConfidenceInterval:
    # the closed form's variance vanishes continuously at theta in {0, 1}
    if 0.0 < theta < 1.0:
        return hanley_mcneil_ci(theta, n)
    return ConfidenceInterval(lower=theta, upper=theta, se=0.0)


def run_centralized(cfg: ExperimentConfig, seed: int, dataset: Dataset | None = None) -> CentralizedResult:
    """Train one MLP on the full feature matrix with the shared stopping rule."""
    if dataset is None:
        dataset = prepare_dataset(cfg)
    clf = MlpClassifier(
        hidden_units=cfg.hidden_neurons_centralized,
        learning_rate=cfg.learning_rate,
        loss=cfg.loss,
        hidden_activation=cfg.hidden_activation,
        max_rounds=cfg.T,
        stop_tol=cfg.stop_tol,
        grad_reduction=cfg.grad_reduction,
        minibatch=cfg.minibatch,
        random_state=seed,
    )
    clf.fit(dataset.X_train, dataset.y_train)
    scores = clf.predict_proba(dataset.X_test)[:, 1]
    theta = roc_auc(dataset.y_test, scores).theta
    return CentralizedResult(
        seed=seed,
        theta=theta,
        n_iterations=clf.n_rounds_,
        loss_trace=clf.loss_curve_,
        rms_trace=clf.rms_history_,
        test_scores=scores,
        classifier=clf,
    )


def run_distributed(
    cfg: ExperimentConfig,
    seed: int,
    dataset: Dataset | None = None,
    baseline: CentralizedResult | None = None,
) -> TrialResult:
    """One gossip trial: fresh feature split per seed, then consensus training.

    When a centralized baseline is supplied, each round log gains the
    weight-norm convergence metric against the baseline's final parameters.
    """
    if dataset is None:
        dataset = prepare_dataset(cfg)
    clf = GossipMlpClassifier(
        n_nodes=cfg.m,
        hidden_units=cfg.hidden_neurons_centralized,
        topology=cfg.topology,
        topology_degree=cfg.topology_degree,
        overlap_ratio=cfg.overlap_ratio,
        learning_rate=cfg.learning_rate,
        loss=cfg.loss,
        hidden_activation=cfg.hidden_activation,
        max_rounds=cfg.T,
        stop_tol=cfg.stop_tol,
        gossip_grad_scale=cfg.gossip_grad_scale,
        grad_reduction=cfg.grad_reduction,
        minibatch=cfg.minibatch,
        random_state=seed,
    )
    clf.fit(dataset.X_train, dataset.y_train)
    scores = clf.predict_proba(dataset.X_test)[:, 1]
    theta = roc_auc(dataset.y_test, scores).theta
    result = TrialResult(
        seed=seed,
        theta_distributed=theta,
        ci=_boundary_safe_ci(theta, dataset.n_test),
        n_rounds=clf.n_rounds_,
        round_logs=clf.round_logs_,
        test_scores=scores,
        classifier=clf,
    )
    if baseline is not None:
        final_rms = baseline.rms_trace[-1]
        trace = []
        for log in clf.round_logs_:
            log.convergence_metric = abs(final_rms - log.mean_node_rms)
            trace.append(log.convergence_metric)
        result.theta_centralized = baseline.theta
        result.n_centralized_iterations = baseline.n_iterations
        result.convergence_trace = trace
    return result


# ---------------------------------------------------------------------------
# the suite
# ---------------------------------------------------------------------------

def _write_trial_artifacts(out_dir: Path, dataset: Dataset, trial: TrialResult) -> None:
    trial_dir = out_dir / "trials" / str(trial.seed)
    trial_dir.mkdir(parents=True, exist_ok=True)
    round_logs_to_csv(trial.round_logs, trial_dir / "rounds.csv")
    roc_curve_to_csv(dataset.y_test, trial.test_scores, trial_dir / "roc.csv")


def _run_one_seed(cfg, seed, dataset, out_dir):
    cent = run_centralized(cfg, seed, dataset)
    trial = run_distributed(cfg, seed, dataset, baseline=cent)
    if out_dir is not None:
        _write_trial_artifacts(out_dir, dataset, trial)
    return cent, trial


def run_suite(
    cfg: ExperimentConfig,
    out_dir=None,
    parallel_trials: int | None = None,
) -> dict:
    """Centralized + distributed runs over all seeds, with aggregation.

    Emits (under ``out_dir`` when given) ``report.json``,
    ``trials/<seed>/rounds.csv``, ``trials/<seed>/roc.csv`` and
    ``convergence.csv``.  Trial artifacts are flushed as each trial finishes,
    so a failing trial leaves the completed ones on disk.
    """
    cfg.validate()
    dataset = prepare_dataset(cfg)
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    if parallel_trials is not None and parallel_trials > 1:
        with ThreadPoolExecutor(max_workers=parallel_trials) as pool:
            futures = {
                seed: pool.submit(_run_one_seed, cfg, seed, dataset, out_dir)
                for seed in cfg.seeds
            }
            pairs = [futures[seed].result() for seed in cfg.seeds]
    else:
        pairs = [_run_one_seed(cfg, seed, dataset, out_dir) for seed in cfg.seeds]

    report = aggregate_report(cfg, dataset, pairs)
    if out_dir is not None:
        write_report_json(report, out_dir / "report.json")
        write_convergence_csv([trial for _, trial in pairs], out_dir / "convergence.csv")
    return report


def aggregate_report(cfg: ExperimentConfig, dataset: Dataset, pairs) -> dict:
    """The published-table-shaped row: mean +- sd per side, CI, verdict."""
    thetas_c = [cent.theta for cent, _ in pairs]
    thetas_d = [trial.theta_distributed for _, trial in pairs]
    iters_c = [cent.n_iterations for cent, _ in pairs]
    rounds_d = [trial.n_rounds for _, trial in pairs]
    mean_c, sd_c = averaged_auc_over_trials(thetas_c)
    mean_d, sd_d = averaged_auc_over_trials(thetas_d)
    ci = _boundary_safe_ci(mean_d, dataset.n_test)
    return {
        "overlap_ratio": cfg.overlap_ratio,
        "n_nodes": cfg.m,
        "n_test": dataset.n_test,
        "seeds": list(cfg.seeds),
        "centralized": {
            "auc_mean": mean_c,
            "auc_sd": sd_c,
            "iterations_mean": float(np.mean(iters_c)),
            "iterations_sd": float(np.std(iters_c)),
        },
        "distributed": {
            "auc_mean": mean_d,
            "auc_sd": sd_d,
            "se": ci.se,
            "ci_lower": ci.lower,
            "ci_upper": ci.upper,
            "rounds_mean": float(np.mean(rounds_d)),
            "rounds_sd": float(np.std(rounds_d)),
        },
        "comparable": bool(ci.lower <= mean_c <= ci.upper),
        "per_trial": [
            {
                "seed": trial.seed,
                "auc_centralized": cent.theta,
                "auc_distributed": trial.theta_distributed,
                "ci_lower": trial.ci.lower,
                "ci_upper": trial.ci.upper,
                "iterations_centralized": cent.n_iterations,
                "rounds_distributed": trial.n_rounds,
            }
            for cent, trial in pairs
        ],
    }


def write_report_json(report: dict, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_convergence_csv(trials: list[TrialResult], path) -> None:
    with open(path, "w") as fh:
        fh.write("seed,round,mean_node_rms,convergence_metric\n")
        for trial in trials:
            for log in trial.round_logs:
                conv = "" if log.convergence_metric is None else repr(log.convergence_metric)
                fh.write(f"{trial.seed},{log.round},{log.mean_node_rms!r},{conv}\n")


def run_centralized_suite(cfg: ExperimentConfig, out_dir=None) -> dict:
    """Baseline runs only; writes ``centralized.json`` when out_dir is given."""
    cfg.validate()
    dataset = prepare_dataset(cfg)
    results = [run_centralized(cfg, seed, dataset) for seed in cfg.seeds]
    mean, sd = averaged_auc_over_trials([r.theta for r in results])
    payload = {
        "auc_mean": mean,
        "auc_sd": sd,
        "iterations_mean": float(np.mean([r.n_iterations for r in results])),
        "per_trial": [
            {"seed": r.seed, "auc": r.theta, "iterations": r.n_iterations} for r in results
        ],
        "seeds": list(cfg.seeds),
    }
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_report_json(payload, out_dir / "centralized.json")
    return payload


def run_distributed_suite(cfg: ExperimentConfig, out_dir=None) -> dict:
    """Gossip runs only (no baseline): report.json plus per-trial CSVs."""
    cfg.validate()
    dataset = prepare_dataset(cfg)
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    trials = []
    for seed in cfg.seeds:
        trial = run_distributed(cfg, seed, dataset)
        if out_dir is not None:
            _write_trial_artifacts(out_dir, dataset, trial)
        trials.append(trial)
    mean_d, sd_d = averaged_auc_over_trials([t.theta_distributed for t in trials])
    ci = _boundary_safe_ci(mean_d, dataset.n_test)
    payload = {
        "auc_mean": mean_d,
        "auc_sd": sd_d,
        "se": ci.se,
        "ci_lower": ci.lower,
        "ci_upper": ci.upper,
        "rounds_mean": float(np.mean([t.n_rounds for t in trials])),
        "per_trial": [
            {"seed": t.seed, "auc": t.theta_distributed, "rounds": t.n_rounds} for t in trials
        ],
        "seeds": list(cfg.seeds),
    }
    if out_dir is not None:
        write_report_json(payload, out_dir / "report.json")
    return payload


# ---------------------------------------------------------------------------
# overlap sweep
# ---------------------------------------------------------------------------

def sweep_overlap(
    cfg: ExperimentConfig,
    grid=DEFAULT_OVERLAP_GRID,
    out_dir=None,
) -> list[dict]:
    """One aggregated row per overlap value (centralized runs are shared)."""
    cfg.validate()
    dataset = prepare_dataset(cfg)
    centrals = [run_centralized(cfg, seed, dataset) for seed in cfg.seeds]
    rows = []
    for ratio in grid:
        sub = replace(cfg, overlap_ratio=float(ratio))
        pairs = [
            (cent, run_distributed(sub, seed, dataset, baseline=cent))
            for cent, seed in zip(centrals, cfg.seeds)
        ]
        rows.append(aggregate_report(sub, dataset, pairs))
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_overlap_csv(rows, out_dir / "overlap_sweep.csv")
    return rows


def write_overlap_csv(rows: list[dict], path) -> None:
    with open(path, "w") as fh:
        fh.write(
            "overlap_ratio,auc_centralized_mean,auc_centralized_sd,"
            "auc_distributed_mean,auc_distributed_sd,ci_lower,ci_upper,comparable\n"
        )
        for row in rows:
            c, d = row["centralized"], row["distributed"]
            fh.write(
                f"{row['overlap_ratio']!r},{c['auc_mean']!r},{c['auc_sd']!r},"
                f"{d['auc_mean']!r},{d['auc_sd']!r},{d['ci_lower']!r},"
                f"{d['ci_upper']!r},{row['comparable']}\n"
            )
