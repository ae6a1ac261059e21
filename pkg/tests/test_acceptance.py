"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines and timings.
"""

import time
from dataclasses import replace

import numpy as np
import pytest

from _oracles import (
    fd_gradients,
    grads_close,
    local_loss_of_model,
    pairwise_auc,
    pairwise_auc_fast,
)
from conftest import relu_kink_safe
from gossipmlp.cli import main as cli_main
from gossipmlp.experiment import (
    config_from_mapping,
    load_config,
    prepare_dataset,
    run_centralized,
    run_distributed,
    run_suite,
)
from gossipmlp.gossip import (
    GossipTrainingParams,
    NodeState,
    complete_topology,
    run_round,
)
from gossipmlp.metrics import hanley_mcneil_ci, roc_auc
from gossipmlp.mlp import (
    LayerSpec,
    backward,
    batch_forward,
    init_model,
    loss_residual,
)
from gossipmlp.synthetic import (
    hypercube_cluster_dataset,
    linear_teacher_dataset,
    write_dataset_csv,
)


def _report(name: str, ok: bool, detail: str):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


# ---------------------------------------------------------------------------
# shared workspaces
# ---------------------------------------------------------------------------

TEACHER_CONFIG = """\
m = 2
hidden_neurons_centralized = 50
learning_rate = 0.5
loss = "cross_entropy"
hidden_activation = "sigmoid"
T = 150
stop_tol = 0.0
overlap_ratio = 1.0
seeds = [1]

[dataset]
train_path = "train.csv"
test_path = "test.csv"
format = "csv"
label_rule = "identity"
scaling = "none"
"""


@pytest.fixture(scope="module")
def teacher_dir(tmp_path_factory):
    """Linear-teacher data (N=1000, n=50) plus the convergence-run config."""
    path = tmp_path_factory.mktemp("teacher")
    ds = linear_teacher_dataset(n_train=1000, n_features=50, n_test=300, seed=0)
    write_dataset_csv(ds, path / "train.csv", path / "test.csv")
    (path / "exp.toml").write_text(TEACHER_CONFIG)
    return path


@pytest.fixture(scope="module")
def benchmark_dir(tmp_path_factory):
    """Hard hypercube-cluster task at the 2000/600/500 benchmark scale."""
    path = tmp_path_factory.mktemp("benchmark")
    ds = hypercube_cluster_dataset(
        n_clusters_per_class=8, class_sep=1.0, flip_y=0.01, seed=0
    )
    write_dataset_csv(ds, path / "train.csv", path / "test.csv")
    return path


# ---------------------------------------------------------------------------
# 1. gradient oracle
# ---------------------------------------------------------------------------

def test_criterion_1_gradient_oracle():
    start = time.time()
    rng = np.random.default_rng(101)
    activations = ["sigmoid", "relu", "tanh", "linear"]
    losses = ["squared_error", "cross_entropy"]
    checked = 0
    failures = 0
    for activation in activations:
        for loss in losses:
            for _ in range(13):
                while True:
                    n_layers = int(rng.integers(1, 4))
                    widths = [int(rng.integers(1, 11)) for _ in range(n_layers)]
                    widths[-1] = 1
                    spec, fan_in = [], int(rng.integers(1, 11))
                    for k, out in enumerate(widths):
                        act = "sigmoid" if k == n_layers - 1 else activation
                        spec.append(LayerSpec(fan_in, out, act))
                        fan_in = out
                    model = init_model(spec, seed=rng.integers(2**31))
                    X = rng.normal(size=(5, model.input_width))
                    if relu_kink_safe(model, X):
                        break
                y = rng.integers(0, 2, size=5).astype(float)
                trace = batch_forward(model, X)
                grads = backward(model, trace, loss_residual(loss, y, trace.predictions))
                fd_w, fd_b = fd_gradients(local_loss_of_model(loss, X, y), model)
                for analytic, numeric in zip(grads.weights + grads.biases, fd_w + fd_b):
                    if not grads_close(analytic, numeric, rel_tol=1e-4, abs_floor=1e-8):
                        failures += 1
                checked += 1
    elapsed = time.time() - start
    _report(
        "criterion 1 (gradient oracle)",
        failures == 0 and checked >= 100 and elapsed < 60,
        f"{checked} models x all activation/loss pairs, {failures} mismatches, {elapsed:.1f}s",
    )


# ---------------------------------------------------------------------------
# 2. AUC oracle equivalence
# ---------------------------------------------------------------------------

def test_criterion_2_auc_oracle():
    start = time.time()
    rng = np.random.default_rng(202)
    worst = 0.0
    instances = 0
    while instances < 1000:
        n = int(rng.integers(2, 201))
        y = rng.integers(0, 2, size=n)
        if y.min() == y.max():
            continue
        # integer-grid scores guarantee ties
        scores = rng.integers(0, max(2, n // 4), size=n).astype(float)
        worst = max(worst, abs(roc_auc(y, scores).theta - pairwise_auc_fast(y, scores)))
        instances += 1
    # spot-check the vectorized pairwise count against the literal double loop
    for _ in range(10):
        n = int(rng.integers(4, 40))
        y = rng.integers(0, 2, size=n)
        if y.min() == y.max():
            continue
        scores = rng.integers(0, 6, size=n).astype(float)
        assert pairwise_auc(y, scores) == pytest.approx(pairwise_auc_fast(y, scores), abs=1e-15)
    elapsed = time.time() - start
    _report(
        "criterion 2 (AUC oracle equivalence)",
        worst <= 1e-12 and elapsed < 60,
        f"{instances} instances, worst |rank - pairwise| = {worst:.2e}, {elapsed:.1f}s",
    )


# ---------------------------------------------------------------------------
# 3. Hanley-McNeil reproduction
# ---------------------------------------------------------------------------

def test_criterion_3_hanley_mcneil_reproduction():
    ci_a = hanley_mcneil_ci(0.92, 100)
    ci_b = hanley_mcneil_ci(0.63, 600)
    checks = [
        (ci_a.lower, 0.88),
        (ci_a.upper, 0.96),
        (ci_b.lower, 0.60),
        (ci_b.upper, 0.66),
    ]
    worst = max(abs(actual - target) for actual, target in checks)
    _report(
        "criterion 3 (Hanley-McNeil reproduction)",
        worst <= 0.005,
        f"(0.92, 100) -> [{ci_a.lower:.4f},{ci_a.upper:.4f}] vs [0.88,0.96]; "
        f"(0.63, 600) -> [{ci_b.lower:.4f},{ci_b.upper:.4f}] vs [0.60,0.66]",
    )


# ---------------------------------------------------------------------------
# 4. centralized reduction
# ---------------------------------------------------------------------------

def test_criterion_4_centralized_reduction(teacher_dir):
    start = time.time()
    cfg = load_config(
        teacher_dir / "exp.toml",
        overrides=["m=1", "hidden_neurons_centralized=8", "T=50", "stop_tol=0.0"],
    )
    ds = prepare_dataset(cfg)
    cent = run_centralized(cfg, seed=7, dataset=ds)
    trial = run_distributed(cfg, seed=7, dataset=ds)
    gap = float(
        np.max(
            np.abs(
                trial.classifier.nodes_[0].model.flat_params()
                - cent.classifier.model_.flat_params()
            )
        )
    )
    _report(
        "criterion 4 (centralized reduction)",
        gap <= 1e-12 and trial.n_rounds == 50 and cent.n_iterations == 50,
        f"max |w_dist - w_cent| = {gap:.2e} after 50 rounds, {time.time() - start:.1f}s",
    )


# ---------------------------------------------------------------------------
# 5. gossip fixed point
# ---------------------------------------------------------------------------

def test_criterion_5_gossip_fixed_point():
    rng = np.random.default_rng(5)
    z = np.concatenate([rng.uniform(1.0, 2.0, 20), rng.uniform(-2.0, -1.0, 20)])
    rng.shuffle(z)
    y = (z > 0).astype(float)
    X = z[:, None]
    worst = 0.0
    for loss in ("squared_error", "cross_entropy"):
        nodes = []
        for i in range(4):
            model = init_model([LayerSpec(1, 1, "sigmoid")], seed=i)
            model.weights[0][:] = 60.0  # saturates sigma: predictions equal labels exactly
            model.biases[0][:] = 0.0
            nodes.append(NodeState(i, model, np.array([0])))
        before = [n.model.flat_params() for n in nodes]
        params = GossipTrainingParams(loss=loss, learning_rate=0.5,
                                      grad_reduction="sum", max_rounds=1)
        log = run_round(nodes, complete_topology(4), [X] * 4, y, params,
                        np.random.default_rng(11))
        for node, b in zip(nodes, before):
            worst = max(worst, float(np.max(np.abs(node.model.flat_params() - b))))
        if loss == "squared_error":
            assert all(e.gossiped_loss <= 1e-12 for e in log.events)
    _report(
        "criterion 5 (gossip fixed point)",
        worst <= 1e-12,
        f"max weight change over a full round = {worst:.2e}",
    )


# ---------------------------------------------------------------------------
# 6. benchmark-scale reproduction
# ---------------------------------------------------------------------------

def test_criterion_6_benchmark_scale_reproduction(benchmark_dir):
    start = time.time()
    cfg = config_from_mapping(
        {
            "m": 10,
            "hidden_neurons_centralized": 50,  # 5 hidden units per node
            "learning_rate": 0.1,
            "loss": "cross_entropy",
            "hidden_activation": "relu",
            "T": 600,
            "stop_tol": 1e-5,
            "overlap_ratio": 0.0,
            "seeds": [1, 2, 3],
            "dataset": {
                "train_path": str(benchmark_dir / "train.csv"),
                "test_path": str(benchmark_dir / "test.csv"),
                "scaling": "minmax01",
            },
        }
    )
    report = run_suite(cfg)
    elapsed = time.time() - start
    mean_d = report["distributed"]["auc_mean"]
    mean_c = report["centralized"]["auc_mean"]
    ok = abs(mean_d - 0.63) <= 0.08 and report["comparable"] and elapsed < 900
    _report(
        "criterion 6 (benchmark-scale reproduction)",
        ok,
        f"distributed AUC {mean_d:.4f} (target 0.63 +- 0.08), centralized {mean_c:.4f}, "
        f"CI [{report['distributed']['ci_lower']:.4f}, {report['distributed']['ci_upper']:.4f}], "
        f"comparable={report['comparable']}, {elapsed:.0f}s",
    )


# ---------------------------------------------------------------------------
# 7. convergence diagnostic
# ---------------------------------------------------------------------------

def test_criterion_7_convergence_diagnostic(teacher_dir):
    start = time.time()
    cfg = load_config(teacher_dir / "exp.toml")
    ds = prepare_dataset(cfg)
    # the baseline is the converged centralized model; the distributed run is
    # then observed approaching its weight scale
    baseline_cfg = replace(cfg, T=2000)
    cent = run_centralized(baseline_cfg, seed=1, dataset=ds)
    trial = run_distributed(cfg, seed=1, dataset=ds, baseline=cent)
    trace = np.array(trial.convergence_trace)
    moving_avg = np.convolve(trace, np.ones(5) / 5.0, mode="valid")
    monotone = bool(np.all(np.diff(moving_avg) < 0))
    elapsed = time.time() - start
    _report(
        "criterion 7 (convergence diagnostic)",
        trace[-1] < trace[0] and monotone and elapsed < 120,
        f"metric {trace[0]:.4f} -> {trace[-1]:.4f} over {len(trace)} rounds, "
        f"5-round moving average monotone={monotone}, {elapsed:.0f}s",
    )


# ---------------------------------------------------------------------------
# 8. overlap trend
# ---------------------------------------------------------------------------

def test_criterion_8_overlap_trend(teacher_dir):
    start = time.time()
    cfg = load_config(
        teacher_dir / "exp.toml",
        overrides=["m=10", "learning_rate=1.0", "T=100", "seeds=1,2,3"],
    )
    ds = prepare_dataset(cfg)
    means = {}
    for ratio in (0.0, 1.0):
        sub = replace(cfg, overlap_ratio=ratio)
        thetas = [run_distributed(sub, s, ds).theta_distributed for s in cfg.seeds]
        means[ratio] = float(np.mean(thetas))
    elapsed = time.time() - start
    _report(
        "criterion 8 (overlap trend)",
        means[1.0] >= means[0.0] and elapsed < 300,
        f"mean AUC overlap=1.0: {means[1.0]:.4f} >= overlap=0.0: {means[0.0]:.4f}, {elapsed:.0f}s",
    )


# ---------------------------------------------------------------------------
# 9. determinism of the CLI run
# ---------------------------------------------------------------------------

def test_criterion_9_run_determinism(teacher_dir, tmp_path):
    start = time.time()
    args = ["run", "--config", str(teacher_dir / "exp.toml"), "--set", "T=40"]
    assert cli_main(args + ["--out", str(tmp_path / "a")]) == 0
    assert cli_main(args + ["--out", str(tmp_path / "b")]) == 0
    report_a = (tmp_path / "a" / "report.json").read_bytes()
    report_b = (tmp_path / "b" / "report.json").read_bytes()
    conv_a = (tmp_path / "a" / "convergence.csv").read_bytes()
    conv_b = (tmp_path / "b" / "convergence.csv").read_bytes()
    _report(
        "criterion 9 (run determinism)",
        report_a == report_b and conv_a == conv_b,
        f"report.json byte-identical across invocations ({len(report_a)} bytes), "
        f"{time.time() - start:.1f}s",
    )
