"""Benchmark harness: seeded sweeps of objective families x optimizers,
trace/aggregate CSV emission, learned-policy evaluation, and presets.

Optimizer ids: ``fifo``, ``rb``, ``delta-<i>``, ``learned:<checkpoint>``,
``learned-greedy:<checkpoint>``, ``cg``, ``orth-only``, ``gd``, ``adam``.
The ``cg`` baseline is the engine restricted to one stored step plus the
gradient with a 1e-12 inner tolerance (conjugate-gradient-equivalent on
quadratics); ``orth-only`` keeps no steps and spans gradient plus the two
anchor/weighted-gradient directions.  ``adam`` runs a small learning-rate
grid per task and reports the best run.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .baselines import adam_baseline, gd_baseline
from .bfgs import BfgsConfig
from .classifier import ClassifierSpec
from .engine import EngineConfig, run
from .idx import load_mnist, synthetic_digits
from .policies import FifoPolicy, FixedSlotPolicy, MlpPolicy, SmallestCoefficientPolicy
from .trace import RunTrace, write_aggregate_csv, write_trace_csv
from .training import TaskDistribution

__all__ = [
    "ExperimentSpec",
    "make_optimizer",
    "run_one",
    "run_suite",
    "run_comparison",
    "evaluate_policy",
    "classifier_spec_from_data",
    "PRESETS",
]

ADAM_LR_GRID = (1e-3, 1e-2, 1e-1)


@dataclass(frozen=True)
class ExperimentSpec:
    family: str
    optimizer: str
    seeds: tuple[int, ...]
    iters: int
    d: int = 10
    h: int = 5
    use_orth: bool = True
    normalize: bool = True
    # benchmark runs exhaust their fixed budget so every trace (and the
    # aggregate) has iters + 1 rows; set a positive tolerance to allow
    # early convergence exits
    outer_grad_tol: float = 0.0
    dim: int = 100
    condition_number: float = 1e3
    family_seed: int = 0
    regression_c: float = 1.0
    rosenbrock_a: float = 1.0
    rosenbrock_b: float = 100.0
    classifier_spec: ClassifierSpec | None = None

    def __post_init__(self):
        if not self.seeds:
            raise ValueError("seeds must be nonempty")
        make_optimizer(self.optimizer, self)  # fail fast on unknown ids

    def task_distribution(self) -> TaskDistribution:
        return TaskDistribution(
            family=self.family,
            seed=self.family_seed,
            dim=self.dim,
            condition_number=self.condition_number,
            rosenbrock_a=self.rosenbrock_a,
            rosenbrock_b=self.rosenbrock_b,
            regression_c=self.regression_c,
            classifier_spec=self.classifier_spec,
        )


@dataclass
class _EngineOptimizer:
    policy: object
    cfg: EngineConfig

    def run(self, obj, x0, budget, seed):
        cfg = replace(self.cfg, max_outer_iters=budget)
        return run(obj, x0, self.policy, cfg, seed=seed)


@dataclass
class _GdOptimizer:
    grad_tol: float

    def run(self, obj, x0, budget, seed):
        return gd_baseline(obj, x0, budget, grad_tol=self.grad_tol)


@dataclass
class _AdamGridOptimizer:
    grad_tol: float
    grid: tuple[float, ...] = ADAM_LR_GRID

    def run(self, obj, x0, budget, seed):
        best: RunTrace | None = None
        for lr in self.grid:
            obj.reset_counters()
            trace = adam_baseline(obj, x0, budget, lr=lr, grad_tol=self.grad_tol)
            if best is None or trace.final_f < best.final_f:
                best = trace
        return best


def make_optimizer(optimizer_id: str, spec: ExperimentSpec):
    base_cfg = EngineConfig(
        d=spec.d,
        h=spec.h,
        use_orth=spec.use_orth,
        normalize_directions=spec.normalize,
        max_outer_iters=spec.iters,
        outer_grad_tol=spec.outer_grad_tol,
    )
    if optimizer_id == "fifo":
        return _EngineOptimizer(FifoPolicy(), base_cfg)
    if optimizer_id == "rb":
        return _EngineOptimizer(SmallestCoefficientPolicy(), base_cfg)
    if optimizer_id.startswith("delta-"):
        index = int(optimizer_id.split("-", 1)[1])
        if index > spec.d - 1:
            raise ValueError(f"{optimizer_id} out of range for d={spec.d}")
        return _EngineOptimizer(FixedSlotPolicy(index), base_cfg)
    if optimizer_id.startswith("learned:") or optimizer_id.startswith("learned-greedy:"):
        mode, _, path = optimizer_id.partition(":")
        if not path:
            raise ValueError(f"{mode} needs a checkpoint path, e.g. {mode}:out/policy")
        policy = MlpPolicy.load(path, greedy=(mode == "learned-greedy"))
        _check_geometry(policy, spec.d, spec.h)
        return _EngineOptimizer(policy, base_cfg)
    if optimizer_id == "cg":
        return _EngineOptimizer(
            FifoPolicy(),
            replace(
                base_cfg,
                d=2,
                use_orth=False,
                normalize_directions=False,
                bfgs=BfgsConfig(grad_tol=1e-12),
            ),
        )
    if optimizer_id == "orth-only":
        return _EngineOptimizer(
            FifoPolicy(), replace(base_cfg, use_orth=True, store_steps=False)
        )
    if optimizer_id == "gd":
        return _GdOptimizer(spec.outer_grad_tol)
    if optimizer_id == "adam":
        return _AdamGridOptimizer(spec.outer_grad_tol)
    raise ValueError(f"unknown optimizer id {optimizer_id!r}")


def _check_geometry(policy: MlpPolicy, d: int, h: int) -> None:
    if policy.d is not None and policy.d != d:
        raise ValueError(f"checkpoint was trained with d={policy.d}, requested d={d}")
    if policy.h is not None and policy.h != h:
        raise ValueError(f"checkpoint was trained with h={policy.h}, requested h={h}")


def run_one(spec: ExperimentSpec, seed: int) -> RunTrace:
    """One seeded run: the seed picks the task instance and drives any policy
    sampling, so reruns are bit-identical."""
    task_dist = spec.task_distribution()
    obj, x0 = task_dist.task(seed)
    optimizer = make_optimizer(spec.optimizer, spec)
    return optimizer.run(obj, x0, spec.iters, seed)


def run_suite(spec: ExperimentSpec, out_dir) -> list[RunTrace]:
    """Run every seed, write one trace CSV per seed plus an aggregate CSV."""
    out = Path(out_dir) / spec.optimizer
    out.mkdir(parents=True, exist_ok=True)
    n_alpha = spec.d + 2  # steps + gradient + two extra directions
    n_probs = spec.d - 1
    traces = []
    for seed in spec.seeds:
        trace = run_one(spec, seed)
        write_trace_csv(out / f"seed_{seed}.csv", trace, n_alpha=n_alpha, n_probs=n_probs)
        traces.append(trace)
    write_aggregate_csv(out / "aggregate.csv", traces)
    return traces


def run_comparison(specs: list[ExperimentSpec], out_dir) -> dict[str, list[RunTrace]]:
    """Run several optimizers over the same seeds and emit ``comparison.csv``
    with final-objective and call-count statistics per optimizer."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results: dict[str, list[RunTrace]] = {}
    for spec in specs:
        results[spec.optimizer] = run_suite(spec, out)
    with open(out / "comparison.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "optimizer",
                "mean_final_f",
                "median_final_f",
                "std_final_f",
                "mean_value_calls",
                "std_value_calls",
                "mean_grad_calls",
                "std_grad_calls",
                "n_seeds",
            ]
        )
        for name, traces in results.items():
            finals = np.array([t.final_f for t in traces])
            vals = np.array([t.records[-1].value_calls for t in traces], dtype=float)
            grads = np.array([t.records[-1].grad_calls for t in traces], dtype=float)
            writer.writerow(
                [
                    name,
                    repr(float(finals.mean())),
                    repr(float(np.median(finals))),
                    repr(float(finals.std())),
                    repr(float(vals.mean())),
                    repr(float(vals.std())),
                    repr(float(grads.mean())),
                    repr(float(grads.std())),
                    str(len(traces)),
                ]
            )
    return results


def evaluate_policy(
    checkpoint,
    task_dist: TaskDistribution,
    n_tasks: int,
    budget: int,
    engine_cfg: EngineConfig | None = None,
    out_dir=None,
    seed: int = 0,
    task_offset: int = 0,
) -> list[dict]:
    """Run the learned policy (stochastic and greedy) and a FIFO reference on
    ``n_tasks`` held-out tasks; returns per-task summary rows.

    Task i is ``task_dist.task(task_offset + i)``; all three optimizers see
    identical objectives and initial points.
    """
    stochastic = MlpPolicy.load(checkpoint, greedy=False)
    greedy = MlpPolicy.load(checkpoint, greedy=True)
    engine_cfg = engine_cfg or EngineConfig()
    _check_geometry(stochastic, engine_cfg.d, engine_cfg.h)
    cfg = replace(engine_cfg, max_outer_iters=budget)
    rows = []
    curves: dict[str, list[RunTrace]] = {"learned": [], "learned-greedy": [], "fifo": []}
    for i in range(n_tasks):
        idx = task_offset + i
        finals = {}
        for name, policy in (
            ("learned", stochastic),
            ("learned-greedy", greedy),
            ("fifo", FifoPolicy()),
        ):
            obj, x0 = task_dist.task(idx)
            trace = run(obj, x0, policy, cfg, seed=np.random.default_rng([seed, idx]))
            finals[name] = trace.final_f
            curves[name].append(trace)
        rows.append(
            {
                "task": idx,
                "final_f_learned": finals["learned"],
                "final_f_learned_greedy": finals["learned-greedy"],
                "final_f_fifo": finals["fifo"],
            }
        )
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "summary.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["task", "final_f_learned", "final_f_learned_greedy", "final_f_fifo"]
            )
            for r in rows:
                writer.writerow(
                    [
                        r["task"],
                        repr(r["final_f_learned"]),
                        repr(r["final_f_learned_greedy"]),
                        repr(r["final_f_fifo"]),
                    ]
                )
        for name, traces in curves.items():
            write_aggregate_csv(out / f"curve_{name}.csv", traces)
    return rows


def classifier_spec_from_data(
    digits: tuple[int, ...],
    n_images: int,
    hidden_units: int,
    batch_size: int,
    data_dir=None,
    seed: int = 0,
) -> ClassifierSpec:
    """Build a classification dataset spec from IDX files, falling back to a
    deterministic synthetic stand-in when no dataset directory is available
    (keeps the reduced presets runnable anywhere)."""
    try:
        images, labels = load_mnist(data_dir)
        mask = np.isin(labels, digits)
        images, labels = images[mask][:n_images], labels[mask][:n_images]
    except FileNotFoundError:
        warnings.warn(
            "MNIST IDX files not found; using a synthetic random-pixel dataset",
            stacklevel=2,
        )
        images, labels = synthetic_digits(n_images, seed=seed, digits=digits)
    return ClassifierSpec(
        images=images,
        labels=labels,
        digit_subset=digits,
        hidden_units=hidden_units,
        batch_size=batch_size,
        seed=seed,
    )


# Named presets mirroring the benchmarked experiment scales.  Values are CLI
# argument bundles; the CLI resolves them into commands.
PRESETS: dict[str, dict] = {
    "quadratic-suite": {
        "command": "compare",
        "family": "quadratic",
        "optimizers": ["fifo", "rb"],
        "seeds": list(range(50)),
        "iters": 60,
        "dim": 100,
        "d": 10,
    },
    "rosenbrock-bench": {
        "command": "compare",
        "family": "rosenbrock",
        "optimizers": ["fifo", "rb"],
        "seeds": list(range(20)),
        "iters": 300,
        "dim": 100,
        "d": 10,
    },
    "robust-regression-train": {
        "command": "train",
        "family": "robust-regression",
        "episodes": 200,
        "steps": 100,
        "n_train_tasks": 10,
        "dim": 100,
        "d": 10,
        "h": 5,
        "lr": 5e-3,
        "gamma": 1.0,
        "checkpoint_every": 20,
    },
    "robust-regression-train-full": {
        # full-scale budget; expect a long run
        "command": "train",
        "family": "robust-regression",
        "episodes": 2000,
        "steps": 400,
        "n_train_tasks": 50,
        "dim": 100,
        "d": 10,
        "h": 5,
        "lr": 5e-3,
        "gamma": 1.0,
        "checkpoint_every": 100,
    },
    "rosenbrock-train": {
        # full-scale budget; expect a long run
        "command": "train",
        "family": "rosenbrock",
        "episodes": 10000,
        "steps": 300,
        "n_train_tasks": 50,
        "dim": 100,
        "d": 10,
        "h": 5,
        "lr": 5e-3,
        "gamma": 1.0,
        "checkpoint_every": 500,
    },
    "robust-regression-eval": {
        "command": "evaluate",
        "family": "robust-regression",
        "n_tasks": 100,
        "budget": 100,
        "dim": 100,
        "d": 10,
        "h": 5,
    },
    "delta-sweep": {
        "command": "compare",
        "family": "robust-regression",
        "optimizers": [f"delta-{i}" for i in range(10)],
        "seeds": list(range(20)),
        "iters": 100,
        "dim": 100,
        "d": 10,
    },
    "mnist-reduced": {
        "command": "train",
        "family": "classifier",
        "digits": (0, 1),
        "n_images": 1000,
        "hidden_units": 10,
        "batch_size": 256,
        "episodes": 50,
        "epochs": 2,
        "n_train_tasks": 10,
        "d": 10,
        "h": 5,
        "lr": 5e-3,
        "gamma": 1.0,
    },
}
