"""REINFORCE training of the MLP eviction policy on episodes of subspace
optimization runs.

An episode runs the engine for T outer iterations on a task sampled from a
task distribution; every eviction decision contributes a (state, action,
reward) triple.  Updates follow the score-function estimator with suffix
returns and a per-time-step baseline, applied as one Adam ascent step per
batch of trajectories.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .adam import Adam
from .classifier import ClassifierSpec, make_classifier_objective
from .engine import EngineConfig, run
from .objectives import (
    make_quadratic,
    make_regression_dataset,
    make_robust_regression,
    make_rosenbrock,
    QuadraticSpec,
)
from .policies import MlpPolicy, PolicyInput

__all__ = [
    "Trajectory",
    "TrainConfig",
    "TaskDistribution",
    "run_episode",
    "compute_returns",
    "EmaBaseline",
    "BatchMeanBaseline",
    "reinforce_step",
    "train",
    "save_learning_curve",
]


@dataclass
class Trajectory:
    states: list[PolicyInput]
    actions: list[int]
    rewards: list[float]

    def __post_init__(self):
        if not (len(self.states) == len(self.actions) == len(self.rewards)):
            raise ValueError("states/actions/rewards lengths differ")
        if not np.isfinite(self.rewards).all():
            raise ValueError("non-finite reward")

    def __len__(self) -> int:
        return len(self.actions)

    @property
    def total_reward(self) -> float:
        return float(np.sum(self.rewards)) if self.rewards else 0.0


@dataclass(frozen=True)
class TrainConfig:
    episodes: int = 200
    steps_per_episode: int = 100
    batch_size: int = 1          # trajectories per update
    gamma: float = 1.0
    lr: float = 5e-3
    ema_decay: float = 0.95
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    baseline: str = "ema"        # "ema" | "batch-mean" | "none"
    checkpoint_every: int = 0    # 0: only the final checkpoint

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 <= self.ema_decay < 1.0:
            raise ValueError("ema_decay must lie in [0, 1)")


@dataclass(frozen=True)
class TaskDistribution:
    """Seeded family of (objective, initial point) pairs.

    ``task(i)`` is a pure function of (family, seed, i).  Families:
      * ``quadratic``: one fixed random SPD quadratic, per-task random x0;
      * ``rosenbrock``: one fixed chain, per-task random x0;
      * ``robust-regression``: per-task random dataset and random (w, b);
      * ``classifier``: fixed dataset (from ``classifier_spec``), per-task
        random parameter init.
    """

    family: str
    seed: int = 0
    dim: int = 100
    condition_number: float = 1e3
    rosenbrock_a: float = 1.0
    rosenbrock_b: float = 100.0
    regression_c: float = 1.0
    classifier_spec: ClassifierSpec | None = None

    def task(self, index: int):
        rng = np.random.default_rng([self.seed, index])
        if self.family == "quadratic":
            obj = make_quadratic(
                QuadraticSpec(self.dim, self.condition_number, seed=self.seed)
            )
            return obj, rng.standard_normal(self.dim)
        if self.family == "rosenbrock":
            obj = make_rosenbrock(self.dim, self.rosenbrock_a, self.rosenbrock_b)
            return obj, rng.standard_normal(self.dim)
        if self.family == "robust-regression":
            ds = make_regression_dataset(seed=int(rng.integers(2**31)), dim=self.dim)
            obj = make_robust_regression(ds, c=self.regression_c)
            return obj, rng.standard_normal(self.dim + 1)
        if self.family == "classifier":
            if self.classifier_spec is None:
                raise ValueError("classifier family needs classifier_spec")
            spec = replace(self.classifier_spec, seed=int(rng.integers(2**31)))
            obj = make_classifier_objective(spec)
            return obj, obj.init_params(seed=int(rng.integers(2**31)))
        raise ValueError(f"unknown task family {self.family!r}")


def run_episode(obj, x0, policy, engine_cfg: EngineConfig, steps: int,
                rng: np.random.Generator):
    """Run the engine for ``steps`` outer iterations; returns (Trajectory,
    RunTrace).  Decisions only start once the stored-step list is full, so the
    warm-up iterations contribute no triples."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    cfg = replace(engine_cfg, max_outer_iters=steps, outer_grad_tol=0.0)
    trace = run(obj, x0, policy, cfg, seed=rng)
    traj = Trajectory(
        states=[d.obs for d in trace.decisions],
        actions=[d.action for d in trace.decisions],
        rewards=[d.reward for d in trace.decisions],
    )
    return traj, trace


def compute_returns(rewards, gamma: float) -> np.ndarray:
    """Suffix-discounted sums R_t = sum_{t' >= t} gamma^(t'-t) r_{t'}."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    r = np.asarray(rewards, dtype=np.float64)
    out = np.empty_like(r)
    acc = 0.0
    for t in range(r.size - 1, -1, -1):
        acc = r[t] + gamma * acc
        out[t] = acc
    return out


def ema_baseline(prev: float, observed: float, decay: float) -> float:
    """One exponential-moving-average update."""
    if not 0.0 <= decay < 1.0:
        raise ValueError("decay must lie in [0, 1)")
    return decay * prev + (1.0 - decay) * observed


class EmaBaseline:
    """One EMA of the return per time-step index, initialized at zero."""

    def __init__(self, decay: float):
        if not 0.0 <= decay < 1.0:
            raise ValueError("decay must lie in [0, 1)")
        self.decay = decay
        self.values: list[float] = []

    def _ensure(self, n: int) -> None:
        while len(self.values) < n:
            self.values.append(0.0)

    def advantages(self, batch_returns: list[np.ndarray]) -> list[np.ndarray]:
        """Subtract the current per-t baseline, then absorb the batch means."""
        n = max((len(r) for r in batch_returns), default=0)
        self._ensure(n)
        advs = [r - np.array(self.values[: len(r)]) for r in batch_returns]
        for t in range(n):
            obs = [r[t] for r in batch_returns if len(r) > t]
            self.values[t] = ema_baseline(
                self.values[t], float(np.mean(obs)), self.decay
            )
        return advs

    def state(self) -> np.ndarray:
        return np.array(self.values)

    def load(self, values) -> None:
        self.values = [float(v) for v in values]


class BatchMeanBaseline:
    """Per-time-step mean return of the current batch (no memory)."""

    def advantages(self, batch_returns: list[np.ndarray]) -> list[np.ndarray]:
        n = max((len(r) for r in batch_returns), default=0)
        means = np.zeros(n)
        for t in range(n):
            means[t] = np.mean([r[t] for r in batch_returns if len(r) > t])
        return [r - means[: len(r)] for r in batch_returns]

    def state(self) -> np.ndarray:
        return np.array([])

    def load(self, values) -> None:
        pass


class NullBaseline:
    def advantages(self, batch_returns):
        return [r.copy() for r in batch_returns]

    def state(self) -> np.ndarray:
        return np.array([])

    def load(self, values) -> None:
        pass


def make_baseline(cfg: TrainConfig):
    if cfg.baseline == "ema":
        return EmaBaseline(cfg.ema_decay)
    if cfg.baseline == "batch-mean":
        return BatchMeanBaseline()
    if cfg.baseline == "none":
        return NullBaseline()
    raise ValueError(f"unknown baseline {cfg.baseline!r}")


def reinforce_step(policy: MlpPolicy, trajectories: list[Trajectory], baseline,
                   adam: Adam, gamma: float) -> tuple[np.ndarray, str]:
    """One policy-gradient ascent step over a batch of trajectories.

    Accumulates sum_t grad log pi(a_t | s_t) * (R_t - b_t) per trajectory,
    averages over the batch, and applies one Adam step in the ascent
    direction.  Returns (new_theta, status); a non-finite gradient aborts the
    update and leaves theta untouched.
    """
    if not trajectories:
        raise ValueError("empty trajectory batch")
    returns = [compute_returns(tr.rewards, gamma) for tr in trajectories]
    advantages = baseline.advantages(returns)
    grad = np.zeros_like(policy.theta)
    for tr, adv in zip(trajectories, advantages):
        for obs, action, a in zip(tr.states, tr.actions, adv):
            grad += policy.logprob_grad_vec(obs.flat(), action) * a
    grad /= len(trajectories)
    if not np.isfinite(grad).all():
        return policy.theta, "non_finite_gradient"
    return adam.step(policy.theta, -grad), "ok"


@dataclass
class TrainResult:
    policy: MlpPolicy
    curve: list[dict] = field(default_factory=list)  # episode, mean_return, mean_final_f


def train(
    task_dist: TaskDistribution,
    cfg: TrainConfig,
    engine_cfg: EngineConfig | None = None,
    n_train_tasks: int = 10,
    out_dir=None,
    resume_from=None,
) -> TrainResult:
    """Train an MLP eviction policy; deterministic given the config seeds.

    Episode e draws its task index and all sampling randomness from a stream
    keyed by (cfg.seed, e), so interrupting and resuming from the saved
    trainer state reproduces an uninterrupted run exactly.  Empty trajectories
    (episodes too short to reach an eviction decision) skip their update.
    """
    engine_cfg = engine_cfg or EngineConfig()
    policy = MlpPolicy.for_engine(
        engine_cfg.d, engine_cfg.h, seed=cfg.seed,
        include_gradient_alpha=engine_cfg.include_gradient_alpha,
    )
    adam = Adam(cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    baseline = make_baseline(cfg)
    start_episode = 0
    curve: list[dict] = []
    if resume_from is not None:
        state = np.load(Path(resume_from), allow_pickle=True)
        policy.theta = state["theta"]
        adam.load_state(
            {"m": state["adam_m"] if state["adam_m"].size else None,
             "v": state["adam_v"] if state["adam_v"].size else None,
             "t": int(state["adam_t"])}
        )
        baseline.load(state["baseline"])
        start_episode = int(state["episode"])

    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    episode = start_episode
    while episode < cfg.episodes:
        batch: list[Trajectory] = []
        finals: list[float] = []
        for j in range(cfg.batch_size):
            rng = np.random.default_rng([cfg.seed, episode + j])
            idx = int(rng.integers(n_train_tasks))
            obj, x0 = task_dist.task(idx)
            traj, trace = run_episode(
                obj, x0, policy, engine_cfg, cfg.steps_per_episode, rng
            )
            batch.append(traj)
            finals.append(trace.final_f)
        nonempty = [tr for tr in batch if len(tr) > 0]
        if nonempty:
            policy.theta, _ = reinforce_step(policy, nonempty, baseline, adam, cfg.gamma)
        curve.append(
            {
                "episode": episode,
                "mean_return": float(np.mean([tr.total_reward for tr in batch])),
                "mean_final_f": float(np.mean(finals)),
            }
        )
        episode += cfg.batch_size
        if out is not None and cfg.checkpoint_every and (
            episode // cfg.batch_size
        ) % cfg.checkpoint_every == 0:
            _save_trainer_state(out / "train_state.npz", policy, adam, baseline, episode)
            policy.save(out / f"checkpoint_ep{episode}")

    if out is not None:
        _save_trainer_state(out / "train_state.npz", policy, adam, baseline, episode)
        policy.save(out / "policy")
        save_learning_curve(out / "learning_curve.csv", curve)
    return TrainResult(policy=policy, curve=curve)


def _save_trainer_state(path, policy, adam, baseline, episode) -> None:
    st = adam.state_dict()
    np.savez(
        path,
        theta=policy.theta,
        adam_m=st["m"] if st["m"] is not None else np.array([]),
        adam_v=st["v"] if st["v"] is not None else np.array([]),
        adam_t=st["t"],
        baseline=baseline.state(),
        episode=episode,
    )


def save_learning_curve(path, curve: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["episode", "mean_return", "mean_final_f"])
        for row in curve:
            writer.writerow(
                [row["episode"], repr(row["mean_return"]), repr(row["mean_final_f"])]
            )
