"""Subspace optimization with pluggable direction-eviction policies.

The engine minimizes f over a small per-iteration subspace (stored previous
steps, the current gradient, and optionally two classical worst-case-optimal
directions), and delegates the choice of which stored step to drop each
iteration to a policy: FIFO, the smallest-coefficient rule, a fixed slot, or
an MLP trained with REINFORCE on the history of subspace step sizes.
"""

from .bfgs import BfgsConfig, BfgsResult, BfgsStatus, RestrictedProblem, bfgs_minimize, restrict
from .engine import EngineConfig, SubspaceState, build_subspace, orth_weight, run, step
from .oracle import FunctionObjective, NonFiniteError, Objective, finite_diff_grad
from .policies import (
    FifoPolicy,
    FixedSlotPolicy,
    MlpPolicy,
    PolicyInput,
    SmallestCoefficientPolicy,
    greedy_action,
    sample_action,
)
from .trace import RunTrace, TraceRecord, read_trace_csv, write_trace_csv
from .training import (
    TaskDistribution,
    TrainConfig,
    Trajectory,
    compute_returns,
    reinforce_step,
    run_episode,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "BfgsConfig",
    "BfgsResult",
    "BfgsStatus",
    "EngineConfig",
    "FifoPolicy",
    "FixedSlotPolicy",
    "FunctionObjective",
    "MlpPolicy",
    "NonFiniteError",
    "Objective",
    "PolicyInput",
    "RestrictedProblem",
    "RunTrace",
    "SmallestCoefficientPolicy",
    "SubspaceState",
    "TaskDistribution",
    "TraceRecord",
    "TrainConfig",
    "Trajectory",
    "bfgs_minimize",
    "build_subspace",
    "compute_returns",
    "finite_diff_grad",
    "greedy_action",
    "orth_weight",
    "read_trace_csv",
    "reinforce_step",
    "restrict",
    "run",
    "run_episode",
    "sample_action",
    "step",
    "train",
    "write_trace_csv",
]
