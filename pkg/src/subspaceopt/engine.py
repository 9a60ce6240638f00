"""Outer subspace-descent loop.

Each iteration builds a small subspace from the stored previous steps, the
mandatory current gradient and (optionally) the two classical ORTH directions
(the anchor difference x_k - x_0 and the running weighted gradient sum),
minimizes the objective over that subspace with BFGS, applies the update
x_{k+1} = x_k + P alpha, and then asks the eviction policy which stored step
to drop before the newest step is appended.

Bookkeeping invariants:
  * at most d-1 steps are stored (exactly d-1 once warmed up);
  * the step-size history is (h, d-1): row 0 holds the newest inner solution's
    coefficients, column j belongs to the stored step in slot j, and entries
    with no data yet are exactly zero;
  * the history row for the current iteration is written before the policy is
    consulted, so the policy decides with the newest coefficients in view;
  * evicting slot j deletes column j and appends a zero column for the
    incoming step, leaving every other column's history intact.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .bfgs import BfgsConfig, BfgsStatus, RestrictedProblem, bfgs_minimize
from .oracle import NonFiniteError, Objective, as_vector
from .policies import PolicyInput
from .trace import (
    RUN_CONVERGED,
    RUN_DEGENERATE,
    RUN_DIVERGED,
    RUN_ITER_LIMIT,
    RunTrace,
    TraceRecord,
)

__all__ = [
    "EngineConfig",
    "SubspaceState",
    "Subspace",
    "Decision",
    "DegenerateSubspaceError",
    "orth_weight",
    "build_subspace",
    "step",
    "run",
]


class DegenerateSubspaceError(RuntimeError):
    """Every candidate direction had zero norm (converged-degenerate state)."""


def orth_weight(j: int) -> float:
    """Weight sequence for the running gradient combination.

    w_0 = 1 and w_j = 1/2 + sqrt(1/4 + w_{j-1}^2); the sequence is strictly
    increasing, which front-loads nothing and keeps the latest gradients
    dominant in the accumulated direction.
    """
    if j < 0:
        raise ValueError("j must be nonnegative")
    w = 1.0
    for _ in range(j):
        w = 0.5 + np.sqrt(0.25 + w * w)
    return float(w)


@dataclass(frozen=True)
class EngineConfig:
    d: int = 10
    h: int = 5
    use_orth: bool = True
    normalize_directions: bool = True
    max_outer_iters: int = 1000
    outer_grad_tol: float = 1e-8
    store_steps: bool = True
    include_gradient_alpha: bool = False
    resample_stochastic: bool = True
    bfgs: BfgsConfig = field(default_factory=BfgsConfig)

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("d must be >= 2")
        if self.h < 1:
            raise ValueError("h must be >= 1")
        if self.max_outer_iters < 0:
            raise ValueError("max_outer_iters must be >= 0")

    @property
    def n_slots(self) -> int:
        """Capacity of the stored-step list."""
        return self.d - 1 if self.store_steps else 0

    @property
    def history_width(self) -> int:
        return (self.d - 1) + (1 if self.include_gradient_alpha else 0)


@dataclass
class SubspaceState:
    steps: list[np.ndarray]
    x0: np.ndarray
    weighted_grad_sum: np.ndarray
    next_orth_weight_index: int
    current_orth_weight: float
    alpha_history: np.ndarray  # (h, history_width)

    @classmethod
    def fresh(cls, x0, cfg: EngineConfig) -> "SubspaceState":
        x0 = as_vector(x0)
        return cls(
            steps=[],
            x0=x0.copy(),
            weighted_grad_sum=np.zeros_like(x0),
            next_orth_weight_index=0,
            current_orth_weight=1.0,
            alpha_history=np.zeros((cfg.h, cfg.history_width)),
        )

    def absorb_gradient(self, g: np.ndarray) -> None:
        """Add w_j * g to the weighted gradient sum and advance the weight."""
        self.weighted_grad_sum = self.weighted_grad_sum + self.current_orth_weight * g
        self.next_orth_weight_index += 1
        w = self.current_orth_weight
        self.current_orth_weight = 0.5 + float(np.sqrt(0.25 + w * w))

    def record_alpha(self, alpha: np.ndarray, kinds, cfg: EngineConfig) -> None:
        """Shift history lags down one row and write the new coefficients."""
        self.alpha_history[1:] = self.alpha_history[:-1]
        self.alpha_history[0] = 0.0
        for coeff, kind in zip(alpha, kinds):
            if kind[0] == "step":
                self.alpha_history[0, kind[1]] = coeff
            elif kind[0] == "grad" and cfg.include_gradient_alpha:
                self.alpha_history[0, -1] = coeff

    def evict(self, slot: int, cfg: EngineConfig) -> None:
        """Drop stored step ``slot``; its history column disappears and a zero
        column is opened at the newest position."""
        if not 0 <= slot < len(self.steps):
            raise ValueError(f"evicted slot {slot} out of range")
        del self.steps[slot]
        w = cfg.d - 1  # step-slot region of the history (gradient column excluded)
        self.alpha_history[:, slot : w - 1] = self.alpha_history[:, slot + 1 : w]
        self.alpha_history[:, w - 1] = 0.0


@dataclass
class Subspace:
    matrix: np.ndarray              # (n, m) columns, normalized if configured
    kinds: list[tuple]              # ("step", j) | ("grad",) | ("anchor",) | ("gradsum",)
    scales: np.ndarray              # original column norms (1.0 when not normalizing)


def build_subspace(state: SubspaceState, x, g, cfg: EngineConfig) -> Subspace:
    """Assemble the subspace columns in fixed order: stored steps (oldest
    first), gradient, anchor difference, weighted gradient sum.  Zero-norm
    columns are dropped; surviving columns are unit-normalized when
    configured, with the original norms recorded."""
    x = as_vector(x)
    candidates: list[tuple[np.ndarray, tuple]] = []
    for j, p in enumerate(state.steps):
        candidates.append((p, ("step", j)))
    candidates.append((as_vector(g, x.shape[0]), ("grad",)))
    if cfg.use_orth:
        candidates.append((x - state.x0, ("anchor",)))
        candidates.append((state.weighted_grad_sum, ("gradsum",)))
    cols, kinds, scales = [], [], []
    for v, kind in candidates:
        norm = float(np.linalg.norm(v))
        if norm == 0.0 or not np.isfinite(norm) or norm < 1e-150:
            continue
        if cfg.normalize_directions:
            cols.append(v / norm)
            scales.append(norm)
        else:
            cols.append(v)
            scales.append(1.0)
        kinds.append(kind)
    if not cols:
        raise DegenerateSubspaceError("all candidate directions have zero norm")
    return Subspace(np.column_stack(cols), kinds, np.array(scales))


@dataclass
class Decision:
    obs: PolicyInput
    action: int
    reward: float


@dataclass
class StepResult:
    x_next: np.ndarray
    f_next: float
    alpha: np.ndarray
    subspace: Subspace
    action: int | None
    probs: np.ndarray | None
    obs: PolicyInput | None
    reward: float
    reward_mode: str
    inner_status: BfgsStatus


def step(
    obj: Objective,
    x: np.ndarray,
    f_x: float,
    g_x: np.ndarray,
    state: SubspaceState,
    policy,
    cfg: EngineConfig,
    rng: np.random.Generator,
) -> StepResult:
    """One outer iteration from x with cached f(x) and gradient g(x)."""
    if cfg.use_orth:
        state.absorb_gradient(g_x)
    sub = build_subspace(state, x, g_x, cfg)
    prob = RestrictedProblem(obj, x, sub.matrix, base_value=f_x, base_grad=g_x)
    res = bfgs_minimize(prob, cfg.bfgs)
    p = sub.matrix @ res.alpha
    x_next = x + p
    f_next = res.f
    if f_x > 0.0:
        reward, reward_mode = (f_x - f_next) / f_x, "relative"
    else:
        # non-positive loss invalidates the relative form; fall back to the
        # absolute decrease and flag it
        reward, reward_mode = f_x - f_next, "absolute"

    state.record_alpha(res.alpha, sub.kinds, cfg)

    action = None
    probs = None
    obs = None
    if cfg.store_steps:
        if len(state.steps) >= cfg.n_slots:
            obs = PolicyInput(state.alpha_history.copy(), slots_filled=len(state.steps))
            probs = np.asarray(policy.probs(obs), dtype=np.float64)
            action = int(policy.select(obs, rng))
            state.evict(action, cfg)
        state.steps.append(p.copy())
    return StepResult(
        x_next, f_next, res.alpha, sub, action, probs, obs, reward, reward_mode, res.status
    )


def run(obj: Objective, x0, policy, cfg: EngineConfig, seed=0) -> RunTrace:
    """Iterate until the gradient sup-norm drops below ``outer_grad_tol`` or
    the iteration budget runs out; always returns the trace with a status.

    Stochastic objectives are re-batched at the top of each iteration (and
    f(x_k) re-evaluated on the fresh batch) so the inner solve and the reward
    see one consistent batch.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    x = as_vector(x0, obj.dim).copy()
    state = SubspaceState.fresh(x, cfg)
    decisions: list[Decision] = []
    trace = RunTrace(records=[], status=RUN_ITER_LIMIT, decisions=decisions)
    t0 = time.perf_counter()
    f = obj.value(x)
    k = 0
    while True:
        if (
            obj.stochastic
            and cfg.resample_stochastic
            and k < cfg.max_outer_iters
        ):
            obj.resample_batch()
            f = obj.value(x)
        try:
            g = obj.grad(x)
        except NonFiniteError:
            trace.records.append(
                TraceRecord(
                    k, f, float("nan"),
                    value_calls=obj.value_calls, grad_calls=obj.grad_calls,
                    wall_clock=time.perf_counter() - t0,
                )
            )
            trace.status = RUN_DIVERGED
            break
        gnorm2 = float(np.linalg.norm(g))
        if float(np.max(np.abs(g))) <= cfg.outer_grad_tol:
            trace.records.append(
                TraceRecord(
                    k, f, gnorm2,
                    value_calls=obj.value_calls, grad_calls=obj.grad_calls,
                    wall_clock=time.perf_counter() - t0,
                )
            )
            trace.status = RUN_CONVERGED
            break
        if k >= cfg.max_outer_iters:
            trace.records.append(
                TraceRecord(
                    k, f, gnorm2,
                    value_calls=obj.value_calls, grad_calls=obj.grad_calls,
                    wall_clock=time.perf_counter() - t0,
                )
            )
            trace.status = RUN_ITER_LIMIT
            break
        try:
            result = step(obj, x, f, g, state, policy, cfg, rng)
        except DegenerateSubspaceError:
            trace.records.append(
                TraceRecord(
                    k, f, gnorm2,
                    value_calls=obj.value_calls, grad_calls=obj.grad_calls,
                    wall_clock=time.perf_counter() - t0,
                )
            )
            trace.status = RUN_DEGENERATE
            break
        trace.records.append(
            TraceRecord(
                k=k,
                f=f,
                grad_norm=gnorm2,
                alpha=result.alpha,
                scales=result.subspace.scales,
                action=result.action,
                probs=result.probs,
                reward=result.reward,
                reward_mode=result.reward_mode,
                value_calls=obj.value_calls,
                grad_calls=obj.grad_calls,
                wall_clock=time.perf_counter() - t0,
            )
        )
        if result.action is not None:
            decisions.append(Decision(result.obs, result.action, result.reward))
        if result.inner_status == BfgsStatus.DIVERGED:
            trace.status = RUN_DIVERGED
            break
        x, f = result.x_next, result.f_next
        k += 1
    return trace
