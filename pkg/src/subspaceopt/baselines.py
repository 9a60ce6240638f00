"""First-order comparison baselines emitting the same trace schema as the
subspace engine: gradient descent with Armijo backtracking, and Adam with a
fixed learning rate."""

from __future__ import annotations

import time

import numpy as np

from .adam import Adam
from .oracle import NonFiniteError, Objective, as_vector
from .trace import RUN_CONVERGED, RUN_DIVERGED, RUN_ITER_LIMIT, RunTrace, TraceRecord

__all__ = ["gd_baseline", "adam_baseline"]


def gd_baseline(
    obj: Objective,
    x0,
    budget: int,
    grad_tol: float = 1e-8,
    c1: float = 1e-4,
    max_backtracks: int = 30,
) -> RunTrace:
    """Gradient descent with a backtracking Armijo line search.

    The trial step starts from twice the previously accepted step so the
    search adapts to the local scale.  Per executed iteration: one grad call
    and 1 + backtracks value calls (f(x_k) is carried over from the accepted
    trial).  On budget exhaustion the final record's grad_norm is NaN so the
    total grad count equals the iteration count exactly.
    """
    x = as_vector(x0, obj.dim).copy()
    trace = RunTrace(records=[], status=RUN_ITER_LIMIT)
    t0 = time.perf_counter()
    f = obj.value(x)
    t_prev = 1.0
    k = 0
    while True:
        if obj.stochastic and k < budget:
            obj.resample_batch()
            f = obj.value(x)
        if k >= budget:
            trace.records.append(
                TraceRecord(k, f, float("nan"), value_calls=obj.value_calls,
                            grad_calls=obj.grad_calls,
                            wall_clock=time.perf_counter() - t0)
            )
            trace.status = RUN_ITER_LIMIT
            break
        try:
            g = obj.grad(x)
        except NonFiniteError:
            trace.records.append(
                TraceRecord(k, f, float("nan"), value_calls=obj.value_calls,
                            grad_calls=obj.grad_calls,
                            wall_clock=time.perf_counter() - t0)
            )
            trace.status = RUN_DIVERGED
            break
        gnorm2 = float(np.linalg.norm(g))
        if float(np.max(np.abs(g))) <= grad_tol:
            trace.records.append(
                TraceRecord(k, f, gnorm2, value_calls=obj.value_calls,
                            grad_calls=obj.grad_calls,
                            wall_clock=time.perf_counter() - t0)
            )
            trace.status = RUN_CONVERGED
            break
        gg = float(g @ g)
        t = 2.0 * t_prev
        accepted = False
        try:
            for _ in range(1 + max_backtracks):
                f_new = obj.value(x - t * g)
                if f_new <= f - c1 * t * gg:
                    accepted = True
                    break
                t *= 0.5
        except NonFiniteError:
            trace.records.append(
                TraceRecord(k, f, gnorm2, value_calls=obj.value_calls,
                            grad_calls=obj.grad_calls,
                            wall_clock=time.perf_counter() - t0)
            )
            trace.status = RUN_DIVERGED
            break
        trace.records.append(
            TraceRecord(k, f, gnorm2, value_calls=obj.value_calls,
                        grad_calls=obj.grad_calls,
                        wall_clock=time.perf_counter() - t0)
        )
        if not accepted:
            # no descent found at the smallest trial; stop at the current point
            trace.status = RUN_ITER_LIMIT
            break
        x = x - t * g
        f = f_new
        t_prev = t
        k += 1
    return trace


def adam_baseline(obj: Objective, x0, budget: int, lr: float,
                  grad_tol: float = 1e-8) -> RunTrace:
    """Adam with a fixed learning rate; one value call (for the trace) and one
    grad call per executed iteration."""
    x = as_vector(x0, obj.dim).copy()
    opt = Adam(lr)
    trace = RunTrace(records=[], status=RUN_ITER_LIMIT)
    t0 = time.perf_counter()
    k = 0
    while True:
        if obj.stochastic and k < budget:
            obj.resample_batch()
        try:
            f = obj.value(x)
        except NonFiniteError:
            trace.records.append(
                TraceRecord(k, float("nan"), float("nan"),
                            value_calls=obj.value_calls, grad_calls=obj.grad_calls,
                            wall_clock=time.perf_counter() - t0)
            )
            trace.status = RUN_DIVERGED
            break
        if k >= budget:
            trace.records.append(
                TraceRecord(k, f, float("nan"), value_calls=obj.value_calls,
                            grad_calls=obj.grad_calls,
                            wall_clock=time.perf_counter() - t0)
            )
            trace.status = RUN_ITER_LIMIT
            break
        try:
            g = obj.grad(x)
        except NonFiniteError:
            trace.records.append(
                TraceRecord(k, f, float("nan"), value_calls=obj.value_calls,
                            grad_calls=obj.grad_calls,
                            wall_clock=time.perf_counter() - t0)
            )
            trace.status = RUN_DIVERGED
            break
        gnorm2 = float(np.linalg.norm(g))
        trace.records.append(
            TraceRecord(k, f, gnorm2, value_calls=obj.value_calls,
                        grad_calls=obj.grad_calls,
                        wall_clock=time.perf_counter() - t0)
        )
        if float(np.max(np.abs(g))) <= grad_tol:
            trace.status = RUN_CONVERGED
            break
        x = opt.step(x, g)
        k += 1
    return trace
