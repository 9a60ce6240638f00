"""Per-iteration run records and their CSV serialization.

CSV schema (one row per outer iteration, identical across optimizers):

    k, f, grad_norm, alpha_0..alpha_{M-1}, action, value_calls, grad_calls
    [, prob_0..prob_{A-1}]

``alpha_*`` holds the inner solution over the subspace columns in build order
(stored steps oldest to newest, gradient, anchor difference, weighted gradient
sum); unused cells are empty, as are ``action``/``prob_*`` on iterations with
no eviction decision and the ``alpha_*``/``action`` columns of first-order
baselines.  ``value_calls``/``grad_calls`` are cumulative at the end of the
iteration.  Wall-clock time is kept on the in-memory records only so reruns
of the same spec serialize byte-identically.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = ["TraceRecord", "RunTrace", "write_trace_csv", "read_trace_csv", "write_aggregate_csv"]

RUN_CONVERGED = "converged"
RUN_ITER_LIMIT = "iter_limit"
RUN_DIVERGED = "diverged"
RUN_DEGENERATE = "degenerate"


@dataclass
class TraceRecord:
    k: int
    f: float
    grad_norm: float
    alpha: np.ndarray | None = None
    scales: np.ndarray | None = None   # column norms used for normalization
    action: int | None = None
    probs: np.ndarray | None = None
    reward: float | None = None
    reward_mode: str | None = None     # "relative" or "absolute" (fallback)
    value_calls: int = 0
    grad_calls: int = 0
    wall_clock: float = 0.0


@dataclass
class RunTrace:
    records: list[TraceRecord] = field(default_factory=list)
    status: str = RUN_ITER_LIMIT
    decisions: list = field(default_factory=list)  # (obs, action, reward) per eviction

    @property
    def final_f(self) -> float:
        return self.records[-1].f

    @property
    def iterations(self) -> int:
        return len(self.records) - 1

    def f_values(self) -> np.ndarray:
        return np.array([r.f for r in self.records])

    def assert_monotone(self, tol: float = 1e-12) -> None:
        fs = self.f_values()
        bad = np.nonzero(fs[1:] > fs[:-1] + tol)[0]
        if bad.size:
            k = int(bad[0])
            raise AssertionError(
                f"objective increased at iteration {k}: {fs[k]!r} -> {fs[k + 1]!r}"
            )


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float) and not np.isfinite(x):
        return "nan"
    return repr(float(x))


def trace_header(n_alpha: int, n_probs: int = 0) -> list[str]:
    cols = ["k", "f", "grad_norm"]
    cols += [f"alpha_{i}" for i in range(n_alpha)]
    cols += ["action", "value_calls", "grad_calls"]
    cols += [f"prob_{i}" for i in range(n_probs)]
    return cols


def write_trace_csv(path, trace: RunTrace, n_alpha: int | None = None,
                    n_probs: int | None = None) -> None:
    if n_alpha is None:
        n_alpha = max((0 if r.alpha is None else len(r.alpha)) for r in trace.records)
    if n_probs is None:
        n_probs = max((0 if r.probs is None else len(r.probs)) for r in trace.records)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(trace_header(n_alpha, n_probs))
        for r in trace.records:
            alpha = [] if r.alpha is None else list(r.alpha)
            probs = [] if r.probs is None else list(r.probs)
            row = [str(r.k), _fmt(r.f), _fmt(r.grad_norm)]
            row += [_fmt(a) for a in alpha] + [""] * (n_alpha - len(alpha))
            row.append("" if r.action is None else str(r.action))
            row += [str(r.value_calls), str(r.grad_calls)]
            row += [_fmt(p) for p in probs] + [""] * (n_probs - len(probs))
            writer.writerow(row)


def read_trace_csv(path) -> dict[str, list]:
    """Read a trace CSV back as a dict of columns (floats where parseable,
    None for empty cells)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        cols: dict[str, list] = {name: [] for name in header}
        for row in reader:
            for name, cell in zip(header, row):
                if cell == "":
                    cols[name].append(None)
                elif name in ("k", "action", "value_calls", "grad_calls"):
                    cols[name].append(int(cell))
                else:
                    cols[name].append(float(cell))
    return cols


def write_aggregate_csv(path, traces: list[RunTrace]) -> None:
    """Per-iteration mean/median/std of f plus mean cumulative call counts.

    Rows cover iteration indices present in every trace (the common prefix),
    so aggregates stay averages over the full seed set.
    """
    if not traces:
        raise ValueError("no traces to aggregate")
    n = min(len(t.records) for t in traces)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["k", "f_mean", "f_median", "f_std", "value_calls_mean", "grad_calls_mean"]
        )
        for k in range(n):
            fs = np.array([t.records[k].f for t in traces])
            vs = np.array([t.records[k].value_calls for t in traces], dtype=np.float64)
            gs = np.array([t.records[k].grad_calls for t in traces], dtype=np.float64)
            writer.writerow(
                [
                    str(k),
                    _fmt(fs.mean()),
                    _fmt(float(np.median(fs))),
                    _fmt(fs.std()),
                    _fmt(vs.mean()),
                    _fmt(gs.mean()),
                ]
            )
