"""Counted first-order oracle: objective values, gradients, and call accounting.

Every optimizer in this package consumes objectives exclusively through
:class:`Objective`, which validates inputs, rejects non-finite values at the
boundary, and counts every value/gradient evaluation.  The counters are the
cost metric the benchmark harness reports.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

__all__ = [
    "NonFiniteError",
    "Objective",
    "FunctionObjective",
    "as_vector",
    "finite_diff_grad",
]


class NonFiniteError(ArithmeticError):
    """An oracle produced a NaN or infinite result (divergence signal)."""


def as_vector(x, dim: int | None = None) -> np.ndarray:
    """Coerce to a 1-d float64 array, optionally checking its length."""
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-d vector, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise ValueError(f"dimension mismatch: expected {dim}, got {v.shape[0]}")
    return v


class Objective:
    """A counted value/gradient oracle over R^n.

    Subclasses implement ``_value`` and ``_grad``; the public ``value`` and
    ``grad`` wrappers validate dimensions, reject non-finite inputs, increment
    the call counters (exactly one per call), and raise :class:`NonFiniteError`
    when an evaluation comes back NaN/Inf.

    Instances carry mutable counters and therefore must not be shared across
    concurrent callers.
    """

    def __init__(self, dim: int, stochastic: bool = False):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = int(dim)
        self.stochastic = bool(stochastic)
        self.value_calls = 0
        self.grad_calls = 0

    def _value(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def _grad(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _check_input(self, x) -> np.ndarray:
        v = as_vector(x, self.dim)
        if not np.isfinite(v).all():
            raise ValueError("non-finite input to oracle")
        return v

    def value(self, x) -> float:
        v = self._check_input(x)
        self.value_calls += 1
        f = float(self._value(v))
        if not np.isfinite(f):
            raise NonFiniteError(f"objective value is non-finite: {f!r}")
        return f

    def grad(self, x) -> np.ndarray:
        v = self._check_input(x)
        self.grad_calls += 1
        g = np.asarray(self._grad(v), dtype=np.float64)
        if g.shape != (self.dim,):
            raise ValueError(f"gradient has shape {g.shape}, expected ({self.dim},)")
        if not np.isfinite(g).all():
            raise NonFiniteError("gradient is non-finite")
        return g

    def read_counters(self) -> tuple[int, int]:
        return (self.value_calls, self.grad_calls)

    def reset_counters(self) -> None:
        self.value_calls = 0
        self.grad_calls = 0


class FunctionObjective(Objective):
    """Objective built from plain ``value_fn`` / ``grad_fn`` callables."""

    def __init__(
        self,
        dim: int,
        value_fn: Callable[[np.ndarray], float],
        grad_fn: Callable[[np.ndarray], np.ndarray],
        stochastic: bool = False,
    ):
        super().__init__(dim, stochastic=stochastic)
        self._value_fn = value_fn
        self._grad_fn = grad_fn

    def _value(self, x):
        return self._value_fn(x)

    def _grad(self, x):
        return self._grad_fn(x)


def finite_diff_grad(obj: Objective, x, eps: float | None = None) -> np.ndarray:
    """Central-difference gradient, the test oracle for analytic gradients.

    Component i is (f(x + e_i*h_i) - f(x - e_i*h_i)) / (2*h_i) with
    h_i = ``eps`` if given, else 1e-6 * (1 + |x_i|).  Costs 2n value calls and
    no grad calls.
    """
    v = as_vector(x, obj.dim)
    if eps is not None and eps <= 0:
        raise ValueError("eps must be positive")
    g = np.empty(obj.dim)
    for i in range(obj.dim):
        h = eps if eps is not None else 1e-6 * (1.0 + abs(v[i]))
        xp = v.copy()
        xm = v.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (obj.value(xp) - obj.value(xm)) / (2.0 * h)
    return g
