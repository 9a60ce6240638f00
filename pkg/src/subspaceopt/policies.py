"""Eviction policies: given the recent history of subspace step-size
coefficients, pick which stored direction leaves the subspace.

All policies share one small interface: ``probs(obs)`` returns a distribution
over the filled step slots (one-hot for the deterministic policies, so traces
can always log per-step action probabilities) and ``select(obs, rng)`` returns
the evicted slot index.  Slot 0 is the oldest stored direction, the last slot
the newest.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "PolicyInput",
    "FifoPolicy",
    "SmallestCoefficientPolicy",
    "FixedSlotPolicy",
    "MlpPolicy",
    "sample_action",
    "greedy_action",
    "softmax",
]


@dataclass(frozen=True)
class PolicyInput:
    """Observation handed to a policy.

    ``alpha_history`` is the (h, slots) step-size history: row 0 holds the
    most recent inner solution's coefficients (one column per stored-step
    slot), row 1 the previous one, and so on; entries for slots or lags with
    no data yet are exactly zero.  ``slots_filled`` is the number of stored
    directions currently present.
    """

    alpha_history: np.ndarray
    slots_filled: int

    def flat(self) -> np.ndarray:
        """Lag-major flattening (row 0 first), the MLP input layout."""
        return np.ascontiguousarray(self.alpha_history, dtype=np.float64).ravel()


def _one_hot(index: int, n: int) -> np.ndarray:
    p = np.zeros(n)
    p[index] = 1.0
    return p


class FifoPolicy:
    """Always evict the oldest stored direction (slot 0)."""

    name = "fifo"

    def probs(self, obs: PolicyInput) -> np.ndarray:
        return _one_hot(0, obs.slots_filled)

    def select(self, obs: PolicyInput, rng=None) -> int:
        if obs.slots_filled < 1:
            raise ValueError("no filled slots to evict")
        return 0


class SmallestCoefficientPolicy:
    """Evict the slot whose most recent coefficient has the smallest absolute
    value; ties break toward the lowest index."""

    name = "rb"

    def _pick(self, obs: PolicyInput) -> int:
        if obs.slots_filled < 1:
            raise ValueError("no filled slots to evict")
        latest = np.abs(obs.alpha_history[0, : obs.slots_filled])
        return int(np.argmin(latest))

    def probs(self, obs: PolicyInput) -> np.ndarray:
        return _one_hot(self._pick(obs), obs.slots_filled)

    def select(self, obs: PolicyInput, rng=None) -> int:
        return self._pick(obs)


class FixedSlotPolicy:
    """Always evict one fixed slot index.

    Indices past the newest filled slot clamp to it, so with d-1 stored slots
    the policy indexed d-1 always removes the most recently inserted
    direction.
    """

    def __init__(self, index: int):
        if index < 0:
            raise ValueError("slot index must be nonnegative")
        self.index = int(index)
        self.name = f"delta-{self.index}"

    def _pick(self, obs: PolicyInput) -> int:
        if obs.slots_filled < 1:
            raise ValueError("no filled slots to evict")
        return min(self.index, obs.slots_filled - 1)

    def probs(self, obs: PolicyInput) -> np.ndarray:
        return _one_hot(self._pick(obs), obs.slots_filled)

    def select(self, obs: PolicyInput, rng=None) -> int:
        return self._pick(obs)


def softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - np.max(z))
    return e / e.sum()


def sample_action(probs: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF sample from a probability vector."""
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("not a probability vector")
    u = rng.random()
    return int(min(np.searchsorted(np.cumsum(p), u, side="right"), p.size - 1))


def greedy_action(probs: np.ndarray) -> int:
    """Argmax with lowest-index tie-break."""
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("not a probability vector")
    return int(np.argmax(p))


class MlpPolicy:
    """Stochastic eviction policy: a fully connected network with two tanh
    hidden layers and a softmax output over the eviction slots.

    The flat parameter vector concatenates, in order and row-major,
    W1 (n1, n_in), b1, W2 (n2, n1), b2, W3 (n_out, n2), b3 with each weight
    matrix laid out (outputs, inputs).
    """

    def __init__(
        self,
        layer_sizes,
        theta: np.ndarray,
        d: int | None = None,
        h: int | None = None,
        greedy: bool = False,
    ):
        self.layer_sizes = tuple(int(s) for s in layer_sizes)
        if len(self.layer_sizes) < 2:
            raise ValueError("need at least input and output layer sizes")
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.n_params(self.layer_sizes),):
            raise ValueError(
                f"theta has {theta.shape}, expected ({self.n_params(self.layer_sizes)},)"
            )
        self.theta = theta
        self.d = d
        self.h = h
        self.greedy = bool(greedy)
        self.name = "learned-greedy" if greedy else "learned"

    @staticmethod
    def n_params(layer_sizes) -> int:
        return sum(
            n_out * n_in + n_out for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:])
        )

    @classmethod
    def initialize(
        cls,
        input_dim: int,
        n_actions: int,
        hidden=(128, 128),
        seed: int = 0,
        d: int | None = None,
        h: int | None = None,
    ) -> "MlpPolicy":
        """Scaled-uniform fan-in init for hidden layers; zero output layer so
        the starting policy is exactly uniform."""
        sizes = (input_dim, *hidden, n_actions)
        rng = np.random.default_rng(seed)
        chunks = []
        for li, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            last = li == len(sizes) - 2
            if last:
                chunks.append(np.zeros(n_out * n_in + n_out))
            else:
                bound = 1.0 / np.sqrt(n_in)
                chunks.append(rng.uniform(-bound, bound, size=n_out * n_in + n_out))
        return cls(sizes, np.concatenate(chunks), d=d, h=h)

    @classmethod
    def for_engine(cls, d: int, h: int, seed: int = 0, hidden=(128, 128),
                   include_gradient_alpha: bool = False) -> "MlpPolicy":
        width = (d - 1) + (1 if include_gradient_alpha else 0)
        return cls.initialize(h * width, d - 1, hidden=hidden, seed=seed, d=d, h=h)

    # -- forward / backward --------------------------------------------------
    def _layers(self, theta):
        o = 0
        for n_in, n_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            W = theta[o : o + n_out * n_in].reshape(n_out, n_in)
            o += n_out * n_in
            b = theta[o : o + n_out]
            o += n_out
            yield W, b

    def forward_vec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.layer_sizes[0],):
            raise ValueError(f"input has shape {x.shape}, expected ({self.layer_sizes[0]},)")
        if not np.isfinite(self.theta).all():
            raise ValueError("non-finite policy parameters")
        a = x
        layers = list(self._layers(self.theta))
        for W, b in layers[:-1]:
            a = np.tanh(W @ a + b)
        W, b = layers[-1]
        return softmax(W @ a + b)

    def logprob_grad_vec(self, x: np.ndarray, action: int) -> np.ndarray:
        """Exact gradient of log pi(action | x) with respect to theta."""
        x = np.asarray(x, dtype=np.float64)
        layers = list(self._layers(self.theta))
        acts = [x]
        a = x
        for W, b in layers[:-1]:
            a = np.tanh(W @ a + b)
            acts.append(a)
        W, b = layers[-1]
        p = softmax(W @ a + b)
        if not 0 <= action < p.size:
            raise ValueError(f"action {action} out of range")
        # d log p[a] / d logits = onehot(a) - p
        delta = -p
        delta[action] += 1.0
        grads = [None] * len(layers)
        for li in range(len(layers) - 1, -1, -1):
            W, _ = layers[li]
            a_in = acts[li]
            gW = np.outer(delta, a_in)
            gb = delta.copy()
            grads[li] = (gW, gb)
            if li > 0:
                delta = (W.T @ delta) * (1.0 - acts[li] ** 2)  # through tanh
        flat = np.concatenate([np.concatenate([gW.ravel(), gb]) for gW, gb in grads])
        if not np.isfinite(flat).all():
            raise ValueError("non-finite gradient")
        return flat

    # -- policy interface ----------------------------------------------------
    def probs(self, obs: PolicyInput) -> np.ndarray:
        return self.forward_vec(obs.flat())

    def select(self, obs: PolicyInput, rng: np.random.Generator | None = None) -> int:
        p = self.probs(obs)
        if self.greedy:
            return greedy_action(p)
        if rng is None:
            raise ValueError("sampling mode needs an rng")
        return sample_action(p, rng)

    # -- checkpoint io --------------------------------------------------------
    def save(self, path) -> tuple[Path, Path]:
        """Write ``<path>.bin`` (flat little-endian float64) and ``<path>.json``.

        The sidecar pins everything needed to reload the checkpoint in any
        implementation: layer sizes, the parameter order, the weight layout,
        the observation flattening, and the engine geometry (d, h).
        """
        base = Path(path)
        if base.suffix == ".bin":
            base = base.with_suffix("")
        bin_path = base.with_suffix(".bin")
        json_path = base.with_suffix(".json")
        self.theta.astype("<f8").tofile(bin_path)
        meta = {
            "format": "subspaceopt-policy-v1",
            "dtype": "float64-le",
            "layer_sizes": list(self.layer_sizes),
            "param_order": "W1,b1,W2,b2,...",
            "weight_layout": "row-major (n_out, n_in)",
            "input_flattening": "alpha history flattened lag-major (most recent lag first)",
            "hidden_activation": "tanh",
            "output": "softmax",
            "d": self.d,
            "h": self.h,
        }
        json_path.write_text(json.dumps(meta, indent=2) + "\n")
        return bin_path, json_path

    @classmethod
    def load(cls, path, greedy: bool = False) -> "MlpPolicy":
        base = Path(path)
        if base.suffix in (".bin", ".json"):
            base = base.with_suffix("")
        meta = json.loads(base.with_suffix(".json").read_text())
        if meta.get("format") != "subspaceopt-policy-v1":
            raise ValueError(f"unrecognized checkpoint format in {base}.json")
        theta = np.fromfile(base.with_suffix(".bin"), dtype="<f8")
        return cls(
            meta["layer_sizes"],
            theta,
            d=meta.get("d"),
            h=meta.get("h"),
            greedy=greedy,
        )
