"""Minibatch-stochastic objective: softmax cross-entropy of a one-hidden-layer
ReLU network, with the parameter vector laid out as (W1, b1, W2, b2)."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .oracle import Objective

__all__ = ["ClassifierSpec", "ClassifierObjective", "make_classifier_objective"]


@dataclass
class ClassifierSpec:
    """Dataset plus architecture for the classification objective.

    ``images`` is (N, F) with pixels in [0, 1]; ``labels`` holds raw digit
    values, all of which must belong to ``digit_subset``.  Class indices are
    the positions of the digits in the sorted subset.
    """

    images: np.ndarray
    labels: np.ndarray
    digit_subset: tuple[int, ...] = field(default_factory=lambda: (0, 1, 2, 3, 4))
    hidden_units: int = 10
    batch_size: int = 8192
    seed: int = 0


class ClassifierObjective(Objective):
    """Stochastic oracle over the flat parameter vector of the network.

    Parameter layout (row-major flattening, in this order):
      W1 (F, H), b1 (H,), W2 (H, C), b2 (C,)
    so dim = F*H + H + H*C + C.

    ``value``/``grad`` evaluate on the current minibatch, which changes only
    when :meth:`resample_batch` is called, so one outer iteration's value,
    gradient, and follow-up value all see the same batch.
    """

    def __init__(self, spec: ClassifierSpec):
        if len(spec.digit_subset) == 0:
            raise ValueError("digit_subset must be nonempty")
        digits = tuple(sorted(set(spec.digit_subset)))
        images = np.asarray(spec.images, dtype=np.float64)
        labels = np.asarray(spec.labels).astype(np.int64)
        if images.ndim != 2 or images.shape[0] != labels.shape[0]:
            raise ValueError("images must be (N, F) aligned with labels")
        mask = np.isin(labels, digits)
        images, labels = images[mask], labels[mask]
        if images.shape[0] == 0:
            raise ValueError("dataset has no examples from digit_subset")
        class_of = {d: i for i, d in enumerate(digits)}
        targets = np.array([class_of[d] for d in labels], dtype=np.int64)

        self.n_features = images.shape[1]
        self.n_hidden = int(spec.hidden_units)
        self.n_classes = len(digits)
        F, H, C = self.n_features, self.n_hidden, self.n_classes
        super().__init__(dim=F * H + H + H * C + C, stochastic=True)

        self.digits = digits
        self.images = images
        self.targets = targets
        batch = int(spec.batch_size)
        if batch > images.shape[0]:
            warnings.warn(
                f"batch_size {batch} exceeds dataset size {images.shape[0]}; "
                "clamping to the full dataset",
                stacklevel=2,
            )
            batch = images.shape[0]
        if batch < 1:
            raise ValueError("batch_size must be >= 1")
        self.batch_size = batch
        self._batch_rng = np.random.default_rng(spec.seed)
        self._batch_idx = np.arange(batch)

    # -- parameter vector layout -------------------------------------------
    def unpack(self, theta: np.ndarray):
        F, H, C = self.n_features, self.n_hidden, self.n_classes
        o = 0
        W1 = theta[o : o + F * H].reshape(F, H)
        o += F * H
        b1 = theta[o : o + H]
        o += H
        W2 = theta[o : o + H * C].reshape(H, C)
        o += H * C
        b2 = theta[o : o + C]
        return W1, b1, W2, b2

    def init_params(self, seed: int = 0, scale: float = 0.1) -> np.ndarray:
        """Random N(0, scale^2) parameter vector."""
        rng = np.random.default_rng(seed)
        return scale * rng.standard_normal(self.dim)

    # -- minibatch management ----------------------------------------------
    def resample_batch(self, rng: np.random.Generator | None = None) -> None:
        """Draw a fresh minibatch (without replacement) from the dataset."""
        gen = rng if rng is not None else self._batch_rng
        self._batch_idx = gen.choice(
            self.images.shape[0], size=self.batch_size, replace=False
        )

    # -- cross-entropy forward/backward --------------------------------------
    def _loss_and_grad(self, theta, idx, want_grad):
        X = self.images[idx]
        y = self.targets[idx]
        W1, b1, W2, b2 = self.unpack(theta)
        Z1 = X @ W1 + b1
        A1 = np.maximum(Z1, 0.0)
        Z2 = A1 @ W2 + b2
        # stable log-softmax
        zmax = Z2.max(axis=1, keepdims=True)
        Zs = Z2 - zmax
        log_norm = np.log(np.exp(Zs).sum(axis=1))
        loss = float(np.mean(log_norm - Zs[np.arange(len(y)), y]))
        if not want_grad:
            return loss, None
        P = np.exp(Zs)
        P /= P.sum(axis=1, keepdims=True)
        P[np.arange(len(y)), y] -= 1.0
        P /= len(y)
        gW2 = A1.T @ P
        gb2 = P.sum(axis=0)
        dA1 = P @ W2.T
        dZ1 = dA1 * (Z1 > 0.0)
        gW1 = X.T @ dZ1
        gb1 = dZ1.sum(axis=0)
        grad = np.concatenate([gW1.ravel(), gb1, gW2.ravel(), gb2])
        return loss, grad

    def _value(self, theta):
        loss, _ = self._loss_and_grad(theta, self._batch_idx, want_grad=False)
        return loss

    def _grad(self, theta):
        _, grad = self._loss_and_grad(theta, self._batch_idx, want_grad=True)
        return grad

    def full_batch_value(self, theta) -> float:
        """Cross-entropy over the whole dataset; counts as one value call and
        leaves the minibatch untouched."""
        v = self._check_input(theta)
        self.value_calls += 1
        loss, _ = self._loss_and_grad(v, slice(None), want_grad=False)
        return loss


def make_classifier_objective(spec: ClassifierSpec) -> ClassifierObjective:
    return ClassifierObjective(spec)
