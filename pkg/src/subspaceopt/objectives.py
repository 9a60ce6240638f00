"""Benchmark objective families: random SPD quadratics, the Rosenbrock chain,
and robust linear regression over synthetic clustered datasets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .oracle import Objective, as_vector

__all__ = [
    "QuadraticSpec",
    "QuadraticObjective",
    "make_quadratic",
    "rosenbrock",
    "rosenbrock_grad",
    "RosenbrockObjective",
    "make_rosenbrock",
    "RegressionDataset",
    "make_regression_dataset",
    "save_dataset_csv",
    "load_dataset_csv",
    "robust_loss",
    "robust_loss_grad",
    "RobustRegressionObjective",
    "make_robust_regression",
]

# Synthesis constants for the regression datasets.  The cluster means are
# spread by CLUSTER_SPREAD standard deviations so the four clusters stay
# distinguishable at D=100; labels get additive N(0, LABEL_NOISE^2) noise.
CLUSTER_SPREAD = 3.0
LABEL_NOISE = 0.1
N_CLUSTERS = 4
SAMPLES_PER_CLUSTER = 25


@dataclass(frozen=True)
class QuadraticSpec:
    dim: int
    condition_number: float = 1e3
    seed: int = 0


class QuadraticObjective(Objective):
    """f(x) = 0.5 x'Ax - b'x with A symmetric positive definite."""

    def __init__(self, A: np.ndarray, b: np.ndarray):
        super().__init__(dim=b.shape[0])
        self.A = A
        self.b = b

    def _value(self, x):
        return 0.5 * x @ (self.A @ x) - self.b @ x

    def _grad(self, x):
        return self.A @ x - self.b

    def minimizer(self) -> np.ndarray:
        return np.linalg.solve(self.A, self.b)


def make_quadratic(spec: QuadraticSpec) -> QuadraticObjective:
    """Random SPD quadratic with eigenvalues spanning [1, condition_number].

    The spectrum is log-uniform with the extreme eigenvalues pinned to exactly
    1 and ``condition_number``; the eigenbasis is a seeded random orthogonal
    matrix.  ``b`` is seeded standard Gaussian.
    """
    if spec.dim < 2:
        raise ValueError("dim must be >= 2")
    if spec.condition_number < 1:
        raise ValueError("condition_number must be >= 1")
    rng = np.random.default_rng(spec.seed)
    n, cond = spec.dim, float(spec.condition_number)
    if cond == 1.0:
        A = np.eye(n)
    else:
        eigs = np.exp(rng.uniform(0.0, np.log(cond), size=n))
        eigs.sort()
        eigs[0] = 1.0
        eigs[-1] = cond
        q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        A = (q * eigs) @ q.T
        A = 0.5 * (A + A.T)
    b = rng.standard_normal(n)
    return QuadraticObjective(A, b)


def rosenbrock(x, a: float = 1.0, b: float = 100.0) -> float:
    """sum_i | b(x_{i+1} - x_i^2)^2 + (a - x_i)^2 | over i = 0..n-2.

    For a, b > 0 every summand is nonnegative, so the absolute values are
    inert and the function is the classical Rosenbrock chain.
    """
    v = as_vector(x)
    if v.shape[0] < 2:
        raise ValueError("Rosenbrock needs at least 2 coordinates")
    head, tail = v[:-1], v[1:]
    return float(np.sum(np.abs(b * (tail - head**2) ** 2 + (a - head) ** 2)))


def rosenbrock_grad(x, a: float = 1.0, b: float = 100.0) -> np.ndarray:
    v = as_vector(x)
    if v.shape[0] < 2:
        raise ValueError("Rosenbrock needs at least 2 coordinates")
    head, tail = v[:-1], v[1:]
    g = np.zeros_like(v)
    resid = tail - head**2
    g[:-1] += -4.0 * b * head * resid - 2.0 * (a - head)
    g[1:] += 2.0 * b * resid
    return g


class RosenbrockObjective(Objective):
    def __init__(self, dim: int = 100, a: float = 1.0, b: float = 100.0):
        super().__init__(dim=dim)
        self.a = float(a)
        self.b = float(b)

    def _value(self, x):
        return rosenbrock(x, self.a, self.b)

    def _grad(self, x):
        return rosenbrock_grad(x, self.a, self.b)


def make_rosenbrock(dim: int = 100, a: float = 1.0, b: float = 100.0) -> RosenbrockObjective:
    return RosenbrockObjective(dim=dim, a=a, b=b)


@dataclass(frozen=True)
class RegressionDataset:
    """n x D features and n labels; four Gaussian clusters of 25 points each."""

    features: np.ndarray
    labels: np.ndarray

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


def make_regression_dataset(seed: int, dim: int = 100) -> RegressionDataset:
    """Synthesize the clustered regression data; pure function of the seed.

    Draw order (fixed for reproducibility): cluster means, per-cluster
    samples, projection vector v, bias b0, label noise.  Labels are
    y = X v + b0 + noise.
    """
    rng = np.random.default_rng(seed)
    means = CLUSTER_SPREAD * rng.standard_normal((N_CLUSTERS, dim))
    rows = [m + rng.standard_normal((SAMPLES_PER_CLUSTER, dim)) for m in means]
    X = np.concatenate(rows, axis=0)
    v = rng.standard_normal(dim)
    b0 = rng.standard_normal()
    noise = LABEL_NOISE * rng.standard_normal(X.shape[0])
    y = X @ v + b0 + noise
    return RegressionDataset(features=X, labels=y)


def robust_loss(w, b: float, ds: RegressionDataset, c: float = 1.0) -> float:
    """(1/n) sum_i r_i^2 / (c + r_i^2) with residuals r = y - Xw - b."""
    if c <= 0:
        raise ValueError("c must be positive")
    w = as_vector(w, ds.dim)
    r = ds.labels - ds.features @ w - b
    return float(np.mean(r**2 / (c + r**2)))


def robust_loss_grad(w, b: float, ds: RegressionDataset, c: float = 1.0) -> np.ndarray:
    """Gradient over the concatenated (w, b) vector, length D+1."""
    if c <= 0:
        raise ValueError("c must be positive")
    w = as_vector(w, ds.dim)
    r = ds.labels - ds.features @ w - b
    # d/dr [r^2/(c+r^2)] = 2cr/(c+r^2)^2; dr/dw = -x, dr/db = -1
    s = 2.0 * c * r / (c + r**2) ** 2
    gw = -(ds.features.T @ s) / ds.n
    gb = -np.sum(s) / ds.n
    return np.concatenate([gw, [gb]])


def save_dataset_csv(path, ds: RegressionDataset) -> None:
    """Serialize a regression dataset as CSV (x_0..x_{D-1}, y per row)."""
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x_{i}" for i in range(ds.dim)] + ["y"])
        for row, label in zip(ds.features, ds.labels):
            writer.writerow([repr(float(v)) for v in row] + [repr(float(label))])


def load_dataset_csv(path) -> RegressionDataset:
    import csv

    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[-1] != "y":
            raise ValueError(f"{path}: not a dataset CSV")
        rows = [[float(c) for c in row] for row in reader]
    data = np.array(rows)
    return RegressionDataset(features=data[:, :-1], labels=data[:, -1])


class RobustRegressionObjective(Objective):
    """Objective over the stacked parameter vector z = (w_1..w_D, b)."""

    def __init__(self, ds: RegressionDataset, c: float = 1.0):
        if c <= 0:
            raise ValueError("c must be positive")
        super().__init__(dim=ds.dim + 1)
        self.dataset = ds
        self.c = float(c)

    def _value(self, z):
        return robust_loss(z[:-1], z[-1], self.dataset, self.c)

    def _grad(self, z):
        return robust_loss_grad(z[:-1], z[-1], self.dataset, self.c)


def make_robust_regression(ds: RegressionDataset, c: float = 1.0) -> RobustRegressionObjective:
    return RobustRegressionObjective(ds, c=c)
