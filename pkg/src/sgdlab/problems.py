"""Stochastic objectives: per-sample costs, gradients, sampling, and closed-form oracles.

A problem models a nonnegative cost c(theta, x) over i.i.d. samples x, with the
risk e(theta) = E[c(theta, X)] as the true objective. Sampling is vectorized;
every random draw goes through an explicitly passed numpy Generator (PCG64),
so runs are reproducible from a 64-bit seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Optional

import numpy as np

from .errors import ConfigurationError

Array = np.ndarray


@dataclass(frozen=True)
class Oracle:
    """Closed-form ground truth, where the problem admits one.

    Absent fields are None. When `minimizer` is set, true_risk(minimizer)
    equals min_risk to within 1e-12.
    """

    true_risk: Optional[Callable[[Array], float]] = None
    true_cv: Optional[Callable[[Array], float]] = None
    minimizer: Optional[Array] = None
    min_risk: Optional[float] = None


@dataclass(frozen=True)
class Minibatch:
    """k samples drawn in one iteration, with their per-sample costs and the
    mean gradient, both evaluated at the theta current when they were drawn."""

    samples: Any
    costs: Array
    mean_gradient: Array

    @property
    def k(self) -> int:
        return int(self.costs.shape[0])


class Problem:
    """Base for stochastic objectives. Immutable after construction; sampling
    requires a caller-owned Generator, so parallel runs use independent streams."""

    name: str = "problem"
    dim: int = 1
    oracle: Oracle = Oracle()

    def sample(self, rng: np.random.Generator, n: int):
        """Draw n i.i.d. samples; returns a problem-specific batch payload."""
        raise NotImplementedError

    def costs(self, theta: Array, samples) -> Array:
        """Per-sample costs c(theta, x_j), shape (n,)."""
        raise NotImplementedError

    def mean_gradient(self, theta: Array, samples) -> Array:
        """Arithmetic mean of the per-sample gradients at theta, shape (dim,)."""
        raise NotImplementedError

    def n_samples(self, samples) -> int:
        raise NotImplementedError

    def subset(self, samples, idx):
        """Select samples by integer index array / slice (for epoch shuffling)."""
        raise NotImplementedError


def _as_theta(theta, dim: int) -> Array:
    t = np.asarray(theta, dtype=float).reshape(-1)
    if t.shape != (dim,):
        raise ConfigurationError(f"parameter vector has shape {t.shape}, expected ({dim},)")
    if not np.all(np.isfinite(t)):
        raise ConfigurationError("parameter vector has non-finite entries")
    return t


def draw_minibatch(problem: Problem, theta, k: int, rng: np.random.Generator) -> Minibatch:
    """Draw k fresh i.i.d. samples and evaluate costs and mean gradient at theta."""
    if k < 1:
        raise ConfigurationError(f"minibatch size must be >= 1, got {k}")
    samples = problem.sample(rng, int(k))
    return evaluate_minibatch(problem, theta, samples)


def evaluate_minibatch(problem: Problem, theta, samples) -> Minibatch:
    """Build a Minibatch from pre-drawn samples (used by epoch partitioning)."""
    t = _as_theta(theta, problem.dim)
    return Minibatch(
        samples=samples,
        costs=problem.costs(t, samples),
        mean_gradient=problem.mean_gradient(t, samples),
    )


# ---------------------------------------------------------------------------
# Scalar quadratic cost on a symmetric +/-1 sample ("Rademacher" problem).
#
#   c(theta, x) = (theta - x)^2,  x in {+1, -1} equiprobable
#   e(theta)    = theta^2 + 1
#   sigma(theta)= 2|theta|
#   CV(theta)   = 2|theta| / (theta^2 + 1)
# ---------------------------------------------------------------------------

def rademacher_sample(rng: np.random.Generator) -> float:
    """One draw of the symmetric +/-1 variable; deterministic given seed and draw index."""
    return float(rng.integers(0, 2) * 2 - 1)


def _scalar(theta) -> float:
    t = np.asarray(theta, dtype=float).reshape(-1)
    if t.shape[0] != 1:
        raise ConfigurationError(f"expected a scalar parameter, got shape {t.shape}")
    return float(t[0])


def rademacher_cost(theta, x: float) -> float:
    """(theta - x)^2 for a single sample."""
    t = _scalar(theta)
    return (t - x) ** 2


def rademacher_grad(theta, x: float) -> Array:
    """d/dtheta (theta - x)^2 = 2(theta - x)."""
    t = _scalar(theta)
    return np.array([2.0 * (t - x)])


def rademacher_oracle() -> Oracle:
    """Closed forms: risk theta^2+1, std 2|theta|, CV 2|theta|/(theta^2+1), minimum 1 at 0."""
    return Oracle(
        true_risk=lambda th: _scalar(th) ** 2 + 1.0,
        true_cv=lambda th: 2.0 * abs(_scalar(th)) / (_scalar(th) ** 2 + 1.0),
        minimizer=np.array([0.0]),
        min_risk=1.0,
    )


class RademacherProblem(Problem):
    """Scalar squared-distance cost to a random +/-1 target."""

    name = "rademacher"
    dim = 1

    def __init__(self):
        self.oracle = rademacher_oracle()

    def sample(self, rng: np.random.Generator, n: int) -> Array:
        return rng.integers(0, 2, size=n).astype(float) * 2.0 - 1.0

    def costs(self, theta: Array, samples: Array) -> Array:
        return (theta[0] - samples) ** 2

    def mean_gradient(self, theta: Array, samples: Array) -> Array:
        return np.array([float(np.mean(2.0 * (theta[0] - samples)))])

    def n_samples(self, samples: Array) -> int:
        return int(samples.shape[0])

    def subset(self, samples: Array, idx) -> Array:
        return samples[idx]


# ---------------------------------------------------------------------------
# Linear least squares on Gaussian features: an exactly conditioned,
# multi-dimensional quadratic testbed.
# ---------------------------------------------------------------------------

class LeastSquaresProblem(Problem):
    """Squared residual of a linear model on Gaussian features.

    Features have diagonal covariance diag(eigenvalues) with eigenvalues
    log-spaced between 1 and condition_number, so the risk is the quadratic

        e(theta) = sum_j eigenvalues_j (theta_j - w_star_j)^2 + noise_std^2

    with an exactly known condition number and minimizer.
    """

    name = "least_squares"

    def __init__(self, dim: int, condition_number: float, noise_std: float, seed: int):
        if dim < 1:
            raise ConfigurationError(f"dim must be >= 1, got {dim}")
        if condition_number < 1.0:
            raise ConfigurationError(
                f"condition_number must be >= 1, got {condition_number}")
        if noise_std < 0.0:
            raise ConfigurationError(f"noise_std must be >= 0, got {noise_std}")
        self.dim = int(dim)
        self.condition_number = float(condition_number)
        self.noise_std = float(noise_std)
        self.eigenvalues = np.geomspace(1.0, self.condition_number, self.dim)
        rng = np.random.default_rng(seed)
        self.w_star = rng.standard_normal(self.dim)
        self._feature_scale = np.sqrt(self.eigenvalues)
        self.oracle = Oracle(
            true_risk=self._risk,
            true_cv=self._cv,
            minimizer=self.w_star.copy(),
            min_risk=self.noise_std ** 2,
        )

    def _residual_var(self, theta: Array) -> float:
        delta = np.asarray(theta, dtype=float).reshape(-1) - self.w_star
        return float(np.dot(self.eigenvalues, delta * delta) + self.noise_std ** 2)

    def _risk(self, theta) -> float:
        return self._residual_var(np.asarray(theta, dtype=float).reshape(-1))

    def _cv(self, theta) -> float:
        # residual is Gaussian, so the cost is s^2 * chi^2_1: CV = sqrt(2)
        # wherever the residual variance is positive.
        if self._residual_var(np.asarray(theta, dtype=float).reshape(-1)) == 0.0:
            return 0.0
        return float(np.sqrt(2.0))

    def risk_gradient(self, theta) -> Array:
        """Exact gradient of the risk: 2 * eigenvalues * (theta - w_star)."""
        delta = np.asarray(theta, dtype=float).reshape(-1) - self.w_star
        return 2.0 * self.eigenvalues * delta

    def sample(self, rng: np.random.Generator, n: int):
        features = rng.standard_normal((n, self.dim)) * self._feature_scale
        targets = features @ self.w_star
        if self.noise_std > 0.0:
            targets = targets + self.noise_std * rng.standard_normal(n)
        return features, targets

    def costs(self, theta: Array, samples) -> Array:
        features, targets = samples
        r = features @ theta - targets
        return r * r

    def mean_gradient(self, theta: Array, samples) -> Array:
        features, targets = samples
        r = features @ theta - targets
        return (2.0 / r.shape[0]) * (features.T @ r)

    def n_samples(self, samples) -> int:
        return int(samples[0].shape[0])

    def subset(self, samples, idx):
        features, targets = samples
        return features[idx], targets[idx]


def least_squares_problem(dim: int, condition_number: float, noise_std: float,
                          seed: int) -> LeastSquaresProblem:
    return LeastSquaresProblem(dim, condition_number, noise_std, seed)


# ---------------------------------------------------------------------------
# Linear-softmax classification on class-conditional Gaussian blobs.
# ---------------------------------------------------------------------------

class LogisticBlobsProblem(Problem):
    """Multinomial logistic regression on Gaussian blobs.

    Samples are (features, label) with features drawn from a unit-covariance
    Gaussian centered at the label's mean; class means sit at distance
    `separation` from the origin. The cost is the negative log of the
    probability the linear-softmax model assigns to the correct class.

    Parameters are a flat vector of length n_classes * (n_features + 1):
    the weight matrix (n_classes, n_features) row-major, then the biases.
    A fixed held-out test set (test_per_class per class) is generated at
    construction for accuracy and test-risk curves.
    """

    name = "logistic"

    def __init__(self, dim: int, n_classes: int, separation: float, seed: int,
                 test_per_class: int = 500):
        if dim < 1:
            raise ConfigurationError(f"dim must be >= 1, got {dim}")
        if n_classes < 2:
            raise ConfigurationError(f"n_classes must be >= 2, got {n_classes}")
        if separation < 0.0:
            raise ConfigurationError(f"separation must be >= 0, got {separation}")
        self.n_features = int(dim)
        self.n_classes = int(n_classes)
        self.separation = float(separation)
        self.dim = self.n_classes * (self.n_features + 1)
        self.oracle = Oracle()
        rng = np.random.default_rng(seed)
        raw = rng.standard_normal((self.n_classes, self.n_features))
        norms = np.linalg.norm(raw, axis=1, keepdims=True)
        self.class_means = self.separation * raw / norms
        test_labels = np.repeat(np.arange(self.n_classes), test_per_class)
        test_features = (self.class_means[test_labels]
                         + rng.standard_normal((test_labels.shape[0], self.n_features)))
        self._test_set = (test_features, test_labels)

    def _unpack(self, theta: Array):
        nw = self.n_classes * self.n_features
        weights = theta[:nw].reshape(self.n_classes, self.n_features)
        biases = theta[nw:]
        return weights, biases

    def _log_probs(self, theta: Array, features: Array) -> Array:
        weights, biases = self._unpack(theta)
        logits = features @ weights.T + biases
        shifted = logits - logits.max(axis=1, keepdims=True)
        return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))

    def sample(self, rng: np.random.Generator, n: int):
        labels = rng.integers(0, self.n_classes, size=n)
        features = self.class_means[labels] + rng.standard_normal((n, self.n_features))
        return features, labels

    def costs(self, theta: Array, samples) -> Array:
        features, labels = samples
        lp = self._log_probs(theta, features)
        return -lp[np.arange(labels.shape[0]), labels]

    def mean_gradient(self, theta: Array, samples) -> Array:
        features, labels = samples
        n = labels.shape[0]
        probs = np.exp(self._log_probs(theta, features))
        probs[np.arange(n), labels] -= 1.0
        grad_w = probs.T @ features / n
        grad_b = probs.mean(axis=0)
        return np.concatenate([grad_w.ravel(), grad_b])

    def n_samples(self, samples) -> int:
        return int(samples[1].shape[0])

    def subset(self, samples, idx):
        features, labels = samples
        return features[idx], labels[idx]

    def test_metrics(self, theta) -> tuple[float, float]:
        """(mean test cost, test accuracy) on the fixed held-out set."""
        t = _as_theta(theta, self.dim)
        features, labels = self._test_set
        lp = self._log_probs(t, features)
        mean_cost = float(-lp[np.arange(labels.shape[0]), labels].mean())
        accuracy = float((lp.argmax(axis=1) == labels).mean())
        return mean_cost, accuracy


def synthetic_logistic_problem(dim: int, n_classes: int, separation: float,
                               seed: int, test_per_class: int = 500) -> LogisticBlobsProblem:
    return LogisticBlobsProblem(dim, n_classes, separation, seed, test_per_class)
