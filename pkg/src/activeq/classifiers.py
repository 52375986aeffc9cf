"""Probabilistic binary classifiers retrained at every annotation step.

Scores follow the convention used throughout the package: ``predict_proba``
returns p(y = 0 | x). A point is predicted as class 0 iff that probability is
strictly above 0.5.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .numerics import sigmoid

KINDS = ("logreg", "rbf_logreg")
GRAD_TOL = 1e-8


@dataclass(frozen=True)
class RbfSpec:
    n_features: int = 100
    # relative to sqrt(d) on standardized inputs
    bandwidth: float = 1.0
    seed: int = 0


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str = "logreg"
    l2_strength: float = 1.0
    max_iterations: int = 100
    rbf: RbfSpec = field(default_factory=RbfSpec)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown classifier kind {self.kind!r}; expected one of {KINDS}")
        if self.l2_strength <= 0 or self.max_iterations < 1:
            raise ValueError("l2_strength and max_iterations must be positive")
        if self.rbf.n_features < 1 or self.rbf.bandwidth <= 0:
            raise ValueError("rbf n_features and bandwidth must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ClassifierSpec":
        d = dict(d)
        rbf = RbfSpec(**d.pop("rbf", {}))
        return cls(rbf=rbf, **d)


@dataclass(frozen=True)
class TrainedModel:
    spec: ClassifierSpec
    weights: np.ndarray  # coefficients followed by the intercept
    n_inputs: int
    projection: tuple[np.ndarray, np.ndarray] | None = None
    degenerate: bool = False
    prior_class0: float = 0.5
    n_iterations: int = 0


def random_fourier_projection(spec: RbfSpec, d: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(spec.seed)
    w = rng.standard_normal((spec.n_features, d)) / (spec.bandwidth * np.sqrt(d))
    b = rng.uniform(0.0, 2.0 * np.pi, spec.n_features)
    return w, b


def _design(x: np.ndarray, projection) -> np.ndarray:
    if projection is not None:
        w, b = projection
        x = np.sqrt(2.0 / w.shape[0]) * np.cos(x @ w.T + b)
    return np.hstack([x, np.ones((x.shape[0], 1))])


def logistic_objective(theta, a, y, l2_strength):
    """Summed log-loss of p(y=1) = sigmoid(a @ theta) plus an L2 penalty on all but the intercept."""
    z = a @ theta
    return float(np.sum(np.logaddexp(0.0, z) - y * z) + 0.5 * l2_strength * theta[:-1] @ theta[:-1])


def _newton(a, y, l2_strength, max_iterations):
    k = a.shape[1]
    penalty = np.full(k, l2_strength)
    penalty[-1] = 0.0
    theta = np.zeros(k)
    obj = logistic_objective(theta, a, y, l2_strength)
    it = 0
    for it in range(1, max_iterations + 1):
        p = sigmoid(a @ theta)
        grad = a.T @ (p - y) + penalty * theta
        if np.linalg.norm(grad) < GRAD_TOL:
            it -= 1
            break
        hess = (a.T * (p * (1.0 - p))) @ a + np.diag(penalty)
        try:
            direction = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            direction = grad
        slope = grad @ direction
        if not np.isfinite(slope) or slope <= 0:
            direction, slope = grad, grad @ grad
        step = 1.0
        while True:
            cand = theta - step * direction
            cand_obj = logistic_objective(cand, a, y, l2_strength)
            if cand_obj <= obj - 1e-4 * step * slope or step < 1e-12:
                break
            step *= 0.5
        if cand_obj > obj:
            break
        theta, obj = cand, cand_obj
    return theta, it


def fit(spec: ClassifierSpec, x, y) -> TrainedModel:
    """Fit on a labelled set. A single-class set yields a Laplace-smoothed constant model."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.shape[0] == 0 or x.shape[0] != y.shape[0]:
        raise ValueError(f"need a non-empty labelled set with one label per row, got {x.shape} / {y.shape}")
    d = x.shape[1]
    projection = random_fourier_projection(spec.rbf, d) if spec.kind == "rbf_logreg" else None
    n_out = spec.rbf.n_features if projection is not None else d
    n1 = float(y.sum())
    if n1 == 0 or n1 == y.size:
        prior = (y.size - n1 + 1.0) / (y.size + 2.0)
        return TrainedModel(spec, np.zeros(n_out + 1), d, projection, degenerate=True, prior_class0=prior)
    theta, n_it = _newton(_design(x, projection), y, spec.l2_strength, spec.max_iterations)
    return TrainedModel(spec, theta, d, projection, n_iterations=n_it)


def decision_function(model: TrainedModel, x) -> np.ndarray:
    """Linear score whose sigmoid is p(y = 1)."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    if x2.shape[1] != model.n_inputs:
        raise ValueError(f"model was trained on {model.n_inputs} features, got {x2.shape[1]}")
    if model.degenerate:
        z = np.full(x2.shape[0], np.log((1.0 - model.prior_class0) / model.prior_class0))
    else:
        z = _design(x2, model.projection) @ model.weights
    return z[0] if single else z


def predict_proba(model: TrainedModel, x):
    """p(y = 0 | x) for one vector (float) or each row of a matrix."""
    z = decision_function(model, x)
    p0 = sigmoid(-np.atleast_1d(z))
    return float(p0[0]) if np.ndim(z) == 0 else p0


def predict(model: TrainedModel, x) -> np.ndarray:
    return np.where(np.atleast_1d(predict_proba(model, x)) > 0.5, 0, 1)


def accuracy(model: TrainedModel, testset) -> float:
    if testset.n == 0:
        raise ValueError("empty test set")
    return float(np.mean(predict(model, testset.features) == testset.labels))
