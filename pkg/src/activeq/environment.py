"""Pool-based active learning as an episodic decision process.

One episode: a held-out scoring subset V is set aside, a few labelled seeds
are drawn, and every step the agent picks one unlabelled candidate, whose
label is revealed before the classifier is refit. Each step costs -1 and the
episode ends once test accuracy reaches the target quality.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .classifiers import ClassifierSpec, TrainedModel, accuracy, fit, predict_proba
from .data import Dataset, SplitSpec, split

TARGET_FRACTION = 0.98
RESET_ATTEMPTS = 100
REWARD = -1.0

FLAG_TARGET = "target_reached"
FLAG_BUDGET = "budget_exhausted"
FLAG_POOL = "pool_exhausted"


class EpisodeError(RuntimeError):
    pass


@dataclass(frozen=True)
class EnvConfig:
    v_size: int = 30
    max_steps: int = 100
    initial_labelled_per_class: int = 1
    target_quality: float = 1.0
    classifier: ClassifierSpec = field(default_factory=ClassifierSpec)

    def __post_init__(self):
        if self.v_size < 1 or self.max_steps < 1 or self.initial_labelled_per_class < 1:
            raise ValueError("v_size, max_steps and initial_labelled_per_class must be positive")
        if not 0.0 < self.target_quality <= 1.0:
            raise ValueError(f"target quality must lie in (0, 1], got {self.target_quality}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["classifier"] = self.classifier.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EnvConfig":
        d = dict(d)
        d.pop("distance", None)
        if "classifier" in d:
            d["classifier"] = ClassifierSpec.from_dict(d["classifier"])
        return cls(**d)


@dataclass
class ActionSet:
    """Candidates (ascending dataset index) and their [score, dist_L, dist_U] rows."""

    indices: np.ndarray
    features: np.ndarray

    def __len__(self) -> int:
        return int(self.indices.shape[0])

    def __iter__(self):
        for i, f in zip(self.indices, self.features):
            yield int(i), f

    def position(self, index: int) -> int:
        pos = int(np.searchsorted(self.indices, index))
        if pos >= len(self) or self.indices[pos] != index:
            raise KeyError(index)
        return pos


@dataclass
class EnvState:
    labelled: list[int]
    unlabelled: np.ndarray
    validation: np.ndarray
    model: TrainedModel
    t: int = 0
    accuracy: float = 0.0
    terminal: bool = False
    flag: str = ""


@dataclass(frozen=True)
class Calibration:
    q: float
    accuracies: tuple[float, ...]
    budget: int
    clamped: bool = False


def cosine_distances(x: np.ndarray) -> np.ndarray:
    unit = x / np.linalg.norm(x, axis=1, keepdims=True)
    d = 1.0 - unit @ unit.T
    np.clip(d, 0.0, 2.0, out=d)
    np.fill_diagonal(d, 0.0)
    return d


def cosine_distance(u, v) -> float:
    u, v = np.asarray(u, dtype=np.float64), np.asarray(v, dtype=np.float64)
    return float(1.0 - u @ v / (np.linalg.norm(u) * np.linalg.norm(v)))


def avg_distance(x, index_set, ds: Dataset) -> float:
    """Mean cosine distance from ``x`` to the rows of ``ds`` listed in ``index_set`` (0 if empty)."""
    index_set = list(index_set)
    if not index_set:
        return 0.0
    return float(np.mean([cosine_distance(x, ds.features[j]) for j in index_set]))


def state_vector(model: TrainedModel, validation, ds: Dataset) -> np.ndarray:
    return np.sort(np.atleast_1d(predict_proba(model, ds.features[np.asarray(validation)])))


def stratified_sample(labels: np.ndarray, size: int, rng: np.random.Generator) -> np.ndarray:
    """``size`` indices with class proportions matched as closely as rounding allows (>= 1 per class)."""
    labels = np.asarray(labels)
    n1 = int(labels.sum())
    n0 = labels.size - n1
    k1 = int(round(size * n1 / labels.size))
    k1 = min(max(k1, 1), n1, size - 1)
    k0 = min(size - k1, n0)
    idx0 = rng.choice(np.flatnonzero(labels == 0), k0, replace=False)
    idx1 = rng.choice(np.flatnonzero(labels == 1), k1, replace=False)
    return np.sort(np.concatenate([idx0, idx1]))


def calibrate_target_quality(ds_train: Dataset, ds_test: Dataset, spec: ClassifierSpec,
                             budget: int = 100, repeats: int = 10, seed: int = 0) -> Calibration:
    """Target quality: 98% of mean test accuracy of fits on ``budget`` random stratified points."""
    clamped = budget > ds_train.n
    budget = min(budget, ds_train.n)
    rng = np.random.default_rng(seed)
    accs = []
    for _ in range(repeats):
        idx = stratified_sample(ds_train.labels, budget, rng)
        model = fit(spec, ds_train.features[idx], ds_train.labels[idx])
        accs.append(accuracy(model, ds_test))
    return Calibration(TARGET_FRACTION * float(np.mean(accs)), tuple(accs), budget, clamped)


def calibrate_dataset(ds: Dataset, spec: ClassifierSpec, budget: int = 100, repeats: int = 10,
                      seed: int = 0, test_fraction: float = 0.5) -> Calibration:
    """Like :func:`calibrate_target_quality` but with a fresh pool/test split per repeat."""
    accs, clamped, used = [], False, budget
    for r in range(repeats):
        pool, test = split(ds, SplitSpec(test_fraction, seed + r))
        cal = calibrate_target_quality(pool, test, spec, budget, 1, seed + r)
        accs.extend(cal.accuracies)
        clamped |= cal.clamped
        used = cal.budget
    return Calibration(TARGET_FRACTION * float(np.mean(accs)), tuple(accs), used, clamped)


class Environment:
    """Annotation episodes over a fixed (pool, test) pair.

    ``reset`` draws a new V and seed labels; ``step`` annotates one candidate.
    """

    def __init__(self, pool: Dataset, test: Dataset, cfg: EnvConfig):
        needed = cfg.v_size + 2 * cfg.initial_labelled_per_class + 1
        if pool.n < needed:
            raise EpisodeError(f"pool of {pool.n} points is too small; need at least {needed}")
        self.pool = pool
        self.test = test
        self.cfg = cfg
        self.distances = cosine_distances(pool.features)
        self.state: EnvState | None = None
        self._actions: ActionSet | None = None

    @property
    def q(self) -> float:
        return self.cfg.target_quality

    def _fit(self, labelled) -> TrainedModel:
        idx = np.asarray(labelled)
        return fit(self.cfg.classifier, self.pool.features[idx], self.pool.labels[idx])

    def reset(self, seed) -> tuple[np.ndarray, ActionSet]:
        rng = np.random.default_rng(seed)
        n, k = self.pool.n, self.cfg.initial_labelled_per_class
        for _ in range(RESET_ATTEMPTS):
            perm = rng.permutation(n)
            validation, rest = np.sort(perm[:self.cfg.v_size]), perm[self.cfg.v_size:]
            rest_labels = self.pool.labels[rest]
            if min(int((rest_labels == c).sum()) for c in (0, 1)) < k:
                continue
            seeds = [rng.choice(rest[rest_labels == c], k, replace=False) for c in (0, 1)]
            labelled = [int(i) for i in np.concatenate(seeds)]
            unlabelled = np.setdiff1d(rest, labelled)
            break
        else:
            raise EpisodeError(f"could not draw {k} seed labels per class in {RESET_ATTEMPTS} attempts")
        model = self._fit(labelled)
        acc = accuracy(model, self.test)
        self.state = EnvState(labelled, unlabelled, validation, model, 0, acc)
        if acc >= self.q:
            self.state.terminal, self.state.flag = True, FLAG_TARGET
        elif unlabelled.size == 0:
            self.state.terminal, self.state.flag = True, FLAG_POOL
        return self.observe()

    def observe(self) -> tuple[np.ndarray, ActionSet]:
        st = self._require_state()
        s = state_vector(st.model, st.validation, self.pool)
        self._actions = self.action_set()
        return s, self._actions

    def action_set(self) -> ActionSet:
        st = self._require_state()
        u = st.unlabelled
        if u.size == 0:
            return ActionSet(np.empty(0, dtype=np.int64), np.empty((0, 3)))
        scores = np.atleast_1d(predict_proba(st.model, self.pool.features[u]))
        rows = self.distances[u]
        feats = np.column_stack([
            scores,
            rows[:, st.labelled].mean(axis=1),
            rows[:, u].mean(axis=1),
        ])
        return ActionSet(u.copy(), feats)

    def step(self, index: int) -> tuple[np.ndarray, ActionSet, float, bool]:
        st = self._require_state()
        if st.terminal:
            raise EpisodeError("step called on a terminal state")
        pos = int(np.searchsorted(st.unlabelled, index))
        if pos >= st.unlabelled.size or st.unlabelled[pos] != index:
            raise EpisodeError(f"candidate {index} is not in the unlabelled set")
        st.unlabelled = np.delete(st.unlabelled, pos)
        st.labelled.append(int(index))
        st.model = self._fit(st.labelled)
        st.accuracy = accuracy(st.model, self.test)
        st.t += 1
        if st.accuracy >= self.q:
            st.terminal, st.flag = True, FLAG_TARGET
        elif st.t >= self.cfg.max_steps:
            st.terminal, st.flag = True, FLAG_BUDGET
        elif st.unlabelled.size == 0:
            st.terminal, st.flag = True, FLAG_POOL
        s, actions = self.observe()
        return s, actions, REWARD, st.terminal

    @property
    def episode_return(self) -> float:
        return REWARD * self._require_state().t

    def _require_state(self) -> EnvState:
        if self.state is None:
            raise EpisodeError("reset must be called first")
        return self.state
