"""Candidate selectors sharing one calling convention.

Every selector receives an :class:`~activeq.environment.ActionSet` and returns
one of its candidate indices. Ties always go to the lowest candidate index,
which is the first position because action sets are sorted by index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

POLICY_KINDS = ("random", "uncertainty", "learned_q")


def _check(actions) -> None:
    if len(actions) == 0:
        raise ValueError("empty action set")


def binary_entropy(p):
    p = np.asarray(p, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(p * np.log(p) + (1.0 - p) * np.log(1.0 - p))
    return np.where((p <= 0.0) | (p >= 1.0), 0.0, h)


def select_random(actions, rng: np.random.Generator) -> int:
    _check(actions)
    return int(actions.indices[rng.integers(len(actions))])


def select_uncertainty(actions) -> int:
    """Maximum predictive entropy, i.e. the score closest to 0.5 in the binary case."""
    _check(actions)
    return int(actions.indices[np.argmin(np.abs(actions.features[:, 0] - 0.5))])


def select_greedy_q(qnet, state, actions) -> int:
    _check(actions)
    return int(actions.indices[np.argmax(qnet.q_values(state, actions.features))])


def select_epsilon_greedy(qnet, state, actions, epsilon: float, rng: np.random.Generator) -> int:
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    _check(actions)
    if rng.random() < epsilon:
        return select_random(actions, rng)
    return select_greedy_q(qnet, state, actions)


@dataclass
class Policy:
    kind: str
    qnet: Any = None
    name: str | None = None

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}; expected one of {POLICY_KINDS}")
        if self.kind == "learned_q" and self.qnet is None:
            raise ValueError("learned_q policy needs a Q-network")
        if self.name is None:
            self.name = self.kind

    @property
    def stochastic(self) -> bool:
        return self.kind == "random"

    def select(self, state, actions, rng: np.random.Generator | None = None) -> int:
        if self.kind == "random":
            if rng is None:
                raise ValueError("random policy needs an rng")
            return select_random(actions, rng)
        if self.kind == "uncertainty":
            return select_uncertainty(actions)
        return select_greedy_q(self.qnet, state, actions)
