"""Shared fixtures-as-functions for the agent and acceptance suites."""

import numpy as np

from activeq.agent import Learner, TrainConfig, Transition, update_step

ADVANCE = np.array([1.0, 0.0, 0.0])
STAY = np.array([0.0, 1.0, 0.0])


def chain_states(n_states: int, v_size: int = 4) -> list[np.ndarray]:
    return [np.sort(np.linspace(0.0, 1.0, v_size) ** (k + 1)) for k in range(n_states)]


def chain_transitions(n_states: int = 4, v_size: int = 4) -> list[Transition]:
    """Deterministic chain s_0 -> ... -> s_{n-1} (terminal); 'advance' moves on, 'stay' loops. Reward -1."""
    states = chain_states(n_states, v_size)
    both = np.stack([ADVANCE, STAY])
    out = []
    for k in range(n_states - 1):
        nxt = k + 1
        terminal = nxt == n_states - 1
        out.append(Transition(states[k], ADVANCE, -1.0, states[nxt], np.zeros((0, 3)) if terminal else both, terminal))
        out.append(Transition(states[k], STAY, -1.0, states[k], both, False))
    return out


def chain_values(n_states: int = 4) -> dict[tuple[int, str], float]:
    """Exhaustive dynamic programming on the chain: Q = -(steps remaining under the best continuation)."""
    v = np.zeros(n_states)
    for _ in range(4 * n_states):
        for k in range(n_states - 1):
            v[k] = max(-1.0 + v[k + 1], -1.0 + v[k])
    return {**{(k, "advance"): -1.0 + v[k + 1] for k in range(n_states - 1)},
            **{(k, "stay"): -1.0 + v[k] for k in range(n_states - 1)}}


def train_on_chain(n_states: int = 4, updates: int = 5000, seed: int = 0, **cfg_kw) -> Learner:
    cfg = TrainConfig(**{"learning_rate": 0.01, "batch_size": 32, "target_update_rate": 0.05, **cfg_kw})
    rng = np.random.default_rng(seed)
    learner = Learner.create(4, cfg, rng)
    for tr in chain_transitions(n_states):
        learner.buffer.add(tr)
    learner.set_output_bias(-float(n_states - 1) / 2)
    for _ in range(updates):
        update_step(learner, rng)
    return learner


def chain_errors(learner: Learner, n_states: int = 4) -> dict:
    states = chain_states(n_states)
    oracle = chain_values(n_states)
    errs = {}
    for (k, name), want in oracle.items():
        a = ADVANCE if name == "advance" else STAY
        got = float(learner.online.q_values(states[k], a[None, :])[0])
        errs[(k, name)] = abs(got - want)
    return errs
