"""Q-learning of annotation strategies over a collection of labelled datasets.

The Q-network scores (state, action) pairs: the sorted state vector goes
through a small encoder, the encoding is concatenated with the 3 action
features, and a second network maps the result to one predicted return.
Because actions are inputs, the network handles any number of candidates and
each candidate is scored on demand.

Training uses a replay buffer with proportional prioritization, double-DQN
targets, soft target updates, and a warm start of random-action episodes whose
mean return initializes the output bias.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import strategies
from .data import Dataset, DatasetError, SplitSpec, split
from .environment import EnvConfig, Environment
from .numerics import AdamState, Mlp, adam_step, backward, forward

log = logging.getLogger(__name__)

POLICY_VERSION = 1
N_ACTION_FEATURES = 3
LOG_COLUMNS = ("iteration", "epsilon", "mean_episode_length", "mean_loss", "buffer_size")


@dataclass(frozen=True)
class TrainConfig:
    warm_start_episodes: int = 100
    warm_start_updates: int = 100
    rl_iterations: int = 1000
    episodes_per_iteration: int = 10
    updates_per_iteration: int = 60
    batch_size: int = 32
    learning_rate: float = 1e-4
    target_update_rate: float = 0.01
    priority_exponent: float = 3.0
    priority_floor: float = 1e-3
    epsilon_start: float = 1.0
    epsilon_end: float = 0.0
    epsilon_decay_iterations: int = 1000
    discount: float = 1.0
    buffer_capacity: int = 10000
    encoder_widths: tuple[int, ...] = (10,)
    head_widths: tuple[int, ...] = (5,)
    test_fraction: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "encoder_widths", tuple(self.encoder_widths))
        object.__setattr__(self, "head_widths", tuple(self.head_widths))
        if self.batch_size < 1 or self.buffer_capacity < 1 or self.epsilon_decay_iterations < 1:
            raise ValueError("batch_size, buffer_capacity and epsilon_decay_iterations must be positive")
        if self.priority_floor < 0:
            raise ValueError("priority_floor must be non-negative")
        if not 0.0 <= self.target_update_rate <= 1.0:
            raise ValueError("target_update_rate must lie in [0, 1]")
        if min(self.warm_start_episodes, self.warm_start_updates, self.rl_iterations,
               self.episodes_per_iteration, self.updates_per_iteration) < 0:
            raise ValueError("episode and update counts must be non-negative")

    def epsilon(self, iteration: int) -> float:
        frac = min(max(iteration / self.epsilon_decay_iterations, 0.0), 1.0)
        return self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["encoder_widths"] = list(self.encoder_widths)
        d["head_widths"] = list(self.head_widths)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


class QNetwork:
    """State encoder plus joint (encoding, action) head with a scalar output."""

    def __init__(self, encoder: Mlp, head: Mlp):
        if head.layer_dims[0] != encoder.layer_dims[-1] + N_ACTION_FEATURES or head.layer_dims[-1] != 1:
            raise ValueError("head must take encoder output plus 3 action features and return 1 value")
        self.encoder = encoder
        self.head = head

    @classmethod
    def init(cls, v_size: int, rng: np.random.Generator, encoder_widths=(10,), head_widths=(5,)) -> "QNetwork":
        encoder = Mlp.init([v_size, *encoder_widths], rng, output_activation="sigmoid")
        head = Mlp.init([encoder_widths[-1] + N_ACTION_FEATURES, *head_widths, 1], rng)
        return cls(encoder, head)

    @property
    def v_size(self) -> int:
        return self.encoder.layer_dims[0]

    @property
    def n_params(self) -> int:
        return self.encoder.n_params + self.head.n_params

    def params(self) -> list[np.ndarray]:
        return self.encoder.params() + self.head.params()

    def copy(self) -> "QNetwork":
        return QNetwork(self.encoder.copy(), self.head.copy())

    def _joint(self, states, actions) -> np.ndarray:
        states = np.asarray(states, dtype=np.float64)
        actions = np.atleast_2d(np.asarray(actions, dtype=np.float64))
        enc = np.atleast_2d(forward(self.encoder, states))
        if enc.shape[0] == 1 and actions.shape[0] != 1:
            enc = np.repeat(enc, actions.shape[0], axis=0)
        if enc.shape[0] != actions.shape[0]:
            raise ValueError(f"{enc.shape[0]} states for {actions.shape[0]} actions")
        return np.hstack([enc, actions])

    def q_values(self, states, actions) -> np.ndarray:
        """Q for each action row. A single state is shared across all rows."""
        return forward(self.head, self._joint(states, actions))[:, 0]

    def grad(self, states, actions, upstream) -> list[np.ndarray]:
        """Gradient of ``sum(upstream * q_values(states, actions))``, laid out like :meth:`params`."""
        states = np.atleast_2d(np.asarray(states, dtype=np.float64))
        joint = self._joint(states, actions)
        g_head = backward(self.head, joint, np.asarray(upstream, dtype=np.float64).reshape(-1, 1))
        g_enc_out = g_head.inputs[:, :self.encoder.layer_dims[-1]]
        if states.shape[0] == 1 and joint.shape[0] != 1:
            g_enc_out = g_enc_out.sum(axis=0, keepdims=True)
        g_enc = backward(self.encoder, states, g_enc_out)
        return g_enc.params() + g_head.params()

    def to_dict(self) -> dict:
        return {"encoder": self.encoder.to_dict(), "head": self.head.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "QNetwork":
        return cls(Mlp.from_dict(d["encoder"]), Mlp.from_dict(d["head"]))


def q_value(qnet: QNetwork, state, action) -> float:
    return float(qnet.q_values(state, np.asarray(action, dtype=np.float64)[None, :])[0])


@dataclass
class Transition:
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    next_actions: np.ndarray
    terminal: bool


class ReplayBuffer:
    """Fixed-capacity FIFO store with one priority per entry."""

    def __init__(self, capacity: int = 10000):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._items: list[Transition | None] = [None] * capacity
        self.priorities = np.zeros(capacity)
        self._next = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def add(self, tr: Transition) -> int:
        prio = self.priorities[:self.size].max() if self.size else 1.0
        slot = self._next
        self._items[slot] = tr
        self.priorities[slot] = prio
        self._next = (self._next + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        return slot

    def __getitem__(self, i: int) -> Transition:
        if not 0 <= i < self.size:
            raise IndexError(i)
        return self._items[i]  # type: ignore[return-value]

    def oldest_first(self) -> list[Transition]:
        start = self._next if self.size == self.capacity else 0
        return [self._items[(start + k) % self.capacity] for k in range(self.size)]  # type: ignore[misc]

    def sampling_probabilities(self, exponent: float) -> np.ndarray:
        p = self.priorities[:self.size] ** exponent
        total = p.sum()
        if total <= 0 or not np.isfinite(total):
            return np.full(self.size, 1.0 / self.size)
        return p / total

    def update_priorities(self, indices, priorities) -> None:
        self.priorities[np.asarray(indices)] = np.abs(priorities)


def sample_prioritized(buffer: ReplayBuffer, batch_size: int, exponent: float,
                       rng: np.random.Generator) -> list[tuple[int, Transition]]:
    """Draw with replacement, P(i) proportional to priority_i ** exponent."""
    if len(buffer) == 0:
        raise ValueError("cannot sample from an empty buffer")
    probs = buffer.sampling_probabilities(exponent)
    idx = rng.choice(len(buffer), size=batch_size, replace=True, p=probs)
    return [(int(i), buffer[int(i)]) for i in idx]


def td_targets(batch: list[Transition], online: QNetwork, target: QNetwork, discount: float = 1.0) -> np.ndarray:
    """Double-DQN targets: the online net picks the next action, the target net values it."""
    y = np.array([tr.reward for tr in batch], dtype=np.float64)
    live = [k for k, tr in enumerate(batch) if not tr.terminal and len(tr.next_actions)]
    if not live:
        return y
    counts = np.array([len(batch[k].next_actions) for k in live])
    next_states = np.stack([batch[k].next_state for k in live])
    all_actions = np.vstack([batch[k].next_actions for k in live])
    rep_states = np.repeat(next_states, counts, axis=0)
    q_online = online.q_values(rep_states, all_actions)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    best = np.array([s + np.argmax(q_online[s:s + c]) for s, c in zip(starts, counts)])
    q_eval = target.q_values(next_states, all_actions[best])
    y[live] += discount * q_eval
    return y


def td_target(tr: Transition, online: QNetwork, target: QNetwork, discount: float = 1.0) -> float:
    return float(td_targets([tr], online, target, discount)[0])


def td_loss_and_grad(qnet: QNetwork, states, actions, targets):
    """Mean squared TD error and its gradient w.r.t. every Q-network parameter."""
    q = qnet.q_values(states, actions)
    err = q - np.asarray(targets, dtype=np.float64)
    loss = float(np.mean(err**2))
    return loss, qnet.grad(states, actions, 2.0 * err / err.size), err


def soft_update(target: QNetwork, online: QNetwork, tau: float) -> None:
    for pt, po in zip(target.params(), online.params()):
        pt *= 1.0 - tau
        pt += tau * po


@dataclass
class Learner:
    online: QNetwork
    target: QNetwork
    optimizer: AdamState
    buffer: ReplayBuffer
    cfg: TrainConfig

    @classmethod
    def create(cls, v_size: int, cfg: TrainConfig, rng: np.random.Generator) -> "Learner":
        online = QNetwork.init(v_size, rng, cfg.encoder_widths, cfg.head_widths)
        return cls(online, online.copy(), AdamState.for_params(online.params(), learning_rate=cfg.learning_rate),
                   ReplayBuffer(cfg.buffer_capacity), cfg)

    def set_output_bias(self, value: float) -> None:
        for net in (self.online, self.target):
            net.head.biases[-1][:] = value


def update_step(learner: Learner, rng: np.random.Generator) -> float:
    """One prioritized minibatch Adam step on the squared TD error, then a soft target update.

    Sampled entries get priority ``|TD error| + priority_floor``.
    """
    cfg = learner.cfg
    sampled = sample_prioritized(learner.buffer, cfg.batch_size, cfg.priority_exponent, rng)
    idx = [i for i, _ in sampled]
    batch = [tr for _, tr in sampled]
    y = td_targets(batch, learner.online, learner.target, cfg.discount)
    states = np.stack([tr.state for tr in batch])
    actions = np.stack([tr.action for tr in batch])
    loss, grads, err = td_loss_and_grad(learner.online, states, actions, y)
    adam_step(learner.online.params(), grads, learner.optimizer)
    # small floor keeps well-fitted transitions reachable under a steep exponent
    learner.buffer.update_priorities(idx, np.abs(err) + cfg.priority_floor)
    soft_update(learner.target, learner.online, cfg.target_update_rate)
    return loss


def collect_episode(env: Environment, seed, choose) -> list[Transition]:
    """Run one episode with ``choose(state, actions) -> index`` and return its transitions."""
    s, actions = env.reset(seed)
    out = []
    while not env.state.terminal:
        idx = choose(s, actions)
        a = actions.features[actions.position(idx)]
        s2, actions2, r, terminal = env.step(idx)
        out.append(Transition(s, a.copy(), r, s2, actions2.features, terminal))
        s, actions = s2, actions2
    return out


def _subseed(rng: np.random.Generator) -> int:
    return int(rng.integers(2**63 - 1))


class _Collection:
    """Datasets usable for training with their per-dataset target quality."""

    def __init__(self, datasets, targets: dict, env_cfg: EnvConfig, test_fraction: float):
        self.items = []
        for ds in datasets:
            if ds.name not in targets:
                log.warning("skipping %s: no target quality", ds.name)
                continue
            cfg = replace(env_cfg, target_quality=float(targets[ds.name]))
            try:
                pool_size = split(ds, SplitSpec(test_fraction, 0))[0].n
            except DatasetError as exc:
                log.warning("skipping %s: %s", ds.name, exc)
                continue
            if pool_size < cfg.v_size + 2 * cfg.initial_labelled_per_class + 1:
                log.warning("skipping %s: pool of %d points too small", ds.name, pool_size)
                continue
            self.items.append((ds, cfg))
        if not self.items:
            raise ValueError("no usable dataset in the training collection")
        self.test_fraction = test_fraction

    def environment(self, rng: np.random.Generator) -> Environment:
        ds, cfg = self.items[int(rng.integers(len(self.items)))]
        pool, test = split(ds, SplitSpec(self.test_fraction, _subseed(rng)))
        return Environment(pool, test, cfg)


def warm_start(learner: Learner, collection: _Collection, rng: np.random.Generator) -> float:
    """Random-action episodes into the buffer, output bias set to their mean return, then updates."""
    cfg = learner.cfg
    returns = []
    for _ in range(cfg.warm_start_episodes):
        env = collection.environment(rng)
        transitions = collect_episode(env, _subseed(rng), lambda s, a: strategies.select_random(a, rng))
        for tr in transitions:
            learner.buffer.add(tr)
        returns.append(sum(tr.reward for tr in transitions))
    bias = float(np.mean(returns)) if returns else 0.0
    learner.set_output_bias(bias)
    if len(learner.buffer):
        for _ in range(cfg.warm_start_updates):
            update_step(learner, rng)
    return bias


@dataclass
class TrainResult:
    qnet: QNetwork
    log: list[dict]
    warm_start_bias: float
    learner: Learner = field(repr=False)


def train(datasets: list[Dataset], targets: dict, env_cfg: EnvConfig, cfg: TrainConfig, seed: int) -> TrainResult:
    """Warm start, then iterations of {pick dataset, split, epsilon-greedy episodes, updates}."""
    rng = np.random.default_rng(seed)
    collection = _Collection(datasets, targets, env_cfg, cfg.test_fraction)
    learner = Learner.create(env_cfg.v_size, cfg, rng)
    bias = warm_start(learner, collection, rng)
    rows = []
    for it in range(cfg.rl_iterations):
        eps = cfg.epsilon(it)
        env = collection.environment(rng)
        online = learner.online
        lengths = []
        for _ in range(cfg.episodes_per_iteration):
            transitions = collect_episode(
                env, _subseed(rng),
                lambda s, a: strategies.select_epsilon_greedy(online, s, a, eps, rng),
            )
            for tr in transitions:
                learner.buffer.add(tr)
            lengths.append(len(transitions))
        losses = [update_step(learner, rng) for _ in range(cfg.updates_per_iteration)] if len(learner.buffer) else []
        rows.append({
            "iteration": it,
            "epsilon": eps,
            "mean_episode_length": float(np.mean(lengths)) if lengths else 0.0,
            "mean_loss": float(np.mean(losses)) if losses else 0.0,
            "buffer_size": len(learner.buffer),
        })
        if (it + 1) % 50 == 0:
            log.info("iteration %d: eps=%.3f length=%.2f loss=%.3f", it + 1, eps,
                     rows[-1]["mean_episode_length"], rows[-1]["mean_loss"])
    return TrainResult(learner.online, rows, bias, learner)


def write_training_log(rows: list[dict], path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=LOG_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(r[k]) if isinstance(r[k], float) else r[k] for k in LOG_COLUMNS})


def policy_to_dict(qnet: QNetwork, env_cfg: EnvConfig, cfg: TrainConfig, seed: int, targets: dict) -> dict:
    return {
        "version": POLICY_VERSION,
        "env": {"v_size": env_cfg.v_size, "max_steps": env_cfg.max_steps,
                "initial_labelled_per_class": env_cfg.initial_labelled_per_class,
                "classifier": env_cfg.classifier.to_dict()},
        **qnet.to_dict(),
        "train_config": cfg.to_dict(),
        "seed": seed,
        "targets": dict(targets),
    }


def save_policy(path, qnet: QNetwork, env_cfg: EnvConfig, cfg: TrainConfig, seed: int, targets: dict) -> None:
    Path(path).write_text(json.dumps(policy_to_dict(qnet, env_cfg, cfg, seed, targets), indent=1))


def load_policy(path) -> tuple[QNetwork, dict]:
    d = json.loads(Path(path).read_text())
    if d.get("version") != POLICY_VERSION:
        raise ValueError(f"{path}: unsupported policy version {d.get('version')!r}")
    return QNetwork.from_dict(d), d
