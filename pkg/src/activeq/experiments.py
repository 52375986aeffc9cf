"""Evaluation harness: episodes, repeated trials, leave-one-out transfer, analysis tables.

Trial ``i`` of an evaluation always uses seed ``base_seed + i`` for the
pool/test split, the episode reset and any policy randomness, so different
policies face identical starting conditions.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .agent import TrainConfig, train
from .data import Dataset, SplitSpec, split
from .environment import EnvConfig, Environment, FLAG_BUDGET
from .strategies import Policy

TIME_BUCKETS = ((0, 19), (20, 39), (40, 59), (60, 79), (80, 99))
N_BINS = 20


@dataclass
class EpisodeLog:
    episode_id: int
    seed: int
    q: float
    accuracies: list[float]
    steps: list[dict] = field(default_factory=list)
    states: list[np.ndarray] | None = None
    flag: str = ""

    @property
    def length(self) -> int:
        return len(self.steps)

    @property
    def exhausted(self) -> bool:
        return self.flag == FLAG_BUDGET


@dataclass
class EvalResult:
    dataset: str
    policy: str
    lengths: np.ndarray
    exhausted: np.ndarray
    logs: list[EpisodeLog] = field(default_factory=list, repr=False)

    @property
    def trials(self) -> int:
        return int(self.lengths.size)

    @property
    def mean(self) -> float:
        return float(self.lengths.mean())

    @property
    def stderr(self) -> float:
        if self.lengths.size < 2:
            return 0.0
        return float(self.lengths.std(ddof=1) / np.sqrt(self.lengths.size))

    @property
    def exhausted_fraction(self) -> float:
        return float(self.exhausted.mean())

    def row(self) -> dict:
        return {"dataset": self.dataset, "policy": self.policy, "trials": self.trials,
                "mean_length": self.mean, "stderr": self.stderr,
                "exhausted_fraction": self.exhausted_fraction}


def policy_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng([seed, 1])


def run_episode(policy: Policy, env: Environment, seed: int, episode_id: int = 0,
                record_states: bool = False) -> EpisodeLog:
    """Play one episode from ``env.reset(seed)``; logs p_t of each chosen candidate and accuracy after each step."""
    rng = policy_rng(seed)
    s, actions = env.reset(seed)
    st = env.state
    ep = EpisodeLog(episode_id, seed, env.q, [st.accuracy], states=[s] if record_states else None)
    while not st.terminal:
        t = st.t
        idx = policy.select(s, actions, rng)
        p_t = float(actions.features[actions.position(idx), 0])
        s, actions, reward, terminal = env.step(idx)
        ep.accuracies.append(st.accuracy)
        if record_states:
            ep.states.append(s)
        ep.steps.append({"episode_id": episode_id, "t": t, "chosen_index": idx, "p_t": p_t,
                         "reward": reward, "accuracy": st.accuracy, "terminal": terminal,
                         "flag": st.flag if terminal else ""})
    ep.flag = st.flag
    return ep


def trial_environment(ds: Dataset, env_cfg: EnvConfig, seed: int, test_fraction: float = 0.5) -> Environment:
    pool, test = split(ds, SplitSpec(test_fraction, seed))
    return Environment(pool, test, env_cfg)


def evaluate(policy: Policy, ds: Dataset, env_cfg: EnvConfig, trials: int = 500, base_seed: int = 0,
             test_fraction: float = 0.5, keep_logs: bool = False) -> EvalResult:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    lengths, exhausted, logs = [], [], []
    for i in range(trials):
        seed = base_seed + i
        ep = run_episode(policy, trial_environment(ds, env_cfg, seed, test_fraction), seed, episode_id=i)
        lengths.append(ep.length)
        exhausted.append(ep.exhausted)
        if keep_logs:
            logs.append(ep)
    return EvalResult(ds.name, policy.name, np.array(lengths, dtype=np.float64), np.array(exhausted), logs)


def savings(policy_mean: float, random_mean: float) -> float:
    return 1.0 - policy_mean / random_mean


@dataclass
class LooResult:
    rows: list[dict]
    policies: dict = field(default_factory=dict, repr=False)
    results: dict = field(default_factory=dict, repr=False)


def leave_one_out(datasets: list[Dataset], targets: dict, env_cfg: EnvConfig, train_cfg: TrainConfig,
                  seed: int = 0, trials: int = 500, test_datasets: list[Dataset] = (),
                  progress=None) -> LooResult:
    """Train on all but one dataset, evaluate random/uncertainty/learned on the held-out one.

    Each dataset in ``test_datasets`` is never trained on; it is evaluated
    under every learned policy and reported as mean and std across them.
    """
    if len(datasets) < 2:
        raise ValueError("leave-one-out needs at least 2 datasets")
    baselines = [Policy("random"), Policy("uncertainty")]
    out = LooResult([])

    def cfg_for(ds):
        return replace(env_cfg, target_quality=float(targets[ds.name]))

    for k, held in enumerate(datasets):
        rest = [d for i, d in enumerate(datasets) if i != k]
        trained = train(rest, targets, env_cfg, train_cfg, seed)
        learned = Policy("learned_q", trained.qnet, name=f"learned_without_{held.name}")
        out.policies[held.name] = trained
        res = {p.name: evaluate(p, held, cfg_for(held), trials, seed, train_cfg.test_fraction)
               for p in baselines}
        res["learned"] = evaluate(learned, held, cfg_for(held), trials, seed, train_cfg.test_fraction)
        out.results[held.name] = res
        out.rows.append(_loo_row(held.name, "leave-one-out", res["random"], res["uncertainty"],
                                 [res["learned"]]))
        if progress:
            progress(out.rows[-1])

    for test_ds in test_datasets:
        res = {p.name: evaluate(p, test_ds, cfg_for(test_ds), trials, seed, train_cfg.test_fraction)
               for p in baselines}
        learned = [
            evaluate(Policy("learned_q", tr.qnet, name=f"learned_without_{name}"), test_ds,
                     cfg_for(test_ds), trials, seed, train_cfg.test_fraction)
            for name, tr in out.policies.items()
        ]
        out.results[test_ds.name] = {**res, "learned": learned}
        out.rows.append(_loo_row(test_ds.name, "test", res["random"], res["uncertainty"], learned))
    return out


def _loo_row(name, scenario, rand: EvalResult, unc: EvalResult, learned: list[EvalResult]) -> dict:
    means = np.array([r.mean for r in learned])
    lmean = float(means.mean())
    return {
        "dataset": name, "scenario": scenario,
        "random_mean": rand.mean, "random_stderr": rand.stderr,
        "uncertainty_mean": unc.mean, "uncertainty_stderr": unc.stderr,
        "learned_mean": lmean,
        "learned_stderr": learned[0].stderr if len(learned) == 1 else float(means.std(ddof=1) / np.sqrt(means.size)),
        "learned_std_across_policies": float(means.std(ddof=1)) if means.size > 1 else 0.0,
        "n_policies": len(learned),
        "uncertainty_savings": savings(unc.mean, rand.mean),
        "learned_savings": savings(lmean, rand.mean),
    }


def cross_classifier_eval(qnet, ds: Dataset, env_cfg: EnvConfig, trials: int = 500, base_seed: int = 0,
                          test_fraction: float = 0.5, trained_with: str = "") -> dict:
    """Evaluate a learned policy inside an environment built around ``env_cfg.classifier``."""
    learned = evaluate(Policy("learned_q", qnet, name="learned"), ds, env_cfg, trials, base_seed, test_fraction)
    rand = evaluate(Policy("random"), ds, env_cfg, trials, base_seed, test_fraction)
    return {"dataset": ds.name, "trained_with": trained_with, "applied_with": env_cfg.classifier.kind,
            "learned_mean": learned.mean, "learned_stderr": learned.stderr,
            "random_mean": rand.mean, "random_stderr": rand.stderr,
            "savings": savings(learned.mean, rand.mean)}


def learning_curve(policy: Policy, ds: Dataset, env_cfg: EnvConfig, trials: int = 500, base_seed: int = 0,
                   test_fraction: float = 0.5) -> list[dict]:
    """Mean fraction of the target quality reached after each annotation, padded after termination."""
    horizon = env_cfg.max_steps + 1
    curves = np.empty((trials, horizon))
    for i in range(trials):
        seed = base_seed + i
        ep = run_episode(policy, trial_environment(ds, env_cfg, seed, test_fraction), seed, episode_id=i)
        acc = np.asarray(ep.accuracies) / ep.q
        curves[i, :acc.size] = acc
        curves[i, acc.size:] = acc[-1]
    se = curves.std(axis=0, ddof=1) / np.sqrt(trials) if trials > 1 else np.zeros(horizon)
    return [{"step": t, "mean_quality_fraction": float(curves[:, t].mean()), "stderr": float(se[t])}
            for t in range(horizon)]


def _bucket_of(t: int) -> str | None:
    for lo, hi in TIME_BUCKETS:
        if lo <= t <= hi:
            return f"{lo}-{hi}"
    return None


def analyze_selections(records, source: str = "") -> list[dict]:
    """Normalized 20-bin histograms of p_t overall and per time bucket; ``total`` keeps the raw count."""
    edges = np.linspace(0.0, 1.0, N_BINS + 1)
    groups: dict[str, list[float]] = {"all": []}
    for lo, hi in TIME_BUCKETS:
        groups[f"{lo}-{hi}"] = []
    for r in records:
        groups["all"].append(r["p_t"])
        b = _bucket_of(int(r["t"]))
        if b is not None:
            groups[b].append(r["p_t"])
    rows = []
    for name, values in groups.items():
        counts = np.histogram(np.clip(values, 0.0, 1.0), bins=edges)[0] if values else np.zeros(N_BINS, int)
        total = int(counts.sum())
        dens = counts / total if total else np.zeros(N_BINS)
        row = {"source": source, "bucket": name, "total": total}
        row.update({f"bin_{k:02d}": float(v) for k, v in enumerate(dens)})
        rows.append(row)
    return rows


def dump_state_evolution(policy: Policy, env: Environment, seed: int) -> np.ndarray:
    """Column t holds the sorted state vector s_t of one episode."""
    ep = run_episode(policy, env, seed, record_states=True)
    return np.column_stack(ep.states)


# ---- file formats ---------------------------------------------------------------

def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    return v


def write_csv(path, rows: list[dict], columns=None) -> None:
    columns = list(columns or (rows[0].keys() if rows else []))
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(r[k]) for k in columns})
    atomic_write_text(path, buf.getvalue())


def write_episode_logs(path, logs: list[EpisodeLog]) -> None:
    lines = []
    for ep in logs:
        for rec in ep.steps:
            lines.append(json.dumps({k: (float(v) if isinstance(v, np.floating) else v) for k, v in rec.items()}))
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def read_episode_logs(path) -> list[dict]:
    with Path(path).open() as fh:
        return [json.loads(line) for line in fh if line.strip()]
