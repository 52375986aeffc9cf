"""Command-line entry point: ``python -m activeq <command> ...``.

Failures print a single JSON line ``{"error": <kind>, "message": <text>}``
on stderr and exit with a nonzero status.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path


from . import agent, experiments
from .classifiers import ClassifierSpec
from .data import Dataset, DatasetError, load_collection, load_csv, normalize
from .environment import EnvConfig, EpisodeError, calibrate_dataset
from .strategies import Policy

TARGETS_VERSION = 1
CONFIG_VERSION = 1
EXIT_USAGE = 2
EXIT_FAILURE = 1

log = logging.getLogger("activeq")


class CliError(Exception):
    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


# ---- file helpers -------------------------------------------------------------

def _read_json(path, what: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise CliError("missing_file", f"{what} not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise CliError("bad_json", f"{path}: {exc}") from None


def read_targets(path) -> tuple[dict[str, float], dict]:
    """Return ``(name -> q, metadata)``. A flat ``{name: q, "version": 1}`` mapping is also accepted."""
    d = _read_json(path, "targets file")
    if "version" not in d:
        raise CliError("bad_targets", f"{path}: missing version field")
    if d["version"] != TARGETS_VERSION:
        raise CliError("bad_targets", f"{path}: unsupported version {d['version']!r}")
    raw = d["targets"] if "targets" in d else {k: v for k, v in d.items() if k != "version"}
    try:
        targets = {str(k): float(v) for k, v in raw.items()}
    except (TypeError, ValueError):
        raise CliError("bad_targets", f"{path}: target qualities must be numbers") from None
    bad = [k for k, v in targets.items() if not 0.0 < v <= 1.0]
    if bad:
        raise CliError("bad_targets", f"{path}: q outside (0, 1] for {bad[0]}")
    return targets, d


def write_targets(path, targets: dict[str, float], spec: ClassifierSpec, budget: int, repeats: int,
                  seed: int, test_fraction: float) -> None:
    payload = {"version": TARGETS_VERSION, "classifier": spec.to_dict(), "budget": budget, "repeats": repeats,
               "seed": seed, "test_fraction": test_fraction, "targets": targets}
    experiments.atomic_write_text(path, json.dumps(payload, indent=1) + "\n")


def read_train_config(path) -> tuple[agent.TrainConfig, dict]:
    """``{"version": 1, "train": {...TrainConfig fields}, "env": {...}}``; a flat field dict also works."""
    d = _read_json(path, "config file")
    if d.get("version", CONFIG_VERSION) != CONFIG_VERSION:
        raise CliError("bad_config", f"{path}: unsupported version {d.get('version')!r}")
    train_fields = d.get("train", {k: v for k, v in d.items() if k not in ("version", "env")})
    try:
        return agent.TrainConfig.from_dict(train_fields), dict(d.get("env", {}))
    except (TypeError, ValueError) as exc:
        raise CliError("bad_config", f"{path}: {exc}") from None


def classifier_from_targets(meta: dict) -> ClassifierSpec:
    return ClassifierSpec.from_dict(meta["classifier"]) if "classifier" in meta else ClassifierSpec()


def env_config(classifier: ClassifierSpec, overrides: dict | None = None) -> EnvConfig:
    fields = {k: v for k, v in (overrides or {}).items() if k in ("v_size", "max_steps", "initial_labelled_per_class")}
    return EnvConfig(classifier=classifier, **fields)


def load_dataset(path) -> Dataset:
    return normalize(load_csv(path))


def q_for(targets: dict, ds: Dataset) -> float:
    if ds.name not in targets:
        raise CliError("missing_target", f"no target quality for dataset {ds.name!r}")
    return targets[ds.name]


def resolve_policy(args, targets_meta: dict) -> tuple[Policy, EnvConfig]:
    """Policy plus the environment config it should run in."""
    classifier = classifier_from_targets(targets_meta)
    if getattr(args, "policy", None):
        try:
            qnet, meta = agent.load_policy(args.policy)
        except FileNotFoundError:
            raise CliError("missing_file", f"policy file not found: {args.policy}") from None
        except (ValueError, KeyError, json.JSONDecodeError) as exc:
            raise CliError("bad_policy", str(exc)) from None
        env = meta.get("env", {})
        if getattr(args, "classifier", None) is None and "classifier" in env:
            classifier = ClassifierSpec.from_dict(env["classifier"])
        policy = Policy("learned_q", qnet, name="learned")
        env_cfg = env_config(classifier, env)
    else:
        policy = Policy(args.strategy)
        env_cfg = env_config(classifier)
    if getattr(args, "classifier", None):
        env_cfg = replace(env_cfg, classifier=replace(env_cfg.classifier, kind=args.classifier))
    return policy, env_cfg


# ---- commands -------------------------------------------------------------------

def cmd_calibrate(args) -> None:
    datasets = load_collection(args.collection)
    spec = ClassifierSpec(kind=args.classifier)
    targets = {}
    for ds in datasets:
        cal = calibrate_dataset(ds, spec, args.budget, args.repeats, args.seed, args.test_fraction)
        if cal.clamped:
            log.warning("%s: budget clamped to %d points", ds.name, cal.budget)
        targets[ds.name] = cal.q
        log.info("%s: q=%.4f", ds.name, cal.q)
    write_targets(args.out, targets, spec, args.budget, args.repeats, args.seed, args.test_fraction)


def cmd_train(args) -> None:
    datasets = load_collection(args.collection)
    targets, meta = read_targets(args.targets)
    cfg, env_over = read_train_config(args.config)
    env_cfg = env_config(classifier_from_targets(meta), env_over)
    result = agent.train(datasets, targets, env_cfg, cfg, args.seed)
    agent.save_policy(args.out, result.qnet, env_cfg, cfg, args.seed, targets)
    log_path = Path(args.log) if args.log else Path(args.out).with_name("training_log.csv")
    agent.write_training_log(result.log, log_path)


def cmd_eval(args) -> None:
    targets, meta = read_targets(args.targets)
    policy, env_cfg = resolve_policy(args, meta)
    ds = load_dataset(args.data)
    env_cfg = replace(env_cfg, target_quality=q_for(targets, ds))
    res = experiments.evaluate(policy, ds, env_cfg, args.trials, args.seed, args.test_fraction,
                               keep_logs=bool(args.logs))
    experiments.write_csv(args.out, [res.row()])
    if args.logs:
        experiments.write_episode_logs(Path(args.logs) / f"{ds.name}__{policy.name}.jsonl", res.logs)


def cmd_loo(args) -> None:
    datasets = load_collection(args.collection)
    targets, meta = read_targets(args.targets)
    cfg, env_over = read_train_config(args.config)
    env_cfg = env_config(classifier_from_targets(meta), env_over)
    test_sets = [load_dataset(p) for p in args.test_data]
    out = experiments.leave_one_out(datasets, targets, env_cfg, cfg, args.seed, args.trials, test_sets,
                                    progress=lambda row: log.info("%s", row))
    experiments.write_csv(args.out, out.rows)


def cmd_curve(args) -> None:
    targets, meta = read_targets(args.targets)
    policy, env_cfg = resolve_policy(args, meta)
    ds = load_dataset(args.data)
    env_cfg = replace(env_cfg, target_quality=q_for(targets, ds))
    rows = experiments.learning_curve(policy, ds, env_cfg, args.trials, args.seed, args.test_fraction)
    experiments.write_csv(args.out, rows)


def cmd_analyze(args) -> None:
    logs = Path(args.logs)
    files = sorted(logs.glob("*.jsonl")) if logs.is_dir() else []
    if not files:
        raise CliError("missing_file", f"no episode logs (*.jsonl) in {logs}")
    rows = []
    for f in files:
        try:
            rows.extend(experiments.analyze_selections(experiments.read_episode_logs(f), source=f.stem))
        except (json.JSONDecodeError, KeyError) as exc:
            raise CliError("bad_logs", f"{f}: {exc}") from None
    experiments.write_csv(args.out, rows)


def cmd_dump_state(args) -> None:
    targets, meta = read_targets(args.targets)
    policy, env_cfg = resolve_policy(args, meta)
    ds = load_dataset(args.data)
    env_cfg = replace(env_cfg, target_quality=q_for(targets, ds))
    env = experiments.trial_environment(ds, env_cfg, args.seed, args.test_fraction)
    mat = experiments.dump_state_evolution(policy, env, args.seed)
    rows = [{f"t{t}": float(v) for t, v in enumerate(row)} for row in mat]
    experiments.write_csv(args.out, rows, columns=[f"t{t}" for t in range(mat.shape[1])])


# ---- parser ---------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("usage", f"{self.prog}: {message}")


def _policy_args(p: argparse.ArgumentParser, trials: bool = True) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--policy", help="learned policy JSON")
    src.add_argument("--strategy", choices=["random", "uncertainty"])
    p.add_argument("--data", required=True, help="dataset CSV with a 'label' column")
    p.add_argument("--targets", required=True, help="targets.json from 'calibrate'")
    p.add_argument("--classifier", choices=["logreg", "rbf_logreg"], default=None,
                   help="override the classifier the policy runs with")
    if trials:
        p.add_argument("--trials", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--test-fraction", type=float, default=0.5)
    p.add_argument("--out", required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="activeq", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="compute the target quality q of every dataset in a collection")
    p.add_argument("--collection", required=True)
    p.add_argument("--classifier", choices=["logreg", "rbf_logreg"], default="logreg")
    p.add_argument("--budget", type=int, default=100)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--test-fraction", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("train", help="learn a selection policy on a collection")
    p.add_argument("--collection", required=True)
    p.add_argument("--targets", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--log", default=None, help="training log path (default: training_log.csv next to --out)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="mean episode length of a policy or baseline on one dataset")
    _policy_args(p)
    p.add_argument("--logs", default=None, help="directory for per-step episode logs (JSON lines)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("loo", help="leave-one-out transfer over a collection")
    p.add_argument("--collection", required=True)
    p.add_argument("--targets", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=500)
    p.add_argument("--test-data", nargs="*", default=[], help="extra datasets that are never trained on")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_loo)

    p = sub.add_parser("curve", help="mean fraction of q reached after each annotation")
    _policy_args(p)
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("analyze", help="histograms of selected scores per time bucket")
    p.add_argument("--logs", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("dump-state", help="sorted state vectors of one episode, one column per step")
    _policy_args(p, trials=False)
    p.set_defaults(func=cmd_dump_state)
    return parser


def _fail(kind: str, message: str, code: int = EXIT_FAILURE) -> int:
    print(json.dumps({"error": kind, "message": " ".join(str(message).split())}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except CliError as exc:
        return _fail(exc.kind, str(exc), EXIT_USAGE)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except CliError as exc:
        return _fail(exc.kind, str(exc))
    except DatasetError as exc:
        return _fail("bad_dataset", str(exc))
    except EpisodeError as exc:
        return _fail("episode", str(exc))
    except (ValueError, KeyError) as exc:
        return _fail("invalid", str(exc))
    except OSError as exc:
        return _fail("io", str(exc))
    return 0


if __name__ == "__main__":
    sys.exit(main())
