"""Train a policy with one classifier family and apply it inside environments built on another."""

import argparse
from dataclasses import replace
from pathlib import Path

from activeq.agent import TrainConfig, train
from activeq.classifiers import ClassifierSpec
from activeq.data import load_collection
from activeq.environment import EnvConfig, calibrate_dataset
from activeq.experiments import cross_classifier_eval, write_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--collection", type=Path, required=True)
    ap.add_argument("--held-out", required=True, help="dataset name excluded from training")
    ap.add_argument("--iterations", type=int, default=300)
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, required=True)
    args = ap.parse_args()

    datasets = load_collection(args.collection)
    held = next((ds for ds in datasets if ds.name == args.held_out), None)
    if held is None:
        ap.error(f"no dataset named {args.held_out!r} in {args.collection}")
    rest = [ds for ds in datasets if ds is not held]
    cfg = TrainConfig(rl_iterations=args.iterations, epsilon_decay_iterations=args.iterations)
    rows = []
    for trained_with in ("logreg", "rbf_logreg"):
        spec = ClassifierSpec(trained_with)
        targets = {ds.name: calibrate_dataset(ds, spec, seed=args.seed).q for ds in rest}
        qnet = train(rest, targets, EnvConfig(classifier=spec), cfg, args.seed).qnet
        for applied_with in ("logreg", "rbf_logreg"):
            aspec = ClassifierSpec(applied_with)
            q = calibrate_dataset(held, aspec, seed=args.seed).q
            env_cfg = replace(EnvConfig(classifier=aspec), target_quality=q)
            rows.append(cross_classifier_eval(qnet, held, env_cfg, args.trials, args.seed, trained_with=trained_with))
            print(rows[-1])
    write_csv(args.out, rows)


if __name__ == "__main__":
    main()
