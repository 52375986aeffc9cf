"""Leave-one-out transfer on a collection of synthetic two-Gaussian problems."""

import argparse
import logging
import time
from pathlib import Path

from activeq.agent import TrainConfig
from activeq.classifiers import ClassifierSpec
from activeq.data import make_synthetic_collection
from activeq.environment import EnvConfig, calibrate_dataset
from activeq.experiments import leave_one_out, write_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--iterations", type=int, default=300)
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=Path("results/desk_scale_loo.csv"))
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    datasets = make_synthetic_collection(8, 400, (2, 10), (2.0, 5.0), seed=args.seed)
    spec = ClassifierSpec()
    targets = {ds.name: calibrate_dataset(ds, spec, seed=args.seed).q for ds in datasets}
    cfg = TrainConfig(rl_iterations=args.iterations, epsilon_decay_iterations=args.iterations)
    start = time.time()
    res = leave_one_out(datasets, targets, EnvConfig(classifier=spec), cfg, seed=args.seed,
                        trials=args.trials, progress=lambda r: logging.info("%s", r))
    write_csv(args.out, res.rows)
    for r in res.rows:
        print(f"{r['dataset']:28s} rand={r['random_mean']:6.2f} unc={r['uncertainty_mean']:6.2f} "
              f"learned={r['learned_mean']:6.2f}")
    beat_random = sum(r["learned_mean"] <= 0.9 * r["random_mean"] for r in res.rows)
    near_unc = sum(r["learned_mean"] <= r["uncertainty_mean"] + 2 for r in res.rows)
    print(f"learned <= 0.9 x random on {beat_random}/{len(res.rows)}; "
          f"learned <= uncertainty + 2 on {near_unc}/{len(res.rows)}")
    print(f"elapsed {time.time() - start:.0f}s")


if __name__ == "__main__":
    main()
