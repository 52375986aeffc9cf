"""Write a collection of normalized synthetic datasets (one CSV each) to a directory."""

import argparse
from pathlib import Path

from activeq.data import make_synthetic_collection, write_collection


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, required=True)
    ap.add_argument("--count", type=int, default=8)
    ap.add_argument("--n", type=int, default=400)
    ap.add_argument("--dims", type=int, nargs=2, default=(2, 10))
    ap.add_argument("--separations", type=float, nargs=2, default=(2.0, 5.0))
    ap.add_argument("--kind", default="two_gaussians", choices=["two_gaussians", "xor_blobs", "ring"])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    datasets = make_synthetic_collection(args.count, args.n, tuple(args.dims), tuple(args.separations),
                                         seed=args.seed, kind=args.kind)
    write_collection(datasets, args.out)
    for ds in datasets:
        print(ds.name, ds.n, ds.d)


if __name__ == "__main__":
    main()
