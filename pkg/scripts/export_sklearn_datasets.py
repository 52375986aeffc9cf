"""Export the binary classification sets bundled with scikit-learn as label-last CSVs.

Needs scikit-learn (``pip install .[datasets]``); the package itself does not.
"""

import argparse
from pathlib import Path

import numpy as np
from sklearn import datasets as skd

from activeq.data import Dataset, normalize, save_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, required=True)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    bunch = skd.load_breast_cancer()
    ds = normalize(Dataset("wdbc", np.asarray(bunch.data, float), np.asarray(bunch.target, int)))
    save_csv(ds, args.out / "wdbc.csv")
    print(ds.name, ds.n, ds.d, ds.class_counts())


if __name__ == "__main__":
    main()
