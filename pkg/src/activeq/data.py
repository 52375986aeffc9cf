"""Binary classification datasets: CSV ingestion, synthetic generators, scaling, splits."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MANIFEST_NAME = "manifest.json"
SYNTHETIC_KINDS = ("two_gaussians", "xor_blobs", "ring")


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    name: str
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels).astype(np.int64)
        if x.ndim != 2:
            raise DatasetError(f"{self.name}: features must be a 2-D matrix")
        n, d = x.shape
        if n < 2 or d < 1:
            raise DatasetError(f"{self.name}: need n >= 2 and d >= 1, got {x.shape}")
        if y.shape != (n,):
            raise DatasetError(f"{self.name}: {y.shape[0]} labels for {n} rows")
        if not np.isin(y, (0, 1)).all():
            raise DatasetError(f"{self.name}: labels must be 0/1")
        if len(np.unique(y)) < 2:
            raise DatasetError(f"{self.name}: only one class present")
        if not np.isfinite(x).all():
            r, c = np.argwhere(~np.isfinite(x))[0]
            raise DatasetError(f"{self.name}: non-finite value at row {r}, column {c}")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def subset(self, index, name: str | None = None) -> "Dataset":
        index = np.asarray(index)
        return Dataset(name or self.name, self.features[index], self.labels[index])

    def class_counts(self) -> tuple[int, int]:
        n1 = int(self.labels.sum())
        return self.n - n1, n1


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise DatasetError(f"test_fraction must lie in (0, 1), got {self.test_fraction}")


def _label_mapping(raw_values: list[str]) -> dict[str, int]:
    distinct = set(raw_values)
    try:
        keys = {v: float(v) for v in distinct}
    except ValueError:
        keys = {v: v for v in distinct}
    ordered = sorted(set(keys.values()))
    if len(ordered) == 1:
        raise DatasetError("single-class data: the label column holds one value")
    if len(ordered) != 2:
        raise DatasetError(f"label column must hold exactly 2 distinct values, found {len(ordered)}")
    return {v: ordered.index(k) for v, k in keys.items()}


def load_csv(path, label_column: str = "label", name: str | None = None) -> Dataset:
    """Read a numeric CSV with a header row; labels mapped to 0/1 by sorted order."""
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DatasetError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if label_column not in header:
        raise DatasetError(f"{path}: label column {label_column!r} not in header")
    label_pos = header.index(label_column)
    feature_pos = [i for i in range(len(header)) if i != label_pos]

    body = [r for r in rows[1:] if any(cell.strip() for cell in r)]
    features = np.empty((len(body), len(feature_pos)))
    raw_labels = []
    for r, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise DatasetError(f"{path}: line {r} has {len(row)} cells, header has {len(header)}")
        for j, c in enumerate(feature_pos):
            cell = row[c].strip()
            try:
                value = float(cell)
            except ValueError:
                raise DatasetError(f"{path}: non-numeric value {cell!r} at line {r}, column {header[c]!r}") from None
            if math.isnan(value) or math.isinf(value):
                raise DatasetError(f"{path}: non-finite value at line {r}, column {header[c]!r}")
            features[r - 2, j] = value
        raw = row[label_pos].strip()
        if raw == "" or raw.lower() == "nan":
            raise DatasetError(f"{path}: missing label at line {r}, column {label_column!r}")
        raw_labels.append(raw)
    mapping = _label_mapping(raw_labels)
    labels = np.array([mapping[v] for v in raw_labels], dtype=np.int64)
    return Dataset(name or path.stem, features, labels)


def save_csv(ds: Dataset, path, label_column: str = "label") -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([f"f{j}" for j in range(ds.d)] + [label_column])
        for x, y in zip(ds.features, ds.labels):
            w.writerow([repr(float(v)) for v in x] + [int(y)])


def normalize(ds: Dataset) -> Dataset:
    """Standardize columns, drop constant ones, add a bias column if a row becomes all zero."""
    x = ds.features
    std = x.std(axis=0)
    keep = std > 1e-12
    if not keep.any():
        z = np.zeros((ds.n, 0))
    else:
        z = (x[:, keep] - x[:, keep].mean(axis=0)) / std[keep]
    if z.shape[1] == 0 or (np.linalg.norm(z, axis=1) == 0).any():
        z = np.hstack([z, np.ones((ds.n, 1))])
    return Dataset(ds.name, z, ds.labels)


def split(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Stratified split into (pool, test). Deterministic for a fixed seed."""
    train_idx, test_idx = split_indices(ds.labels, spec)
    return ds.subset(train_idx), ds.subset(test_idx)


def split_indices(labels, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    labels = np.asarray(labels)
    n = labels.shape[0]
    if n * spec.test_fraction < 2:
        raise DatasetError(f"test split would hold fewer than 2 points (n={n})")
    rng = np.random.default_rng(spec.seed)
    train, test = [], []
    for c in (0, 1):
        idx = np.flatnonzero(labels == c)
        if idx.size < 2:
            raise DatasetError(f"class {c} has {idx.size} points; need >= 2 to stratify")
        idx = rng.permutation(idx)
        n_test = min(max(int(round(idx.size * spec.test_fraction)), 1), idx.size - 1)
        test.append(idx[:n_test])
        train.append(idx[n_test:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def make_synthetic(kind: str, n: int, d: int, separation: float, seed: int, name: str | None = None) -> Dataset:
    """Reproducible toy problems.

    two_gaussians: unit-variance clouds whose means sit ``separation`` apart
    along a random unit direction. xor_blobs: four clusters on the corners of a
    square of side ``separation`` in the first two dims, labelled by XOR of the
    quadrant. ring: a standard normal core (class 0) inside a shell of radius
    ``1 + separation`` (class 1).
    """
    if kind not in SYNTHETIC_KINDS:
        raise DatasetError(f"unknown synthetic kind {kind!r}; expected one of {SYNTHETIC_KINDS}")
    if n < 20:
        raise DatasetError("n must be >= 20")
    if separation < 0:
        raise DatasetError("separation must be >= 0")
    if d < 1 or (kind != "two_gaussians" and d < 2):
        raise DatasetError(f"{kind} needs d >= {1 if kind == 'two_gaussians' else 2}")
    rng = np.random.default_rng(seed)
    y = np.zeros(n, dtype=np.int64)
    y[n // 2:] = 1
    if kind == "two_gaussians":
        u = rng.standard_normal(d)
        u /= np.linalg.norm(u)
        x = rng.standard_normal((n, d)) + np.outer(np.where(y == 1, 0.5, -0.5) * separation, u)
    elif kind == "xor_blobs":
        x = rng.standard_normal((n, d)) * 0.5
        qx = rng.integers(0, 2, n)
        qy = qx ^ y
        x[:, 0] += (qx - 0.5) * separation
        x[:, 1] += (qy - 0.5) * separation
    else:
        x = rng.standard_normal((n, d))
        shell = x[y == 1]
        shell /= np.linalg.norm(shell, axis=1, keepdims=True)
        radius = 1.0 + separation + 0.3 * rng.standard_normal(shell.shape[0])
        x[y == 1] = shell * radius[:, None]
    order = rng.permutation(n)
    return Dataset(name or f"{kind}_{seed}", x[order], y[order])


def load_collection(directory) -> list[Dataset]:
    """Load every dataset of a collection directory, normalized.

    Uses ``manifest.json`` (``{"version", "datasets": [{name, file, label_column}]}``)
    when present, otherwise every ``*.csv`` with label column ``label``.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise DatasetError(f"no such directory: {directory}")
    manifest = directory / MANIFEST_NAME
    if manifest.exists():
        entries = json.loads(manifest.read_text())["datasets"]
    else:
        entries = [{"name": p.stem, "file": p.name, "label_column": "label"} for p in sorted(directory.glob("*.csv"))]
    if not entries:
        raise DatasetError(f"{directory}: no datasets found")
    return [
        normalize(load_csv(directory / e["file"], e.get("label_column", "label"), name=e["name"]))
        for e in entries
    ]


def write_collection(datasets, directory, label_column: str = "label") -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for ds in datasets:
        fname = f"{ds.name}.csv"
        save_csv(ds, directory / fname, label_column)
        entries.append({"name": ds.name, "file": fname, "label_column": label_column})
    (directory / MANIFEST_NAME).write_text(json.dumps({"version": 1, "datasets": entries}, indent=2))
    return directory


def make_synthetic_collection(count: int = 8, n: int = 400, dims=(2, 10), separations=(2.0, 5.0),
                              seed: int = 0, kind: str = "two_gaussians") -> list[Dataset]:
    """``count`` normalized synthetic datasets with dimensions and separations spread over the given ranges."""
    rng = np.random.default_rng(seed)
    dim_values = np.arange(dims[0], dims[1] + 1)
    out = []
    for i in range(count):
        d = int(dim_values[i % dim_values.size]) if count <= dim_values.size else int(rng.choice(dim_values))
        sep = float(np.round(np.linspace(*separations, count)[i], 3)) if count > 1 else float(separations[0])
        ds = make_synthetic(kind, n, d, sep, seed * 1000 + i, name=f"{kind}_d{d}_s{sep:g}_{i}")
        out.append(normalize(ds))
    return out
