import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from activeq.classifiers import ClassifierSpec, accuracy, fit
from activeq.data import (
    Dataset,
    DatasetError,
    SplitSpec,
    load_collection,
    load_csv,
    make_synthetic,
    make_synthetic_collection,
    normalize,
    split,
    split_indices,
    write_collection,
)


def test_load_small_csv(tmp_path):
    p = tmp_path / "tiny.csv"
    p.write_text("f0,f1,label\n0,1,0\n1,0,1\n1,1,1\n")
    ds = load_csv(p)
    assert (ds.n, ds.d) == (3, 2)
    np.testing.assert_array_equal(ds.labels, [0, 1, 1])
    np.testing.assert_array_equal(ds.features, [[0, 1], [1, 0], [1, 1]])
    assert ds.name == "tiny"


def test_load_csv_maps_pm1_labels_by_sorted_order(tmp_path):
    p = tmp_path / "pm.csv"
    p.write_text("y,a\n-1,0.5\n+1,0.25\n1,2\n-1,3\n")
    ds = load_csv(p, label_column="y")
    np.testing.assert_array_equal(ds.labels, [0, 1, 1, 0])


def test_load_csv_string_labels(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("a,label\n1,yes\n2,no\n3,yes\n")
    np.testing.assert_array_equal(load_csv(p).labels, [1, 0, 1])


def test_load_uci_style_file_against_text_scan(tmp_path):
    rng = np.random.default_rng(0)
    header = [f"c{j}" for j in range(13)] + ["label"]
    lines = [",".join(header)]
    for _ in range(1000):
        row = [f"{v:.5f}" for v in rng.standard_normal(13)] + [str(int(rng.random() < 0.3))]
        lines.append(",".join(row))
    p = tmp_path / "uci.csv"
    p.write_text("\n".join(lines) + "\n")
    ds = load_csv(p)
    assert (ds.n, ds.d) == (1000, 13)
    # independent count: last field of each non-header line
    ones = sum(1 for line in p.read_text().splitlines()[1:] if line.rsplit(",", 1)[1] == "1")
    assert ds.class_counts() == (1000 - ones, ones)


@pytest.mark.parametrize(
    "body, match",
    [
        ("f0,label\n1,0\nx,1\n", "non-numeric value 'x' at line 3, column 'f0'"),
        ("f0,label\n1,0\nnan,1\n", "non-finite value at line 3"),
        ("f0,label\n1,0\n2,0\n", "single-class"),
        ("f0,label\n1,0\n2,1\n3,2\n", "exactly 2 distinct"),
        ("f0,label\n1,0\n2\n", "line 3 has 1 cells"),
    ],
)
def test_load_csv_errors(tmp_path, body, match):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(DatasetError, match=match):
        load_csv(p)


def test_load_csv_missing_file(tmp_path):
    with pytest.raises(DatasetError, match="no such file"):
        load_csv(tmp_path / "nope.csv")


def test_normalize_standardizes_and_drops_constant():
    ds = Dataset("x", np.array([[1.0, 5.0, 0.0], [2.0, 5.0, 1.0], [3.0, 5.0, 0.0]]), np.array([0, 1, 1]))
    out = normalize(ds)
    assert out.d == 2
    np.testing.assert_allclose(out.features[:, 0], [-1.224744871, 0.0, 1.224744871], atol=1e-8)


def test_normalize_adds_bias_column_for_zero_rows():
    ds = Dataset("x", np.array([[1.0], [2.0], [3.0]]), np.array([0, 1, 1]))
    out = normalize(ds)
    assert out.d == 2
    np.testing.assert_array_equal(out.features[:, 1], 1.0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(4, 40), d=st.integers(1, 5))
def test_normalized_rows_have_nonzero_norm(seed, n, d):
    rng = np.random.default_rng(seed)
    x = rng.integers(-2, 3, size=(n, d)).astype(float)
    y = np.arange(n) % 2
    out = normalize(Dataset("r", x, y))
    assert np.all(np.linalg.norm(out.features, axis=1) > 0)


def test_split_balanced_halves():
    ds = Dataset("b", np.arange(100.0)[:, None], np.arange(100) % 2)
    a, b = split(ds, SplitSpec(0.5, 7))
    assert a.n == b.n == 50
    assert a.class_counts() == (25, 25) and b.class_counts() == (25, 25)


def test_split_is_deterministic():
    labels = np.arange(60) % 3 == 0
    a = split_indices(labels, SplitSpec(0.5, 11))
    b = split_indices(labels, SplitSpec(0.5, 11))
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(10, 200), frac1=st.floats(0.1, 0.9),
       tf=st.floats(0.2, 0.8))
def test_split_partitions_and_stratifies(seed, n, frac1, tf):
    labels = np.zeros(n, dtype=int)
    labels[: max(2, min(n - 2, int(n * frac1)))] = 1
    tr, te = split_indices(labels, SplitSpec(tf, seed))
    assert set(tr).isdisjoint(te)
    assert set(tr) | set(te) == set(range(n))
    overall = labels.mean()
    for part in (tr, te):
        assert 0 < labels[part].sum() < part.size
        assert abs(labels[part].sum() - overall * part.size) <= 1.0 + 1e-9


def test_split_rejects_tiny_classes():
    with pytest.raises(DatasetError):
        split_indices(np.array([0, 0, 0, 0, 0, 1]), SplitSpec(0.5, 0))


def test_synthetic_zero_separation_is_chance():
    ds = normalize(make_synthetic("two_gaussians", 2000, 2, 0.0, 5))
    acc = accuracy(fit(ClassifierSpec(), ds.features, ds.labels), ds)
    assert abs(acc - 0.5) <= 0.1


def test_synthetic_wide_separation_is_separable():
    ds = normalize(make_synthetic("two_gaussians", 400, 2, 8.0, 5))
    acc = accuracy(fit(ClassifierSpec(), ds.features, ds.labels), ds)
    assert acc >= 0.95


@pytest.mark.parametrize("kind", ["two_gaussians", "xor_blobs", "ring"])
def test_synthetic_is_reproducible(kind):
    a = make_synthetic(kind, 50, 3, 2.0, 9)
    b = make_synthetic(kind, 50, 3, 2.0, 9)
    assert a.features.tobytes() == b.features.tobytes()
    assert a.labels.tobytes() == b.labels.tobytes()


def test_synthetic_rejects_unknown_kind():
    with pytest.raises(DatasetError, match="unknown synthetic kind"):
        make_synthetic("spiral", 50, 2, 1.0, 0)


def test_pipeline_is_deterministic():
    def run():
        ds = normalize(make_synthetic("ring", 80, 3, 1.5, 2))
        return split(ds, SplitSpec(0.5, 3))

    (a1, b1), (a2, b2) = run(), run()
    assert a1.features.tobytes() == a2.features.tobytes()
    assert b1.labels.tobytes() == b2.labels.tobytes()


def test_collection_round_trip(tmp_path):
    datasets = make_synthetic_collection(3, 60, (2, 4), (2.0, 3.0), seed=1)
    write_collection(datasets, tmp_path)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["version"] == 1 and len(manifest["datasets"]) == 3
    back = load_collection(tmp_path)
    assert [d.name for d in back] == [d.name for d in datasets]
    for a, b in zip(back, datasets):
        np.testing.assert_allclose(a.features, b.features, atol=1e-12)


def test_collection_without_manifest(tmp_path):
    (tmp_path / "a.csv").write_text("x,label\n1,0\n2,1\n3,0\n")
    (tmp_path / "b.csv").write_text("x,label\n1,1\n5,0\n")
    assert [d.name for d in load_collection(tmp_path)] == ["a", "b"]
