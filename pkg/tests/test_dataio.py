import numpy as np
import pytest

from pll.core import PartialDataset, SupervisedDataset
from pll.dataio import (
    SplitSpec,
    load_idx_images,
    load_partial_csv,
    load_supervised_csv,
    save_partial_csv,
    save_supervised_csv,
    split,
    split_indices,
    standardize,
    write_idx,
)
from pll.errors import (
    BadIndex,
    BadMagic,
    CountMismatch,
    EmptyCandidates,
    FullCandidates,
    LabelOutOfRange,
    ParseError,
    RaggedRows,
    Truncated,
    ValidationError,
)
from pll.generate import UniformGenerationModel, generate_partial_dataset


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


# supervised CSV

def test_supervised_csv_with_header(tmp_path):
    ds = load_supervised_csv(_write(tmp_path, "a.csv", "f0,f1,label\n0.5,1.5,2\n-1,0,0\n"))
    assert ds.n == 2 and ds.d == 2 and ds.k == 3
    assert np.array_equal(ds.features, [[0.5, 1.5], [-1.0, 0.0]])
    assert list(ds.labels) == [2, 0]


def test_supervised_csv_k_from_max_label(tmp_path):
    ds = load_supervised_csv(_write(tmp_path, "a.csv", "1.0,9\n2.0,3\n"))
    assert ds.k == 10


def test_supervised_csv_errors(tmp_path):
    with pytest.raises(ParseError):
        load_supervised_csv(_write(tmp_path, "e.csv", ""))
    with pytest.raises(RaggedRows, match="row 3"):
        load_supervised_csv(_write(tmp_path, "r.csv", "f0,label\n1,0\n1,2,0\n"))
    with pytest.raises(LabelOutOfRange, match="row 2"):
        load_supervised_csv(_write(tmp_path, "l.csv", "1,0\n1,5\n"), k=3)
    with pytest.raises(ParseError, match="row 2"):
        load_supervised_csv(_write(tmp_path, "n.csv", "1,0\n1,x\n"))


def test_supervised_csv_roundtrip(tmp_path, rng):
    ds = SupervisedDataset(rng.normal(size=(50, 4)), rng.integers(0, 6, 50), 6)
    save_supervised_csv(ds, tmp_path / "s.csv")
    back = load_supervised_csv(tmp_path / "s.csv", k=6)
    assert np.array_equal(back.features, ds.features) and np.array_equal(back.labels, ds.labels)


# IDX

def test_idx_roundtrip_and_scaling(tmp_path):
    images = np.zeros((3, 2, 2), dtype=np.uint8)
    images[0, 0, 0] = 255
    images[2, 1, 1] = 51
    write_idx(images, [1, 0, 9], tmp_path / "i", tmp_path / "l")
    ds = load_idx_images(tmp_path / "i", tmp_path / "l")
    assert ds.features.shape == (3, 4) and ds.k == 10
    assert ds.features[0, 0] == 1.0 and ds.features[2, 3] == pytest.approx(0.2)
    assert list(ds.labels) == [1, 0, 9]


def test_idx_errors(tmp_path):
    images = np.zeros((3, 2, 2), dtype=np.uint8)
    write_idx(images, [1, 0], tmp_path / "i", tmp_path / "l")
    with pytest.raises(CountMismatch):
        load_idx_images(tmp_path / "i", tmp_path / "l")
    with pytest.raises(BadMagic):
        load_idx_images(tmp_path / "l", tmp_path / "l")
    raw = (tmp_path / "i").read_bytes()
    (tmp_path / "t").write_bytes(raw[:-1])
    with pytest.raises(Truncated):
        load_idx_images(tmp_path / "t", tmp_path / "l")
    (tmp_path / "h").write_bytes(raw[:6])
    with pytest.raises(Truncated):
        load_idx_images(tmp_path / "h", tmp_path / "l")


# partial CSV

def test_partial_csv_example(tmp_path):
    pds = load_partial_csv(_write(tmp_path, "p.csv", "# k=3\nf0,f1,candidates,true\n0.5,1.5,0|2,0\n"))
    assert pds.k == 3 and pds.n == 1
    assert np.array_equal(pds.candidates, [[True, False, True]])
    assert list(pds.hidden_labels) == [0]
    assert pds.candidate_set(0).indices() == [0, 2]


def test_partial_csv_headerless(tmp_path):
    pds = load_partial_csv(_write(tmp_path, "p.csv", "# k=3\n0.5,1.5,0|2,2\n1,2,1,1\n"))
    assert pds.d == 2 and list(pds.hidden_labels) == [2, 1]
    pds = load_partial_csv(_write(tmp_path, "q.csv", "# k=3\n0.5,1.5,0|2\n"))
    assert pds.d == 2 and pds.hidden_labels is None


def test_partial_csv_errors(tmp_path):
    cases = [
        ("# k=3\nf0,candidates\n1,0|1|2\n", FullCandidates),
        ("# k=3\nf0,candidates\n1,\n", EmptyCandidates),
        ("# k=3\nf0,candidates\n1,0|5\n", BadIndex),
        ("# k=3\nf0,candidates\n1,a|b\n", BadIndex),
        ("# k=3\nf0,candidates,true\n1,0|1,2\n", ParseError),
        ("f0,candidates\n1,0\n", ParseError),
        ("", ParseError),
    ]
    for i, (text, err) in enumerate(cases):
        with pytest.raises(err):
            load_partial_csv(_write(tmp_path, f"e{i}.csv", text))


def test_partial_csv_error_names_row(tmp_path):
    with pytest.raises(FullCandidates, match="row 4"):
        load_partial_csv(_write(tmp_path, "p.csv", "# k=3\nf0,candidates\n1,0\n2,0|1|2\n"))


def test_partial_csv_roundtrip(tmp_path, rng):
    ds = SupervisedDataset(rng.normal(size=(1000, 3)) * 1e3, rng.integers(0, 10, 1000), 10)
    pds = generate_partial_dataset(ds, UniformGenerationModel(10), rng)
    save_partial_csv(pds, tmp_path / "p.csv")
    back = load_partial_csv(tmp_path / "p.csv")
    assert np.array_equal(back.features, pds.features)
    assert np.array_equal(back.candidates, pds.candidates)
    assert np.array_equal(back.hidden_labels, pds.hidden_labels)
    no_true = PartialDataset(pds.features, pds.candidates, 10)
    save_partial_csv(no_true, tmp_path / "q.csv")
    assert load_partial_csv(tmp_path / "q.csv").hidden_labels is None


# split and standardize

def test_split_partitions_and_is_deterministic(rng):
    ds = SupervisedDataset(rng.normal(size=(105, 2)), rng.integers(0, 3, 105), 3)
    tr, va = split_indices(105, SplitSpec(0.1, 4))
    assert len(va) == 10 and len(tr) == 95
    assert sorted(np.concatenate([tr, va])) == list(range(105))
    tr2, va2 = split_indices(105, SplitSpec(0.1, 4))
    assert np.array_equal(tr, tr2) and np.array_equal(va, va2)
    a, b = split(ds, SplitSpec(0.1, 4))
    assert np.array_equal(b.features, ds.features[va])
    assert not np.array_equal(split_indices(105, SplitSpec(0.1, 5))[1], va)


def test_split_rejects_bad_fraction():
    with pytest.raises(ValidationError):
        SplitSpec(1.0)
    with pytest.raises(ValidationError):
        split_indices(5, SplitSpec(0.1))


def test_standardize_uses_training_statistics(rng):
    X = rng.normal(3.0, 2.0, size=(200, 3))
    X[:, 2] = 7.25
    tr = SupervisedDataset(X, np.zeros(200, dtype=int), 2)
    te = SupervisedDataset(np.array([[3.0, 3.0, 7.25]]), np.zeros(1, dtype=int), 2)
    (a, b), (mean, std) = standardize(tr, te)
    assert np.allclose(a.features[:, :2].mean(axis=0), 0, atol=1e-12)
    assert np.allclose(a.features[:, :2].std(axis=0), 1, atol=1e-12)
    assert np.all(a.features[:, 2] == 0.0) and b.features[0, 2] == 0.0
    assert np.allclose(b.features[0, :2], (3.0 - mean[:2]) / std[:2])
    assert std[2] == 1e-8
