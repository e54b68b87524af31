import numpy as np
import pytest
from hypothesis import given, strategies as st

from pll.core import (
    CandidateSet,
    LabelSpace,
    PartialDataset,
    RunConfig,
    SupervisedDataset,
    candidate_mask_matrix,
    candidate_set_from_indices,
    enumerate_C,
)
from pll.errors import EmptySet, FullSet, KTooLarge, OutOfRange, ValidationError


def test_from_indices_sets_bits():
    s = candidate_set_from_indices([0, 2], k=3)
    assert s.bits == 0b101
    assert len(s) == 2
    assert 0 in s and 2 in s and 1 not in s
    assert s.indices() == [0, 2]


def test_from_indices_deduplicates():
    assert candidate_set_from_indices([2, 0, 2], k=3) == candidate_set_from_indices([0, 2], k=3)


@pytest.mark.parametrize(
    "indices, k, err",
    [([0, 1, 2], 3, FullSet), ([], 3, EmptySet), ([0, 3], 3, OutOfRange), ([-1], 3, OutOfRange)],
)
def test_from_indices_errors(indices, k, err):
    with pytest.raises(err):
        candidate_set_from_indices(indices, k)


def test_wide_label_space():
    s = candidate_set_from_indices([0, 150, 218], k=219)
    assert s.indices() == [0, 150, 218]
    assert CandidateSet.from_mask(s.to_mask()) == s


def test_label_space_needs_two_classes():
    with pytest.raises(ValidationError):
        LabelSpace(1)
    assert list(LabelSpace(3)) == [0, 1, 2]


def test_enumerate_k3():
    sets = [s.indices() for s in enumerate_C(3)]
    assert sets == [[0], [1], [0, 1], [2], [0, 2], [1, 2]]


def test_enumerate_k2_and_k10():
    assert [s.indices() for s in enumerate_C(2)] == [[0], [1]]
    assert len(enumerate_C(10)) == 1022


def test_enumerate_guard():
    with pytest.raises(KTooLarge):
        enumerate_C(21)


@given(st.integers(2, 12))
def test_enumerate_counts(k):
    sets = enumerate_C(k)
    assert len(sets) == 2**k - 2
    assert len({s.bits for s in sets}) == len(sets)
    for i in range(k):
        assert sum(i in s for s in sets) == 2 ** (k - 1) - 1


@given(st.integers(2, 10))
def test_mask_matrix_matches_enumeration(k):
    M = candidate_mask_matrix(k)
    assert [list(np.flatnonzero(row)) for row in M] == [s.indices() for s in enumerate_C(k)]


@given(st.integers(2, 40).flatmap(lambda k: st.tuples(st.just(k), st.sets(st.integers(0, k - 1), min_size=1, max_size=k - 1))))
def test_bitset_mask_roundtrip(case):
    k, idx = case
    s = candidate_set_from_indices(idx, k)
    assert CandidateSet.from_mask(s.to_mask()) == s
    assert set(s) == idx


def test_partial_dataset_enforces_containment():
    X = np.zeros((2, 1))
    mask = np.array([[1, 0, 0], [0, 1, 1]], dtype=bool)
    PartialDataset(X, mask, 3, np.array([0, 2]))
    with pytest.raises(ValidationError):
        PartialDataset(X, mask, 3, np.array([1, 2]))


def test_partial_dataset_rejects_bad_sets():
    X = np.zeros((1, 1))
    with pytest.raises(EmptySet):
        PartialDataset(X, np.array([[0, 0, 0]], dtype=bool), 3)
    with pytest.raises(FullSet):
        PartialDataset(X, np.array([[1, 1, 1]], dtype=bool), 3)


def test_datasets_are_immutable():
    ds = SupervisedDataset(np.zeros((2, 2)), np.array([0, 1]), 2)
    with pytest.raises(ValueError):
        ds.features[0, 0] = 1.0


def test_supervised_dataset_checks():
    with pytest.raises(OutOfRange):
        SupervisedDataset(np.zeros((1, 2)), np.array([2]), 2)
    with pytest.raises(ValidationError):
        SupervisedDataset(np.array([[np.nan]]), np.array([0]), 2)


def test_run_config_validation():
    cfg = RunConfig()
    assert (cfg.batch_size, cfg.epochs, cfg.validation_fraction) == (256, 250, 0.1)
    with pytest.raises(ValidationError):
        RunConfig(method="sure")
    with pytest.raises(ValidationError):
        RunConfig(validation_fraction=1.0)
    with pytest.raises(ValidationError):
        cfg.check_train_size(100)
