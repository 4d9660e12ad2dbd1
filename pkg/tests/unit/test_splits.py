"""
Unit tests for ratio parsing, subset splitting, variants and sampling in
`src.trainer.splits`.
"""

from collections import Counter
import numpy as np
import pytest
from src.trainer.splits import (
    DatasetSplit,
    Ratio,
    apply_variant,
    next_sample,
    parse_variant,
    split_dataset,
    split_sizes,
    variant_branches,
)
from src.lib.exceptions import (
    InvalidRatioError,
    InvalidTrainConfigError,
    TooFewSamplesError,
    UnknownVariantError,
)


@pytest.mark.parametrize(
    "ratio, expected",
    [
        ("1:1:1", (3527, 3527, 3528)),
        ("1:2:3", (1763, 3526, 5293)),
        ("1:5:10", (662, 3310, 6610)),
        ("1:0:0", (10582, 0, 0)),
    ]
)
def test_split_sizes_reproduce_the_reference_table(ratio, expected):
    assert split_sizes(10582, Ratio.parse(ratio)) == expected


def test_split_dataset_covers_every_id_once():
    ids = [f"{k:05d}" for k in range(10582)]
    split = split_dataset(ids, "1:2:3", seed=9)
    assert split.sizes() == (1763, 3526, 5293)
    assert sorted(split.union()) == ids


def test_split_is_deterministic_per_seed():
    ids = [str(k) for k in range(100)]
    assert split_dataset(ids, "1:5:10", 3) == split_dataset(ids, "1:5:10", 3)
    assert split_dataset(ids, "1:5:10", 3) != split_dataset(ids, "1:5:10", 4)


@pytest.mark.parametrize("text", ["1:2", "a:b:c", "1:2:3:4", "-1:2:3", "0:0:0", ""])
def test_ratio_parse_errors(text):
    with pytest.raises(InvalidRatioError):
        Ratio.parse(text)


def test_too_few_samples():
    with pytest.raises(TooFewSamplesError):
        split_sizes(10, Ratio(1, 5, 10))


def test_split_subsets_must_be_disjoint():
    with pytest.raises(InvalidTrainConfigError):
        DatasetSplit(("a", "b"), ("b",), (), Ratio(1, 1, 0))


@pytest.mark.parametrize(
    "variant, sizes",
    [
        ("p", (1, 0, 0)),
        ("p+i", (1, 0, 3)),
        ("p+b", (1, 2, 0)),
        ("p+b+i", (1, 2, 3)),
        ("p+b_ub", (3, 0, 0)),
        ("p+b+i_ub", (6, 0, 0)),
    ]
)
def test_apply_variant(variant, sizes):
    split = split_dataset([str(k) for k in range(6)], "1:2:3", 0)
    restricted = apply_variant(split, variant)
    assert restricted.sizes() == sizes
    assert restricted.pixel_set[:1] == split.pixel_set


@pytest.mark.parametrize(
    "variant, branches",
    [
        ("p", ("pixel",)),
        ("p+i", ("pixel", "image")),
        ("p+b", ("pixel", "box")),
        ("p+b+i", ("pixel", "box", "image")),
        ("p+b+i_ub", ("pixel",)),
    ]
)
def test_variant_branches(variant, branches):
    assert variant_branches(variant) == branches


def test_unknown_variant():
    with pytest.raises(UnknownVariantError):
        parse_variant("b+i")
    assert parse_variant("P+B_ub") == ("p+b", True)


def test_draws_are_uniform_over_the_union():
    split = split_dataset([str(k) for k in range(16)], "1:5:10", 0)
    rng = np.random.default_rng(0)
    counts = Counter(next_sample(split, rng)[1] for _ in range(16000))
    assert counts["pixel"] == pytest.approx(1000, rel=0.15)
    assert counts["box"] == pytest.approx(5000, rel=0.05)
    assert counts["image"] == pytest.approx(10000, rel=0.05)


def test_draw_reports_the_owning_branch():
    split = split_dataset([str(k) for k in range(6)], "1:2:3", 1)
    rng = np.random.default_rng(2)
    for _ in range(50):
        sample_id, branch = next_sample(split, rng)
        assert split.branch_of(sample_id) == branch


def test_draw_from_empty_split():
    with pytest.raises(TooFewSamplesError):
        next_sample(DatasetSplit((), (), (), Ratio(1, 0, 0)), np.random.default_rng(0))
