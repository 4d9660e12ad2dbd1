"""
Unit tests for the box-to-mask pipeline in `src.boxmask`.

The randomized suites draw strength grids and boxes with hypothesis and check:
- `threshold_fill` against an independent breadth-first flood fill;
- monotone regions: a higher cutoff never shrinks the region, with or without hole filling;
- partition: confident and uncertain pixels are disjoint and lie in the coarsest mask;
- the alpha guarantee of non-fallback masks;
- order independence of `merge_masks`.

The fixed cases cover hole filling and the class shares of `harden` over many seeds.
"""

from collections import deque
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from src.boxmask.masks import (
    BoundaryStrengthMap,
    BoundingBox,
    BoxMaskConfig,
    box_to_mask,
    harden,
    merge_masks,
    normalize_strength,
    raw_box_label,
    scale_masks,
    threshold_fill,
)
from src.boxmask.soft_label import SoftSegLabel
from src.boxmask.strategies import BaseStrategy, HardsegStrategy, RawboxStrategy, UcmStrategy
from src.lib.core import ClassConfig, Dims
from src.lib.exceptions import (
    InvalidBoxError,
    InvalidMaskConfigError,
    InvalidStrengthMapError,
    InvalidThresholdError,
    StrategyNotFoundError,
    UnimplementedBaselineError,
)

SIZE = 12
strengths = arrays(np.float64, (SIZE, SIZE), elements=st.sampled_from([0.0, 0.1, 0.3, 0.6, 0.8, 1.0]))


@st.composite
def boxes(draw, classes=4):
    x0 = draw(st.integers(0, SIZE - 1))
    y0 = draw(st.integers(0, SIZE - 1))
    x1 = draw(st.integers(x0, SIZE - 1))
    y1 = draw(st.integers(y0, SIZE - 1))
    return BoundingBox(draw(st.integers(1, classes)), x0, y0, x1, y1)


def bfs_fill(norm, t):
    height, width = norm.shape
    start = ((height - 1) // 2, (width - 1) // 2)
    region = np.zeros(norm.shape, dtype=bool)
    if norm[start] >= t:
        return region
    queue = deque([start])
    region[start] = True
    while queue:
        y, x = queue.popleft()
        for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
            if 0 <= ny < height and 0 <= nx < width and not region[ny, nx] and norm[ny, nx] < t:
                region[ny, nx] = True
                queue.append((ny, nx))
    return region


@settings(max_examples=300)
@given(arrays(np.float64, st.tuples(st.integers(1, 9), st.integers(1, 9)),
              elements=st.floats(0, 1, allow_nan=False)),
       st.sampled_from([0.25, 0.5, 0.75, 0.1, 0.9]))
def test_threshold_fill_matches_bfs_oracle(norm, t):
    np.testing.assert_array_equal(threshold_fill(norm, t), bfs_fill(norm, t))


@settings(max_examples=300)
@given(strengths, boxes())
def test_regions_grow_with_the_cutoff(strength, box):
    norm = normalize_strength(BoundaryStrengthMap.from_grid(strength), box)
    fills = [threshold_fill(norm, t) for t in (0.25, 0.5, 0.75)]
    for fine, coarse in zip(fills, fills[1:]):
        assert not np.any(fine & ~coarse)
    filled = scale_masks(norm, BoxMaskConfig())
    for fine, coarse in zip(filled, filled[1:]):
        assert not np.any(fine & ~coarse)
    for raw, closed in zip(fills, filled):
        assert not np.any(raw & ~closed)


@settings(max_examples=300)
@given(strengths, boxes(), st.sampled_from([10.0, 30.0, 60.0, 100.0]))
def test_partition_and_alpha_guarantee(strength, box, alpha):
    ucm = BoundaryStrengthMap.from_grid(strength)
    cfg = BoxMaskConfig(alpha_percent=alpha)
    mask = box_to_mask(ucm, box, cfg)
    coarsest = scale_masks(normalize_strength(ucm, box), cfg)[-1]
    assert not np.any(mask.confident & mask.uncertain)
    assert not np.any((mask.confident | mask.uncertain) & ~coarsest)
    if not mask.fallback:
        assert mask.confident.sum() * 100.0 >= alpha * box.area
    else:
        np.testing.assert_array_equal(mask.confident, coarsest)


@settings(max_examples=200)
@given(strengths, st.lists(boxes(), min_size=1, max_size=4), st.randoms(use_true_random=False))
def test_merge_is_order_independent(strength, box_list, shuffler):
    ucm = BoundaryStrengthMap.from_grid(strength)
    dims = Dims(SIZE, SIZE)
    masks = [box_to_mask(ucm, box, BoxMaskConfig()) for box in box_list]
    shuffled = list(masks)
    shuffler.shuffle(shuffled)
    first, second = merge_masks(masks, dims), merge_masks(shuffled, dims)
    np.testing.assert_array_equal(first.bitmasks, second.bitmasks)
    np.testing.assert_array_equal(first.uncertain, second.uncertain)
    # every pixel is uncertain xor carries a non-empty class set
    assert np.all((first.bitmasks == 0) == first.uncertain)


def test_zero_strength_box_is_fully_confident():
    ucm = BoundaryStrengthMap.from_grid(np.zeros((10, 10)))
    box = BoundingBox(2, 1, 2, 7, 8)
    mask = box_to_mask(ucm, box, BoxMaskConfig())
    assert mask.confident.all()
    assert not mask.uncertain.any()
    assert not mask.fallback


def test_single_pixel_box_is_confident():
    ucm = BoundaryStrengthMap.from_grid(np.random.default_rng(0).random((5, 5)))
    mask = box_to_mask(ucm, BoundingBox(1, 3, 3, 3, 3), BoxMaskConfig())
    assert mask.confident.tolist() == [[True]]


def test_ring_contour_picks_the_inside():
    """
    A closed square contour of strength 1 inside the box: every cutoff fills its interior.
    """
    strength = np.zeros((11, 11))
    strength[2, 2:9] = strength[8, 2:9] = strength[2:9, 2] = strength[2:9, 8] = 1.0
    ucm = BoundaryStrengthMap.from_grid(strength)
    mask = box_to_mask(ucm, BoundingBox(1, 0, 0, 10, 10), BoxMaskConfig(alpha_percent=20))
    expected = np.zeros((11, 11), dtype=bool)
    expected[3:8, 3:8] = True
    np.testing.assert_array_equal(mask.confident, expected)
    assert not mask.fallback


def test_fallback_uses_coarsest_and_leaves_nothing_uncertain():
    strength = np.zeros((11, 11))
    strength[2, 2:9] = strength[8, 2:9] = strength[2:9, 2] = strength[2:9, 8] = 1.0
    ucm = BoundaryStrengthMap.from_grid(strength)
    mask = box_to_mask(ucm, BoundingBox(1, 0, 0, 10, 10), BoxMaskConfig(alpha_percent=100))
    assert mask.fallback
    assert mask.confident.sum() == 25
    assert not mask.uncertain.any()


def test_pockets_inside_a_region_are_filled():
    """
    A stroke inside an object breaks the raw region but not the filled one.

    Asserts:
        - The raw region at 1/4 leaves the stroke out.
        - The filled region takes the stroke in; with fill_holes off it stays out.
        - The boundary ring touching the box edge stays outside either way.
    """
    strength = np.zeros((11, 11))
    strength[1, 1:10] = strength[9, 1:10] = strength[1:10, 1] = strength[1:10, 9] = 1.0
    strength[3, 3:6] = 0.5
    ucm = BoundaryStrengthMap.from_grid(strength)
    box = BoundingBox(1, 0, 0, 10, 10)
    norm = normalize_strength(ucm, box)
    raw = threshold_fill(norm, 0.25)
    filled = scale_masks(norm, BoxMaskConfig())[0]
    unfilled = scale_masks(norm, BoxMaskConfig(fill_holes=False))[0]
    assert not raw[3, 3:6].any()
    assert filled[3, 3:6].all()
    np.testing.assert_array_equal(unfilled, raw)
    assert filled.sum() == 49
    assert not filled[1].any() and not filled[:, 9].any()


def test_merge_overlap_and_uncertain():
    dims = Dims(4, 6)
    left = BoundingBox(1, 0, 0, 3, 3)
    right = BoundingBox(2, 2, 0, 5, 3)
    label = raw_box_label([left, right], dims)
    assert label.class_set(dims.encode(0, 0)) == {1}
    assert label.class_set(dims.encode(2, 1)) == {1, 2}
    assert label.class_set(dims.encode(5, 3)) == {2}

    ucm = BoundaryStrengthMap.from_grid(np.zeros(dims.shape))
    masks = [box_to_mask(ucm, BoundingBox(3, 0, 0, 1, 1), BoxMaskConfig())]
    label = merge_masks(masks, dims)
    assert label.class_set(dims.encode(5, 3)) == {0}


def test_merge_checks_class_range():
    ucm = BoundaryStrengthMap.from_grid(np.zeros((4, 4)))
    mask = box_to_mask(ucm, BoundingBox(5, 0, 0, 1, 1), BoxMaskConfig())
    with pytest.raises(InvalidBoxError):
        merge_masks([mask], Dims(4, 4), ClassConfig(4))


def test_harden_picks_one_class_per_region():
    dims = Dims(3, 5)
    sets = [[1, 2]] * 6 + [None] + [[0]] * 3 + [[2, 3]] * 5
    soft = SoftSegLabel.from_class_sets(dims, sets)
    first = harden(soft, seed=7)
    np.testing.assert_array_equal(first.values, harden(soft, seed=7).values)
    values = first.values
    assert len(set(values[:6].tolist())) == 1 and values[0] in (1, 2)
    assert values[6] == 255
    assert values[7:10].tolist() == [0, 0, 0]
    assert len(set(values[10:].tolist())) == 1 and values[10] in (2, 3)


def test_harden_draws_uniformly_over_seeds():
    """
    A two-class region takes either class about half the time over 1000 seeds.
    """
    dims = Dims(2, 2)
    soft = SoftSegLabel.from_class_sets(dims, [[1, 2]] * 4)
    firsts = [harden(soft, seed=seed).values[0] for seed in range(1000)]
    share = firsts.count(1) / len(firsts)
    assert set(firsts) == {1, 2}
    assert 0.45 <= share <= 0.55


@pytest.mark.parametrize(
    "strategy_name, expected_strategy",
    [
        ("ucm", UcmStrategy),
        ("rawbox", RawboxStrategy),
        ("HardSeg", HardsegStrategy),
    ]
)
def test_get_strategy(strategy_name, expected_strategy):
    assert BaseStrategy.get_strategy(strategy_name) is expected_strategy


@pytest.mark.parametrize("strategy_name", ["grabcut", "mcg"])
def test_unimplemented_baselines(strategy_name):
    with pytest.raises(UnimplementedBaselineError):
        BaseStrategy.get_strategy(strategy_name)


def test_unknown_strategy():
    with pytest.raises(StrategyNotFoundError):
        BaseStrategy.get_strategy("scribble")


def test_ucm_strategy_needs_strength(classes):
    with pytest.raises(InvalidStrengthMapError):
        UcmStrategy().label([BoundingBox(1, 0, 0, 2, 2)], None, Dims(4, 4), classes)


def test_strategies_on_a_scene(scenes, classes):
    scene = scenes[0]
    dims = scene.pixels.dims
    soft = UcmStrategy().label(scene.boxes, scene.strength, dims, classes)
    raw = RawboxStrategy().label(scene.boxes, None, dims, classes)
    hard = HardsegStrategy(seed=3).label(scene.boxes, scene.strength, dims, classes, key=5)
    again = HardsegStrategy(seed=3).label(scene.boxes, scene.strength, dims, classes, key=5)
    assert isinstance(soft, SoftSegLabel) and isinstance(raw, SoftSegLabel)
    assert not raw.uncertain.any()
    np.testing.assert_array_equal(hard.values, again.values)
    np.testing.assert_array_equal(hard.values == 255, soft.uncertain)


@pytest.mark.parametrize("kwargs", [
    {"alpha_percent": 0},
    {"alpha_percent": 120},
    {"thresholds": ()},
    {"thresholds": (0.5, 0.25)},
    {"thresholds": (0.0, 0.5)},
])
def test_mask_config_validation(kwargs):
    with pytest.raises(InvalidMaskConfigError):
        BoxMaskConfig(**kwargs)


def test_threshold_fill_rejects_cutoff():
    with pytest.raises(InvalidThresholdError):
        threshold_fill(np.zeros((3, 3)), 1.0)
