import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from infoscribe.pyramid import build_pyramid
from infoscribe.raster import Raster
from infoscribe.segmenter import (
    DimensionMismatch,
    LabelMap,
    SegParams,
    Segmentation,
    compute_stats,
    expand_level,
    extract_segments,
    segment_top,
)
from oracles import grow_2d, ramp_segments
from synth import square_on_ground


def _coarse(labels, means):
    labels = np.asarray(labels, dtype=np.int32)
    lm = LabelMap(labels, int(labels.max()) + 1)
    ref = Raster(np.zeros(labels.shape, dtype=np.uint8))
    rs = compute_stats(ref, labels, lm.next_label)
    rs.means[:] = means
    return Segmentation(lm, rs)


def test_uniform_top():
    seg = segment_top(Raster(np.full((4, 4), 50, dtype=np.uint8)))
    assert np.all(seg.labels.labels == 1)
    assert seg.stats.counts[1] == 16 and seg.stats.means[1] == 50


def test_halves_top():
    a = np.zeros((4, 4), dtype=np.uint8)
    a[:, 2:] = 255
    seg = segment_top(Raster(a))
    assert seg.labels.labels[:, :2].tolist() == [[1, 1]] * 4
    assert seg.labels.labels[:, 2:].tolist() == [[2, 2]] * 4
    assert seg.stats.means[1] == 0 and seg.stats.means[2] == 255


def test_ramp_example():
    seg = segment_top(Raster.from_pixels(5, 1, [0, 10, 20, 30, 40]), SegParams(tau_seg=12))
    assert seg.labels.labels[0].tolist() == [1, 1, 2, 2, 3]


def test_zero_tolerance_singletons():
    seg = segment_top(Raster.from_pixels(2, 2, [1, 2, 3, 4]), SegParams(tau_seg=0))
    assert sorted(seg.labels.labels.reshape(-1).tolist()) == [1, 2, 3, 4]


@pytest.mark.parametrize("n", range(1, 5))
def test_ramps_match_oracle_exhaustive_small(n):
    # the acceptance suite covers N <= 8; this keeps the unit suite quick
    for vals in itertools.product(range(0, 251, 50), repeat=n):
        seg = segment_top(Raster.from_pixels(n, 1, list(vals)))
        assert seg.labels.labels[0].tolist() == ramp_segments(vals, 12)


@settings(max_examples=150, deadline=None)
@given(arrays(np.uint8, st.tuples(st.integers(1, 9), st.integers(1, 9)),
              elements=st.sampled_from([0, 6, 12, 13, 25, 30, 60, 200])),
       st.sampled_from([0, 6, 12, 12.5, 30]))
def test_segment_top_matches_2d_oracle(a, tau):
    seg = segment_top(Raster(a), SegParams(tau_seg=tau))
    assert seg.labels.labels.tolist() == grow_2d(a.tolist(), tau)


def test_expand_perfect_inheritance():
    coarse = _coarse([[1]], [0.0, 50.0])
    seg = expand_level(coarse, Raster(np.full((2, 2), 50, dtype=np.uint8)))
    assert seg.labels.labels.tolist() == [[1, 1], [1, 1]]
    assert seg.stats.means[1] == 50


def test_expand_births_new_components():
    coarse = _coarse([[1]], [0.0, 127.0])
    trace = []
    seg = expand_level(coarse, Raster.from_pixels(2, 2, [0, 0, 255, 255]),
                       SegParams(tau_refine=12, min_seed=1), trace)
    # all four pixels start deviant; the two new components get labels 2 and 3
    assert trace[0] == 4
    assert seg.labels.labels.tolist() == [[2, 2], [3, 3]]
    assert seg.stats.means[2] == 0 and seg.stats.means[3] == 255
    assert seg.labels.next_label == 4


def test_expand_infinite_tolerance_is_upscale(rng):
    top = rng.integers(1, 5, (3, 4)).astype(np.int32)
    coarse = _coarse(top, rng.uniform(0, 255, 5))
    ref = Raster(rng.integers(0, 256, (6, 7), dtype=np.uint8))
    trace = []
    seg = expand_level(coarse, ref, SegParams(tau_refine=255), trace)
    assert trace == [0]
    up = np.repeat(np.repeat(top, 2, 0), 2, 1)[:6, :7]
    assert np.array_equal(seg.labels.labels, up)


def test_expand_dimension_mismatch():
    coarse = _coarse([[1, 1]], [0.0, 10.0])
    with pytest.raises(DimensionMismatch):
        expand_level(coarse, Raster(np.zeros((2, 2), dtype=np.uint8)))
    with pytest.raises(DimensionMismatch):
        expand_level(coarse, Raster(np.zeros((2, 5), dtype=np.uint8)))


def test_deviant_count_non_increasing(rng):
    for _ in range(20):
        ref = Raster(rng.integers(0, 256, (16, 16), dtype=np.uint8))
        coarse = segment_top(build_pyramid(ref, 64).top)
        trace = []
        expand_level(coarse, ref, SegParams(max_refine_passes=8), trace)
        assert all(b <= a for a, b in zip(trace, trace[1:]))
        assert len(trace) <= 9


def test_uniform_every_level_one_region():
    for seg in extract_segments(Raster(np.full((64, 64), 90, dtype=np.uint8))):
        assert seg.stats.present().tolist() == [1]


def test_square_two_regions_every_level():
    img = square_on_ground()
    segs = extract_segments(Raster(img))
    for seg in segs:
        assert seg.stats.present().size == 2
    lv0 = segs[-1]
    bright = lv0.labels.labels[32, 32]
    assert abs(int(lv0.stats.counts[bright]) - 256) <= 8


def test_one_pixel_pipeline():
    segs = extract_segments(Raster.from_pixels(1, 1, [5]))
    assert len(segs) == 1 and segs[0].labels.labels.tolist() == [[1]]


@settings(max_examples=40, deadline=None)
@given(arrays(np.uint8, st.tuples(st.integers(1, 40), st.integers(1, 40)),
              elements=st.sampled_from([0, 40, 90, 130, 200, 250])))
def test_partition_invariants(a):
    r = Raster(a)
    segs = extract_segments(r)
    pyr = build_pyramid(r)
    assert len(segs) == len(pyr)
    for seg, lv in zip(segs, reversed(pyr.levels)):
        lab = seg.labels.labels
        assert lab.shape == lv.data.shape
        assert lab.min() >= 1 and lab.max() < seg.labels.next_label
        assert seg.stats == compute_stats(lv, lab, seg.labels.next_label)
        assert int(seg.stats.counts.sum()) == lab.size


def test_labels_monotone_across_levels(rng):
    a = rng.integers(0, 256, (40, 40), dtype=np.uint8)
    segs = extract_segments(Raster(a))
    for hi, lo in zip(segs, segs[1:]):
        assert lo.labels.next_label >= hi.labels.next_label


def test_params_validation():
    with pytest.raises(ValueError):
        SegParams(tau_seg=-1)
    with pytest.raises(ValueError):
        SegParams(min_seed=0)
    with pytest.raises(ValueError):
        SegParams(max_refine_passes=0)
    assert SegParams(tau_seg=12) == SegParams(tau_seg=12.0)


def test_deterministic(rng):
    a = rng.integers(0, 256, (50, 37), dtype=np.uint8)
    s1 = extract_segments(Raster(a))
    s2 = extract_segments(Raster(a.copy()))
    assert all(x.labels == y.labels and x.stats == y.stats for x, y in zip(s1, s2))
