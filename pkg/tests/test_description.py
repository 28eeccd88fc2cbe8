import dataclasses
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import GOLDEN
from infoscribe.description import (
    InvariantViolation,
    SchemaError,
    UnknownLevel,
    VersionError,
    density_profile,
    describe,
    deserialize,
    label_map,
    reconstruct,
    serialize,
    serialize_generic,
)
from infoscribe.raster import Raster
from infoscribe.registry import RegionDescriptor
from infoscribe.segmenter import SegParams
from oracles import level_text_spans
from synth import piecewise_constant, two_blobs

small_images = arrays(np.uint8, st.tuples(st.integers(1, 30), st.integers(1, 30)),
                      elements=st.sampled_from([0, 20, 90, 91, 160, 255]))


def test_uniform_single_run_everywhere():
    d = describe(Raster(np.full((16, 16), 77, dtype=np.uint8)))
    for lv in d.levels:
        assert len(lv.regions) == 1
        assert lv.support == ((1, lv.width * lv.height),)


def test_two_blobs_level0_three_regions():
    d = describe(Raster(two_blobs()))
    assert len(d.level(0).regions) == 3


def test_two_blobs_golden():
    text = serialize(describe(Raster(two_blobs())))
    assert text == (GOLDEN / "two_blobs.pid.json").read_text()


def test_reconstruct_rounds_half_up():
    d = describe(Raster(np.full((2, 2), 50, dtype=np.uint8)))
    lv = d.level(0)
    reg = lv.regions[0]
    for m, expect in ((50.4, 50), (50.5, 51), (254.6, 255)):
        r2 = dataclasses.replace(reg, mean_intensity=m)
        d2 = dataclasses.replace(d, levels=(dataclasses.replace(lv, regions=(r2,)),))
        assert reconstruct(d2).pixels.tolist() == [expect] * 4


def test_reconstruct_piecewise_exact(rng):
    for _ in range(10):
        img, _ = piecewise_constant(rng)
        assert np.array_equal(reconstruct(describe(Raster(img))).data, img)


def test_reconstruct_every_level_has_level_dims():
    d = describe(Raster(two_blobs()))
    for lv in d.levels:
        r = reconstruct(d, lv.level)
        assert (r.width, r.height) == (lv.width, lv.height)
    with pytest.raises(UnknownLevel):
        reconstruct(d, 99)


def test_label_map_matches_areas():
    d = describe(Raster(two_blobs()))
    for lv in d.levels:
        lab = label_map(d, lv.level)
        counts = np.bincount(lab.reshape(-1))
        assert all(counts[r.label] == r.area for r in lv.regions)


def test_serialize_twice_identical_and_generic_agrees():
    d = describe(Raster(two_blobs()))
    assert serialize(d) == serialize(d) == serialize_generic(d)


def test_canonical_text_has_fixed_decimals_and_no_spaces():
    text = serialize(describe(Raster(two_blobs())))
    assert " " not in text and "\n" not in text
    doc = json.loads(text)
    assert list(doc) == ["version", "meta", "levels", "density"]
    assert doc["version"] == "pid-1"
    assert '"tau_seg":12.000000' in text


def test_density_matches_byte_count_oracle():
    d = describe(Raster(two_blobs()))
    text = serialize(d)
    spans = level_text_spans(text)
    expect = [(lv.level, round(n / (lv.width * lv.height), 6)) for lv, n in zip(d.levels, spans)]
    assert density_profile(d) == expect
    assert [row[1] for row in d.density] == spans


def test_uniform_density_strictly_decreasing_toward_level0():
    d = describe(Raster(np.full((128, 128), 30, dtype=np.uint8)))
    dens = [v for _, v in density_profile(d)]
    assert all(b < a for a, b in zip(dens, dens[1:]))


@settings(max_examples=40, deadline=None)
@given(small_images, st.sampled_from([0, 5, 12, 40]))
def test_round_trip(a, tau):
    d = describe(Raster(a), SegParams(tau_seg=tau, tau_refine=tau))
    text = serialize(d)
    d2 = deserialize(text)
    assert d2 == d
    assert serialize(d2) == text


def test_round_trip_without_density():
    d = describe(Raster(two_blobs()), with_density=False)
    assert deserialize(serialize(d)) == d


def test_different_descriptions_different_bytes():
    a = describe(Raster(np.full((4, 4), 10, dtype=np.uint8)))
    b = describe(Raster(np.full((4, 4), 11, dtype=np.uint8)))
    assert serialize(a) != serialize(b)


# ---------------------------------------------------------------- failures

@pytest.fixture
def golden_doc():
    return json.loads((GOLDEN / "two_blobs.pid.json").read_text())


def _dump(doc):
    return json.dumps(doc, separators=(",", ":"))


def test_truncated_text():
    text = (GOLDEN / "two_blobs.pid.json").read_text()
    with pytest.raises(SchemaError):
        deserialize(text[: len(text) // 2])


def test_wrong_version(golden_doc):
    golden_doc["version"] = "pid-9"
    with pytest.raises(VersionError):
        deserialize(_dump(golden_doc))


def test_tampered_run_length(golden_doc):
    golden_doc["levels"][-1]["support"][0][1] += 1
    with pytest.raises(InvariantViolation):
        deserialize(_dump(golden_doc))


def test_missing_field(golden_doc):
    del golden_doc["levels"][0]["regions"][0]["area"]
    with pytest.raises(SchemaError):
        deserialize(_dump(golden_doc))


def test_wrong_type(golden_doc):
    golden_doc["meta"]["width"] = "64"
    with pytest.raises(SchemaError):
        deserialize(_dump(golden_doc))


def test_unknown_relation_kind(golden_doc):
    golden_doc["levels"][-1]["regions"][0]["relations"][0]["kind"] = "touches"
    with pytest.raises(SchemaError):
        deserialize(_dump(golden_doc))


def test_dangling_parent(golden_doc):
    reg = golden_doc["levels"][-1]["regions"][0]
    reg["parent"] = 999
    with pytest.raises(InvariantViolation):
        deserialize(_dump(golden_doc))


def test_asymmetric_adjacency(golden_doc):
    lv = golden_doc["levels"][-1]
    for reg in lv["regions"]:
        adj = [r for r in reg["relations"] if r["kind"] == "adjacent_to"]
        if adj:
            reg["relations"].remove(adj[0])
            break
    with pytest.raises(InvariantViolation):
        deserialize(_dump(golden_doc))


def test_tampered_density(golden_doc):
    golden_doc["density"][0]["bytes"] += 1
    with pytest.raises(InvariantViolation):
        deserialize(_dump(golden_doc))


def test_not_json():
    with pytest.raises(SchemaError):
        deserialize("{not json")
    with pytest.raises(SchemaError):
        deserialize(b"\xff\xfe")


def test_region_area_fraction_is_rounded():
    d = describe(Raster(np.arange(9, dtype=np.uint8).reshape(3, 3) * 30))
    for lv in d.levels:
        for r in lv.regions:
            assert isinstance(r, RegionDescriptor)
            assert math.isclose(r.area_fraction, round(r.area / (lv.width * lv.height), 6))
