"""Compiled and pure-Python kernels must agree bit for bit."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from infoscribe import _pykernels
from infoscribe._backend import BACKEND, kernels as active

try:
    from infoscribe import _kernels as compiled
except ImportError:  # pragma: no cover - only without a build
    compiled = None

needs_ext = pytest.mark.skipif(compiled is None, reason="compiled extension not built")

grids = arrays(np.uint8, st.tuples(st.integers(1, 12), st.integers(1, 12)),
               elements=st.sampled_from([0, 5, 10, 20, 40, 80, 200, 255]))


def test_backend_reported():
    assert BACKEND in ("cython", "python")
    assert active.NAME == BACKEND


@needs_ext
@settings(max_examples=150, deadline=None)
@given(grids, st.data())
def test_grow_regions_equivalent(values, data):
    mask = data.draw(arrays(np.uint8, values.shape, elements=st.integers(0, 1)))
    tau = data.draw(st.sampled_from([0.0, 3.0, 12.0, 12.5, 40.0]))
    a = np.zeros(values.shape, dtype=np.int32)
    b = np.zeros(values.shape, dtype=np.int32)
    assert compiled.grow_regions(values, mask, tau, a, 7) == _pykernels.grow_regions(values, mask, tau, b, 7)
    assert np.array_equal(a, b)


@needs_ext
@settings(max_examples=150, deadline=None)
@given(grids, st.data())
def test_refine_pass_equivalent(ref, data):
    labels = data.draw(arrays(np.int32, ref.shape, elements=st.integers(1, 5)))
    dev = data.draw(arrays(np.uint8, ref.shape, elements=st.integers(0, 1)))
    means = np.array(data.draw(st.lists(st.floats(0, 255), min_size=6, max_size=6)))
    tau = data.draw(st.sampled_from([0.0, 12.0, 60.0]))
    l1, l2, d1, d2 = labels.copy(), labels.copy(), dev.copy(), dev.copy()
    n1 = compiled.refine_pass(ref, l1, d1, means, tau)
    n2 = _pykernels.refine_pass(ref, l2, d2, means, tau)
    assert n1 == n2
    assert np.array_equal(l1, l2) and np.array_equal(d1, d2)


@needs_ext
@settings(max_examples=100, deadline=None)
@given(arrays(np.int32, st.tuples(st.integers(1, 12), st.integers(1, 12)), elements=st.integers(1, 3)))
def test_label_components_equivalent(labels):
    a = np.zeros_like(labels)
    b = np.zeros_like(labels)
    assert compiled.label_components(labels, a) == _pykernels.label_components(labels, b)
    assert np.array_equal(a, b)


@needs_ext
@settings(max_examples=100, deadline=None)
@given(grids)
def test_squeeze_equivalent(a):
    assert np.array_equal(compiled.squeeze(a), _pykernels.squeeze(a))


@needs_ext
@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(1, 4), max_size=60))
def test_run_lengths_equivalent(seq):
    flat = np.array(seq, dtype=np.int32)
    v1, l1 = compiled.run_lengths(flat)
    v2, l2 = _pykernels.run_lengths(flat)
    assert v1.tolist() == v2.tolist() and l1.tolist() == l2.tolist()


def test_run_lengths_decode(kernels):
    flat = np.array([3, 3, 1, 1, 1, 3, 2], dtype=np.int32)
    vals, lens = kernels.run_lengths(flat)
    assert list(zip(vals.tolist(), lens.tolist())) == [(3, 2), (1, 3), (3, 1), (2, 1)]
    assert np.repeat(vals, lens).tolist() == flat.tolist()


def test_grow_respects_mask(kernels):
    values = np.zeros((1, 5), dtype=np.uint8)
    mask = np.array([[1, 1, 0, 1, 1]], dtype=np.uint8)
    labels = np.zeros((1, 5), dtype=np.int32)
    assert kernels.grow_regions(values, mask, 0.0, labels, 1) == 3
    assert labels.tolist() == [[1, 1, 0, 2, 2]]


def test_refine_tie_goes_to_lowest_label(kernels):
    ref = np.array([[10, 50, 90]], dtype=np.uint8)
    labels = np.array([[3, 1, 2]], dtype=np.int32)
    dev = np.array([[0, 1, 0]], dtype=np.uint8)
    means = np.array([0.0, 200.0, 40.0, 60.0])  # label 2 and 3 both 10 away from 50
    assert kernels.refine_pass(ref, labels, dev, means, 12.0) == 1
    assert labels.tolist() == [[3, 2, 2]]
