from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stochclifford.algebra import Multivector
from stochclifford.montecarlo import (
    MCEstimate,
    Moments,
    ScalarEstimate,
    block_ranges,
    map_blocks,
    stream_id,
    substream,
)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=2, max_size=60), st.integers(1, 59))
def test_moment_merge_equals_pooled(values, cut):
    x = np.array(values)
    cut = min(cut, len(x) - 1)
    merged = Moments.of(x[:cut]).merge(Moments.of(x[cut:]))
    pooled = Moments.of(x)
    assert merged.count == pooled.count
    np.testing.assert_allclose(merged.mean, pooled.mean, rtol=1e-9, atol=1e-9)
    np.testing.assert_allclose(merged.m2, pooled.m2, rtol=1e-7, atol=1e-6)


def test_moments_stderr():
    mom = Moments.of(np.array([1.0, 2.0, 3.0, 4.0]))
    assert mom.variance == pytest.approx(5.0 / 3.0)
    assert mom.stderr == pytest.approx(np.sqrt(5.0 / 12.0))
    assert Moments.of(np.array([1.0])).variance == 0.0


def test_substreams_are_deterministic_and_distinct():
    a = substream(7, "x", 0).standard_normal(5)
    np.testing.assert_array_equal(a, substream(7, "x", 0).standard_normal(5))
    assert not np.array_equal(a, substream(7, "x", 1).standard_normal(5))
    assert not np.array_equal(a, substream(7, "y", 0).standard_normal(5))
    assert not np.array_equal(a, substream(8, "x", 0).standard_normal(5))


def test_stream_id_is_stable():
    assert stream_id("bm") == stream_id("bm")
    assert stream_id(("wos", 1)) == stream_id("wos/1")
    assert stream_id(5) == 5


def test_block_ranges_cover_total():
    ranges = block_ranges(10, 4)
    assert ranges == [(0, 0, 4), (1, 4, 8), (2, 8, 10)]
    with pytest.raises(ValueError):
        block_ranges(0)


@pytest.mark.parametrize("threads", [1, 2, 5])
def test_map_blocks_is_thread_independent(threads):
    def fn(b, s, e):
        return Moments.of(substream(3, "t", b).standard_normal((e - s, 2)))
    ref = Moments.combine(map_blocks(fn, 1000, 1, 64))
    got = Moments.combine(map_blocks(fn, 1000, threads, 64))
    np.testing.assert_array_equal(got.mean, ref.mean)
    np.testing.assert_array_equal(got.m2, ref.m2)


def test_mc_estimate_within():
    est = MCEstimate(Multivector(1, [1.0, 0.0]), Multivector(1, [0.1, 0.1]), 100)
    assert est.within(Multivector(1, [1.2, -0.2]))
    assert not est.within(Multivector(1, [1.4, 0.0]))
    assert est.to_dict()["count"] == 100


def test_bernoulli_estimate():
    est = ScalarEstimate.of_bernoulli(25, 100)
    assert est.value == 0.25
    assert est.stderr == pytest.approx(np.sqrt(0.25 * 0.75 / 100))
