"""
Tests for the general utility functions
"""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mesoed.util.util import (
    RandomStreams,
    get_numeric,
    is_power_of_two,
    map_chunks,
    max_standard_errors,
    replication_chunks,
)


def test_streams_are_reproducible():
    a = RandomStreams(99).generator("device", 4).standard_normal(10)
    b = RandomStreams(99).generator("device", 4).standard_normal(10)
    assert np.array_equal(a, b)


def test_streams_differ_by_device_replication_and_seed():
    streams = RandomStreams(99)
    base = streams.generator("device", 4).standard_normal(10)
    assert not np.array_equal(base, streams.generator("other", 4).standard_normal(10))
    assert not np.array_equal(base, streams.generator("device", 5).standard_normal(10))
    assert not np.array_equal(base, RandomStreams(100).generator("device", 4).standard_normal(10))


def test_streams_independent_of_other_devices():
    """A device's draws do not depend on which other devices draw first."""
    streams = RandomStreams(5)
    alone = streams.generator("a", 0).standard_normal(4)
    streams.generator("b", 0).standard_normal(100)
    assert np.array_equal(alone, streams.generator("a", 0).standard_normal(4))


@pytest.mark.parametrize("seed", [-1, -100])
def test_negative_seed(seed):
    with pytest.raises(ValueError):
        RandomStreams(seed)


def test_negative_replication():
    with pytest.raises(ValueError):
        RandomStreams(0).generator("a", -1)


@given(st.integers(min_value=1, max_value=500), st.integers(min_value=1, max_value=64))
def test_replication_chunks_cover_in_order(n, size):
    chunks = replication_chunks(n, chunk_size=size)
    flat = [index for chunk in chunks for index in chunk]
    assert flat == list(range(n))
    assert all(len(chunk) <= size for chunk in chunks)


def test_replication_chunks_explicit_indices():
    assert replication_chunks([4, 7, 9], chunk_size=2) == [[4, 7], [9]]


@pytest.mark.parametrize("n, size", [(0, 4), (10, 0)])
def test_replication_chunks_invalid(n, size):
    with pytest.raises(ValueError):
        replication_chunks(n, chunk_size=size)


@settings(deadline=None, max_examples=20)
@given(st.integers(min_value=1, max_value=8))
def test_map_chunks_order_independent_of_threads(threads):
    chunks = replication_chunks(37, chunk_size=5)
    expected = [sum(chunk) for chunk in chunks]
    assert map_chunks(sum, chunks, threads=threads) == expected


@pytest.mark.parametrize("n, expected", [(1, True), (2, True), (64, True), (0, False), (12, False), (-4, False)])
def test_is_power_of_two(n, expected):
    assert is_power_of_two(n) is expected


def test_get_numeric():
    assert get_numeric("psd_tolerance") == pytest.approx(1e-10)
    assert get_numeric("not_an_option", 3.5) == 3.5


def test_max_standard_errors():
    assert max_standard_errors([1.0, -3.0], [1.0, 1.5]) == pytest.approx(2.0)
    assert max_standard_errors([0.0], [0.0]) == 0.0
    assert max_standard_errors([1e-12], [0.0], atol=1e-9) == 0.0
    assert max_standard_errors([1e-3], [0.0], atol=1e-9) == np.inf
    assert max_standard_errors([], []) == 0.0
