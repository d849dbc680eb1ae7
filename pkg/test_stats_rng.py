"""Labelled random streams and nearest-rank statistics."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from errors import ConfigurationError, EmptySampleError
from stats_rng import (SeedSpec, derive_stream, ecdf_export, height_label, nearest_rank, percentile, percentiles,
                       purpose_code, stream)


def test_same_labels_same_draws():
    a = stream(42, "shadow", 3, 7).standard_normal(5)
    b = derive_stream(SeedSpec(42, "shadow", (3, 7))).standard_normal(5)
    assert np.array_equal(a, b)


def test_streams_do_not_depend_on_use_order():
    first = stream(1, "drop", 0).random(3)
    stream(1, "drop", 1).random(1000)
    assert np.array_equal(stream(1, "drop", 0).random(3), first)


def test_labels_and_purposes_separate_streams():
    base = stream(1, "drop", 0).random(4)
    assert not np.array_equal(base, stream(1, "drop", 1).random(4))
    assert not np.array_equal(base, stream(1, "phase", 0).random(4))
    assert not np.array_equal(base, stream(2, "drop", 0).random(4))


def test_purpose_code_is_stable():
    assert purpose_code("drop") == purpose_code("drop")
    assert purpose_code("drop") != purpose_code("phase")


@pytest.mark.parametrize("seed, labels", [(-1, ()), (2 ** 64, ()), (1, (-3,))])
def test_invalid_seed_or_label(seed, labels):
    with pytest.raises(ConfigurationError):
        stream(seed, "x", *labels)


def test_height_label():
    assert height_label(1.5) == 15
    assert height_label(300) == 3000


def test_nearest_rank_examples():
    assert nearest_rank(50, 100) == 50
    assert nearest_rank(0, 10) == 1
    assert nearest_rank(100, 10) == 10
    assert nearest_rank(95, 20) == 19
    assert nearest_rank(10, 10) == 1


def test_percentile_examples():
    samples = np.arange(1, 101)
    assert percentile(samples, 50) == 50
    assert percentile(samples, 95) == 95
    assert percentile(samples, 100) == 100
    assert percentile([5.0], 1) == 5.0


def test_percentile_puts_infinity_last():
    samples = [3.0, math.inf, 1.0, 2.0]
    assert percentile(samples, 100) == math.inf
    assert percentile(samples, 50) == 2.0


@settings(derandomize=True, max_examples=200)
@given(values=st.lists(st.floats(min_value=-1e6, max_value=1e6), min_size=1, max_size=400),
       p=st.floats(min_value=0.0, max_value=100.0))
def test_percentile_matches_sort_index_oracle(values, p):
    ordered = sorted(values)
    rank = max(1, math.ceil(round(p * len(values) / 100.0, 9)))
    assert percentile(values, p) == ordered[rank - 1]


def test_percentile_oracle_on_large_sample():
    values = stream(9, "oracle").standard_normal(10_000)
    ordered = np.sort(values)
    table = percentiles(values, (5, 10, 50, 90, 95, 99))
    for p, v in table.items():
        assert v == ordered[math.ceil(p * 10_000 / 100) - 1]


def test_empty_samples_raise():
    with pytest.raises(EmptySampleError):
        percentile([], 50)
    with pytest.raises(EmptySampleError):
        ecdf_export([])


def test_percentile_out_of_range():
    with pytest.raises(ConfigurationError):
        percentile([1.0], 101)


def test_ecdf_export():
    assert ecdf_export([2.0, 1.0, 1.0]) == [(1.0, pytest.approx(2 / 3)), (2.0, 1.0)]
    points = ecdf_export(stream(1, "ecdf").random(500))
    fractions = [f for _, f in points]
    assert fractions[-1] == 1.0
    assert all(b > a for a, b in zip(fractions, fractions[1:]))


def test_streams_differing_in_one_label_are_uncorrelated():
    a = stream(5, "shadow", 3, 7).standard_normal(100_000)
    b = stream(5, "shadow", 3, 8).standard_normal(100_000)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.02


def test_gaussian_stream_moments():
    draws = stream(5, "moments").standard_normal(1_000_000)
    assert abs(draws.mean()) < 0.01
    assert abs(draws.std() - 1.0) < 0.01
