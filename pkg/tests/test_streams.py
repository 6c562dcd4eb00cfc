"""Tests for keyed random streams and the replicate fan-out."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from CoalescentLab.utils.streams import run_replicates, substream, tag_word, tree_mean, tree_sum


def square(value):
    return value * value


def first_draw(key):
    return float(substream(11, 'replicate', key).random())


def test_same_key_same_stream():
    a = substream(5, 'fragmentation', 0.5, 3).random(8)
    b = substream(5, 'fragmentation', 0.5, 3).random(8)
    assert np.array_equal(a, b)


def test_different_keys_differ():
    base = substream(5, 'fragmentation', 0.5, 3).random(4)
    assert not np.array_equal(base, substream(5, 'fragmentation', 0.5, 4).random(4))
    assert not np.array_equal(base, substream(5, 'marginal', 0.5, 3).random(4))
    assert not np.array_equal(base, substream(6, 'fragmentation', 0.5, 3).random(4))
    assert not np.array_equal(base, substream(5, 'fragmentation', 0.25, 3).random(4))


def test_seed_is_mandatory():
    with pytest.raises(ValueError):
        substream(None, 'x')
    with pytest.raises(ValueError):
        substream(-1, 'x')
    with pytest.raises(ValueError):
        substream(1, 'x', -2)
    with pytest.raises(TypeError):
        substream(1, 'x', True)


def test_tag_word_is_stable():
    assert tag_word('g') == tag_word('g')
    assert tag_word('g') != tag_word('h')
    assert 0 <= tag_word('normalizer') < 2 ** 64


@settings(max_examples=50)
@given(st.lists(st.floats(min_value=-1e6, max_value=1e6), min_size=1, max_size=64))
def test_tree_sum_close_to_sum(values):
    assert tree_sum(values) == pytest.approx(sum(values), abs=1e-6)


def test_tree_sum_association_is_fixed():
    values = [0.1 * k for k in range(37)]
    assert tree_sum(values) == tree_sum(list(values))
    assert tree_mean([1.0, 2.0, 3.0]) == 2.0
    assert tree_sum([]) == 0.0
    with pytest.raises(ValueError):
        tree_mean([])


def test_run_replicates_keeps_job_order():
    assert run_replicates(square, [3, 1, 2]) == [9, 1, 4]
    with pytest.raises(ValueError):
        run_replicates(square, [1], workers=0)


def test_run_replicates_independent_of_worker_count():
    jobs = list(range(12))
    assert run_replicates(first_draw, jobs, 1) == run_replicates(first_draw, jobs, 3)
