import itertools

import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from signseg.decoding import (
    DEFAULT_GRID, DecodeMode, DecodeParams, argmax_decode, decode, greedy_decode,
    tune_thresholds,
)
from signseg.tags import B, I, O, Segment, TagScheme, decode_gold_tags, encode_tags

DEFAULTS = DecodeParams()


def rows(*triples):
    return np.array(triples, dtype=float)


def one_hot(tags):
    out = np.zeros((len(tags), 3))
    out[np.arange(len(tags)), tags] = 100.0
    return out


def test_greedy_trace_from_pseudocode():
    probs = rows((10, 10, 80), (90, 5, 5), (10, 80, 10), (10, 80, 10), (5, 15, 80))
    assert greedy_decode(probs, DEFAULTS) == [Segment(1, 4)]


def test_greedy_all_outside():
    assert greedy_decode(rows(*[(5, 5, 90)] * 6), DEFAULTS) == []


def test_greedy_back_to_back_quirk():
    # the frame-2 B spike closes the segment but does not open a new one
    probs = rows((90, 5, 5), (10, 80, 10), (90, 5, 5), (10, 80, 10))
    assert greedy_decode(probs, DEFAULTS) == [Segment(0, 2)]


def test_greedy_strict_bio_reopens():
    probs = rows((90, 5, 5), (10, 80, 10), (90, 5, 5), (10, 80, 10))
    params = DecodeParams(strict_bio=True)
    assert greedy_decode(probs, params) == [Segment(0, 2), Segment(2, 4)]


def test_greedy_open_segment_runs_to_end():
    probs = rows((5, 5, 90), (90, 5, 5), (10, 80, 10))
    assert greedy_decode(probs, DEFAULTS) == [Segment(1, 3)]


def test_greedy_singleton_between_outside():
    assert greedy_decode(one_hot([O, B, O]), DEFAULTS) == [Segment(1, 2)]


def test_probs_validation():
    with pytest.raises(ValueError):
        greedy_decode(np.zeros((3, 2)), DEFAULTS)
    with pytest.raises(ValueError, match="sum"):
        greedy_decode(rows((10, 10, 10)), DEFAULTS)
    with pytest.raises(ValueError):
        DecodeParams(threshold_b=101)
    with pytest.raises(ValueError):
        DecodeParams(threshold_o=-1)


def test_argmax_matches_gold_decoder_exhaustive_small():
    for t in range(1, 6):
        for tags in itertools.product((B, I, O), repeat=t):
            expected = decode_gold_tags(list(tags), TagScheme.BIO)
            got = argmax_decode(one_hot(tags))
            assert got == expected, tags


def test_argmax_uniform_rows_tie_break():
    # ties resolve toward B, so every frame starts a one-frame segment
    probs = np.full((4, 3), 100 / 3)
    assert argmax_decode(probs) == [Segment(i, i + 1) for i in range(4)]


def test_argmax_no_opener():
    assert argmax_decode(one_hot([O, O, O])) == []


def test_decode_dispatch():
    probs = one_hot([O, B, I, O])
    thresh = DecodeParams(mode=DecodeMode.THRESHOLD)
    amax = DecodeParams(mode=DecodeMode.ARGMAX)
    assert decode(probs, thresh) == decode(probs, amax) == [Segment(1, 3)]


@st.composite
def prob_streams(draw):
    t = draw(st.integers(0, 24))
    raw = draw(st.lists(
        st.tuples(st.floats(0.001, 1), st.floats(0.001, 1), st.floats(0.001, 1)),
        min_size=t, max_size=t))
    arr = np.array(raw, dtype=float).reshape(t, 3)
    return 100.0 * arr / arr.sum(axis=1, keepdims=True) if t else np.zeros((0, 3))


@given(prob_streams())
def test_greedy_output_well_formed(probs):
    segs = greedy_decode(probs, DEFAULTS)
    prev_end = 0
    for seg in segs:
        assert 0 <= seg.start < seg.end <= len(probs)
        assert seg.start >= prev_end
        prev_end = seg.end


def test_threshold_b_count_is_not_monotone():
    # Raising threshold_b CAN increase the segment count: below every b the
    # close gate never arms and one long segment survives, while a higher
    # threshold arms it mid-stream and later spikes split the stream.
    probs = rows((33, 34, 33), (20, 40, 40), (33, 34, 33), (33, 34, 33))
    assert len(greedy_decode(probs, DecodeParams(threshold_b=11))) == 1
    assert len(greedy_decode(probs, DecodeParams(threshold_b=21))) == 2


def perfect_at_fifty_fixture():
    # gold [2,5) of 8 frames; (50,50) is the unique perfect grid cell:
    # outside b=45 makes any threshold_b <= 40 open early and never close,
    # the opener 60 clears only threshold_b <= 50, interior o=45 closes
    # prematurely for threshold_o <= 40, and the boundary o=55 only clears
    # threshold_o = 50.
    probs = rows(
        (45, 0, 55), (45, 0, 55),
        (60, 30, 10), (40, 15, 45), (40, 15, 45),
        (45, 0, 55), (45, 0, 55), (45, 0, 55),
    )
    return probs, [Segment(2, 5)]


def test_tune_returns_default_pair_on_constructed_fixture():
    probs, gold = perfect_at_fifty_fixture()
    tb, to, table = tune_thresholds([(probs, gold)])
    assert (tb, to) == (50, 50)
    assert len(table) == len(list(DEFAULT_GRID)) ** 2 == 81
    best = next(c for c in table if (c.threshold_b, c.threshold_o) == (50, 50))
    assert best.iou == 1.0
    assert best.percentage == 1.0


def test_tune_rejects_empty_dev_and_empty_gold():
    with pytest.raises(ValueError, match="empty"):
        tune_thresholds([])
    with pytest.raises(ValueError, match="gold"):
        tune_thresholds([(one_hot([O, O]), [])])


def test_tune_table_is_full_grid():
    probs, gold = perfect_at_fifty_fixture()
    _, _, table = tune_thresholds([(probs, gold)])
    pairs = {(c.threshold_b, c.threshold_o) for c in table}
    assert pairs == set(itertools.product(range(10, 91, 10), repeat=2))
