import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import dp_edit_distance
from schemajoin.errors import ParameterError
from schemajoin.text import (
    count_filter_bound,
    edit_distance,
    probe_threshold,
    qgrams,
    shared_gram_count,
    within_distance,
)

words = st.text(alphabet="abcdeé日", max_size=24)


@pytest.mark.parametrize("a,b,d", [
    ("", "", 0),
    ("", "abc", 3),
    ("kitten", "sitting", 3),
    ("word", "work", 1),
    ("name", "nabe", 1),
    ("import", "export", 2),
    ("flaw", "lawn", 2),
])
def test_known_distances(a, b, d):
    assert edit_distance(a, b) == d
    assert edit_distance(b, a) == d


def test_code_points_not_bytes():
    assert edit_distance("café", "cafe") == 1
    assert edit_distance("日本", "日") == 1


def test_long_strings_cross_word_boundary():
    rng = random.Random(7)
    for _ in range(50):
        a = "".join(rng.choice("ab") for _ in range(rng.randrange(60, 140)))
        b = "".join(rng.choice("ab") for _ in range(rng.randrange(60, 140)))
        assert edit_distance(a, b) == dp_edit_distance(a, b)


@settings(max_examples=300)
@given(words, words)
def test_matches_dp(a, b):
    assert edit_distance(a, b) == dp_edit_distance(a, b)


@settings(max_examples=200)
@given(words, words, words)
def test_metric_axioms(a, b, c):
    ab, bc, ac = edit_distance(a, b), edit_distance(b, c), edit_distance(a, c)
    assert (ab == 0) == (a == b)
    assert ab == edit_distance(b, a)
    assert ac <= ab + bc


@given(words, words, st.integers(-2, 6))
def test_within_distance(a, b, limit):
    assert within_distance(a, b, limit) == (limit >= 0 and dp_edit_distance(a, b) <= limit)


def test_qgrams_unpadded():
    assert qgrams("abc", 2).grams == ("ab", "bc")
    assert len(qgrams("a", 2)) == 0
    assert qgrams("aaa", 2).counts()["aa"] == 2


def test_q_must_be_positive():
    with pytest.raises(ParameterError):
        qgrams("abc", 0)


@settings(max_examples=300)
@given(words, st.integers(1, 4))
def test_gram_count(s, q):
    assert len(qgrams(s, q)) == max(0, len(s) - q + 1)


@settings(max_examples=300)
@given(words, words, st.integers(1, 3))
def test_count_filter_never_prunes_a_true_match(a, b, q):
    d = dp_edit_distance(a, b)
    for eps in range(d, d + 2):
        assert shared_gram_count(a, b, q) >= count_filter_bound(len(a), len(b), q, eps)


def test_bounds_formulas():
    assert count_filter_bound(6, 4, 2, 1) == 3
    assert probe_threshold(6, 2, 1) == 3
    assert probe_threshold(3, 2, 1) == 0
