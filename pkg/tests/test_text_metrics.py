from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

from asrfair.errors import BothEmpty
from asrfair.text_metrics import normalized_distance, tokenize, word_counts, word_levenshtein

WORDS = st.lists(st.sampled_from(["a", "b", "c", "d"]), max_size=8)


def brute_levenshtein(a, b):
    """Exponential recursion straight from the definition."""
    if not a:
        return len(b)
    if not b:
        return len(a)
    if a[0] == b[0]:
        return brute_levenshtein(a[1:], b[1:])
    return 1 + min(brute_levenshtein(a[1:], b), brute_levenshtein(a, b[1:]), brute_levenshtein(a[1:], b[1:]))


@pytest.mark.parametrize("text,expected", [
    ("", []),
    ("Hello, world!", ["hello", "world"]),
    ("it's a state-of-the-art test.", ["it's", "a", "state-of-the-art", "test"]),
    ("  ...  --  ", []),
    ("\"Quoted\" (words)", ["quoted", "words"]),
    ("Ünïcode ÉTÉ", ["ünïcode", "été"]),
])
def test_tokenize(text, expected):
    assert tokenize(text) == expected


def test_no_diacritic_folding():
    assert tokenize("café") != tokenize("cafe")


@given(st.text())
def test_tokenize_idempotent(text):
    tokens = tokenize(text)
    assert tokenize(" ".join(tokens)) == tokens


def test_levenshtein_examples():
    assert word_levenshtein(["a", "b"], ["a", "b"]) == 0
    assert word_levenshtein(["a", "b", "c"], ["a", "x", "c"]) == 1
    assert word_levenshtein([], ["x", "y"]) == 2
    assert word_levenshtein(["a", "b", "c"], ["b", "c", "d"]) == 2


@given(WORDS, WORDS)
def test_levenshtein_matches_brute_force(a, b):
    assert word_levenshtein(a, b) == brute_levenshtein(a, b)


@given(WORDS, WORDS, WORDS)
def test_levenshtein_is_a_metric(a, b, c):
    d = word_levenshtein
    assert d(a, b) >= 0
    assert (d(a, b) == 0) == (a == b)
    assert d(a, b) == d(b, a)
    assert d(a, c) <= d(a, b) + d(b, c)


@given(WORDS, WORDS)
def test_normalized_distance_in_unit_interval(a, b):
    if not a and not b:
        with pytest.raises(BothEmpty):
            normalized_distance(a, b)
    else:
        assert 0.0 <= normalized_distance(a, b) <= 1.0


def test_normalized_distance_examples():
    assert normalized_distance(["x"], ["x"]) == 0.0
    assert normalized_distance([], ["x", "y"]) == 1.0
    a = [str(i) for i in range(10)]
    b = a[:3] + ["p", "q", "r"] + a[6:]
    assert normalized_distance(a, b) == pytest.approx(0.3)


def test_word_counts():
    assert word_counts([]) == {}
    assert word_counts(["a", "b", "a"]) == {"a": 2, "b": 1}
    assert word_counts(["a"])["zzz"] == 0


@given(WORDS, WORDS)
def test_word_counts_additive(a, b):
    assert word_counts(a + b) == Counter(word_counts(a)) + Counter(word_counts(b))
