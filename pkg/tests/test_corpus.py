import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from markovdetect.corpus import (
    OOV_SYMBOL,
    Alphabet,
    NgramCounts,
    TokenSeq,
    count_ngrams,
    count_windows,
    detokenize,
    tokenize,
)
from markovdetect.errors import TokenizerError


def test_char_round_trip():
    text = "abracadabra"
    seq, alphabet = tokenize(text, "char")
    assert detokenize(seq, alphabet, "char") == text
    # symbols are indexed in order of first appearance
    assert alphabet.symbols == ("a", "b", "r", "c", "d")


def test_char_coding_example():
    seq, alphabet = tokenize("aab", "char")
    assert seq.tokens.tolist() == [0, 0, 1]
    assert alphabet.symbols == ("a", "b")


def test_byte_round_trip_utf8():
    text = "héllo — ωorld"
    seq, alphabet = tokenize(text, "byte")
    assert alphabet.size == 256
    assert detokenize(seq, alphabet, "byte") == text
    assert len(seq) == len(text.encode("utf-8"))


def test_word_scheme_vocab_limit():
    text = "the cat sat on the mat the cat"
    seq, alphabet = tokenize(text, "word", vocab_limit=3)
    assert alphabet.size == 3
    assert OOV_SYMBOL in alphabet.symbols
    # "the" (3x) and "cat" (2x) survive; everything else folds to the oov bucket
    kept = set(alphabet.symbols) - {OOV_SYMBOL}
    assert kept == {"the", "cat"}


def test_word_scheme_keeps_all_below_limit():
    # most frequent word first, appearance order breaking ties
    seq, alphabet = tokenize("b a b", "word")
    assert alphabet.symbols == ("b", "a")
    assert detokenize(seq, alphabet, "word") == "b a b"


def test_empty_text_rejected():
    with pytest.raises(TokenizerError):
        tokenize("", "char")
    with pytest.raises(TokenizerError):
        tokenize("   ", "word")


def test_single_symbol_text_rejected():
    with pytest.raises(TokenizerError):
        tokenize("aaaa", "char")


def test_explicit_alphabet_oov_error():
    alphabet = Alphabet(symbols=("a", "b"))
    with pytest.raises(TokenizerError):
        tokenize("abc", "char", alphabet=alphabet)


def test_explicit_alphabet_oov_map():
    alphabet = Alphabet(symbols=("a", "b", OOV_SYMBOL), oov_policy="map")
    seq, _ = tokenize("abcd", "char", alphabet=alphabet)
    assert seq.tokens.tolist() == [0, 1, 2, 2]


def test_alphabet_needs_two_symbols():
    with pytest.raises(ValueError):
        Alphabet(symbols=("a",))


def test_alphabet_json_round_trip():
    alphabet = Alphabet(symbols=("x", "y", OOV_SYMBOL), oov_policy="map")
    again = Alphabet.from_json(alphabet.to_json())
    assert again == alphabet


# -- window counting --------------------------------------------------------


def test_count_windows_hand_example():
    seq, _ = tokenize("aabab", "char")
    counts = count_windows(seq, 2)
    named = {("a", "a"): 1, ("a", "b"): 2, ("b", "a"): 1}
    assert counts == {(0, 0): 1, (0, 1): 2, (1, 0): 1}
    assert sum(counts.values()) == 4
    assert len(named) == len(counts)


def test_count_windows_length_zero_and_long():
    seq = TokenSeq(np.array([0, 1, 0]))
    assert count_windows(seq, 0) == {(): 4}
    assert count_windows(seq, 3) == {(0, 1, 0): 1}
    assert count_windows(seq, 4) == {}


@given(
    tokens=st.lists(st.integers(0, 2), min_size=2, max_size=40),
    k=st.integers(0, 3),
)
@settings(max_examples=200, deadline=None)
def test_window_marginalization(tokens, k):
    """Summing (k+1)-gram counts over the final symbol recovers the k-gram
    counts of the first m-1 positions."""
    if len(tokens) < k + 1:
        return
    seq = TokenSeq(np.array(tokens))
    full = count_windows(seq, k + 1)
    prefix = count_windows(TokenSeq(seq.tokens[:-1]), k)
    marginal: dict = {}
    for window, c in full.items():
        marginal[window[:-1]] = marginal.get(window[:-1], 0) + c
    assert marginal == prefix


@given(tokens=st.lists(st.integers(0, 1), min_size=1, max_size=50), length=st.integers(1, 6))
@settings(max_examples=150, deadline=None)
def test_window_total(tokens, length):
    seq = TokenSeq(np.array(tokens))
    counts = count_windows(seq, length)
    expect = max(len(tokens) - length + 1, 0)
    assert sum(counts.values()) == expect


# -- ngram counts artifact --------------------------------------------------


def test_ngram_counts_round_trip(tmp_path):
    seq, alphabet = tokenize("aababba", "char")
    counts = count_ngrams(seq, 1, alphabet)
    path = tmp_path / "counts.json"
    counts.save(path)
    again = NgramCounts.load(path)
    assert again.k == counts.k
    assert again.table == counts.table
    assert again.total_positions == counts.total_positions
    # file itself is deterministic
    counts.save(tmp_path / "counts2.json")
    assert path.read_bytes() == (tmp_path / "counts2.json").read_bytes()


def test_ngram_counts_total_positions():
    seq, alphabet = tokenize("aababba", "char")
    counts = count_ngrams(seq, 2, alphabet)
    assert counts.total_positions == len(seq) - 2
    assert sum(counts.table.values()) == counts.total_positions


def test_token_seq_validation():
    seq = TokenSeq(np.array([0, 3]))
    with pytest.raises(ValueError):
        seq.validate(2)
