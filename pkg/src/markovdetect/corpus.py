"""Tokenization and n-gram counting.

Symbols are always handled as integer codes into an :class:`Alphabet`; the
rest of the package never sees raw text.  Three schemes are supported:

* ``byte``  -- UTF-8 bytes of the text against a fixed 256-symbol alphabet,
  lossless round trip;
* ``char``  -- observed characters in order of first appearance, lossless;
* ``word``  -- whitespace-separated words, optionally capped to a vocabulary
  limit with the rarest words collapsed onto a reserved ``<oov>`` symbol.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import TokenizerError
from .util import dump_json, load_json

OOV_SYMBOL = "<oov>"
SCHEMES = ("byte", "char", "word")

_BYTE_SYMBOLS = tuple(chr(b) for b in range(256))


@dataclass(frozen=True)
class Alphabet:
    """Ordered set of distinct token strings with a bijective index map."""

    symbols: tuple[str, ...]
    oov_policy: str = "error"  # "error" | "map"

    def __post_init__(self):
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError("alphabet symbols must be unique")
        if len(self.symbols) < 2:
            raise ValueError("alphabet needs at least 2 symbols")
        if self.oov_policy not in ("error", "map"):
            raise ValueError(f"unknown oov policy {self.oov_policy!r}")
        if self.oov_policy == "map" and OOV_SYMBOL not in self.symbols:
            raise ValueError("oov policy 'map' requires the reserved symbol in the alphabet")
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(self.symbols)})

    @property
    def size(self) -> int:
        return len(self.symbols)

    def index(self, symbol: str) -> int:
        try:
            return self._index[symbol]
        except KeyError:
            if self.oov_policy == "map":
                return self._index[OOV_SYMBOL]
            raise TokenizerError(f"symbol {symbol!r} not in alphabet") from None

    def symbol(self, index: int) -> str:
        return self.symbols[index]

    def to_json(self) -> dict:
        return {"symbols": list(self.symbols), "oov_policy": self.oov_policy}

    @classmethod
    def from_json(cls, obj: dict) -> "Alphabet":
        return cls(tuple(obj["symbols"]), obj.get("oov_policy", "error"))


@dataclass
class TokenSeq:
    """Sequence of integer token codes."""

    tokens: np.ndarray

    def __post_init__(self):
        self.tokens = np.asarray(self.tokens, dtype=np.int64)
        if self.tokens.ndim != 1:
            raise ValueError("token array must be one-dimensional")

    def __len__(self) -> int:
        return int(self.tokens.shape[0])

    def __iter__(self):
        return iter(self.tokens.tolist())

    def validate(self, alphabet_size: int) -> None:
        if len(self) and (self.tokens.min() < 0 or self.tokens.max() >= alphabet_size):
            raise ValueError("token code out of alphabet range")


def _word_alphabet(words: list[str], vocab_limit: int | None) -> Alphabet:
    counts = Counter(words)
    first_seen: dict[str, int] = {}
    for i, w in enumerate(words):
        first_seen.setdefault(w, i)
    ordered = sorted(first_seen, key=first_seen.get)
    if vocab_limit is not None and len(ordered) > vocab_limit:
        # keep the most frequent (limit - 1) words, reserving one slot for <oov>;
        # rarest first to go, ties broken toward later first appearance
        keep = sorted(ordered, key=lambda w: (-counts[w], first_seen[w]))[: vocab_limit - 1]
        keep = sorted(keep, key=first_seen.get)
        return Alphabet(tuple(keep) + (OOV_SYMBOL,), oov_policy="map")
    return Alphabet(tuple(ordered))


def tokenize(
    text: str,
    scheme: str = "char",
    alphabet: Alphabet | None = None,
    vocab_limit: int | None = None,
) -> tuple[TokenSeq, Alphabet]:
    """Encode ``text`` under ``scheme``; returns the codes and the alphabet used.

    When ``alphabet`` is given the text is coded against it (applying its OOV
    policy); otherwise an alphabet is built from the text.
    """
    if scheme not in SCHEMES:
        raise TokenizerError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    if scheme == "byte":
        if alphabet is None:
            alphabet = Alphabet(_BYTE_SYMBOLS)
        data = text.encode("utf-8")
        codes = [alphabet.index(chr(b)) for b in data]
        return TokenSeq(np.array(codes, dtype=np.int64)), alphabet

    if scheme == "char":
        parts = list(text)
    else:
        parts = text.split()
    if not parts:
        raise TokenizerError(f"scheme {scheme!r} needs nonempty text")
    if alphabet is None:
        if scheme == "word":
            alphabet = _word_alphabet(parts, vocab_limit)
        else:
            seen: dict[str, None] = {}
            for p in parts:
                seen.setdefault(p)
            if len(seen) < 2:
                raise TokenizerError(
                    "text uses fewer than 2 distinct symbols; pass an explicit alphabet"
                )
            alphabet = Alphabet(tuple(seen))
    codes = [alphabet.index(p) for p in parts]
    return TokenSeq(np.array(codes, dtype=np.int64)), alphabet


def detokenize(seq: TokenSeq, alphabet: Alphabet, scheme: str = "char") -> str:
    """Invert :func:`tokenize`.  Exact for byte and char; word joins with spaces."""
    symbols = [alphabet.symbol(t) for t in seq]
    if scheme == "byte":
        return "".join(symbols).encode("latin-1").decode("utf-8")
    if scheme == "char":
        return "".join(symbols)
    return " ".join(symbols)


def count_windows(seq: TokenSeq, length: int) -> dict[tuple[int, ...], int]:
    """Counts of fully contained windows of the given length.

    A length-``m`` sequence has ``m - length + 1`` such windows (``m + 1`` for
    length 0, all of them the empty tuple).
    """
    if length < 0:
        raise ValueError("window length must be >= 0")
    m = len(seq)
    if length == 0:
        return {(): m + 1}
    if length > m:
        return {}
    toks = seq.tokens
    counts: Counter = Counter()
    if length == 1:
        vals, cnts = np.unique(toks, return_counts=True)
        return {(int(v),): int(c) for v, c in zip(vals, cnts)}
    windows = np.lib.stride_tricks.sliding_window_view(toks, length)
    for row in map(tuple, windows.tolist()):
        counts[row] += 1
    return dict(counts)


@dataclass
class NgramCounts:
    """Sparse table of (k+1)-gram counts: context length ``k`` plus next symbol."""

    k: int
    table: dict[tuple[int, ...], int]
    total_positions: int
    alphabet: Alphabet | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("context length must be >= 0")
        if sum(self.table.values()) != self.total_positions:
            raise ValueError("counts do not sum to the number of window positions")

    def to_json(self) -> dict:
        obj = {
            "k": self.k,
            "total_positions": self.total_positions,
            "entries": sorted([list(t), c] for t, c in self.table.items()),
        }
        if self.alphabet is not None:
            obj["alphabet"] = self.alphabet.to_json()
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "NgramCounts":
        table = {tuple(t): int(c) for t, c in obj["entries"]}
        alphabet = Alphabet.from_json(obj["alphabet"]) if "alphabet" in obj else None
        return cls(obj["k"], table, obj["total_positions"], alphabet)

    def save(self, path) -> None:
        dump_json(path, self.to_json())

    @classmethod
    def load(cls, path) -> "NgramCounts":
        return cls.from_json(load_json(path))


def count_ngrams(seq: TokenSeq, k: int, alphabet: Alphabet | None = None) -> NgramCounts:
    """Count windows of length ``k + 1`` (context of ``k`` symbols plus the next one)."""
    table = count_windows(seq, k + 1)
    total = max(len(seq) - k, 0)
    return NgramCounts(k, table, total, alphabet)
