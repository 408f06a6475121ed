"""Small shared helpers: seeding, canonical JSON, atom indexing."""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np


def spawn_rng(seed: int, *key: int) -> np.random.Generator:
    """Deterministic child generator for (seed, key...).

    The mixing function is ``np.random.SeedSequence([seed, *key])``; the same
    tuple always yields the same stream, independent of call order, which is
    what makes fan-out across workers reproducible.
    """
    if seed < 0:
        raise ValueError("seeds must be non-negative integers")
    return np.random.default_rng(np.random.SeedSequence([seed, *key]))


def fmt17(x: float) -> str:
    """Format a float with 17 significant digits (lossless for float64)."""
    return format(float(x), ".17g")


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(obj) -> str:
    """Short content hash of a JSON-serializable settings object."""
    return hashlib.sha1(canonical_json(obj).encode("utf-8")).hexdigest()


def dump_json(path: str | Path, obj) -> None:
    """Write JSON deterministically: sorted keys, fixed layout, trailing newline."""
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def load_json(path: str | Path):
    return json.loads(Path(path).read_text())


def atom_count(alphabet_size: int, length: int) -> int:
    return alphabet_size ** length


def index_to_atom(index: int, alphabet_size: int, length: int) -> tuple[int, ...]:
    """Inverse of :func:`atom_to_index` (atoms ordered lexicographically)."""
    out = []
    for _ in range(length):
        out.append(index % alphabet_size)
        index //= alphabet_size
    return tuple(reversed(out))


def atom_to_index(atom, alphabet_size: int) -> int:
    index = 0
    for a in atom:
        index = index * alphabet_size + int(a)
    return index


def all_atoms(alphabet_size: int, length: int) -> list[tuple[int, ...]]:
    return [index_to_atom(i, alphabet_size, length) for i in range(alphabet_size ** length)]
