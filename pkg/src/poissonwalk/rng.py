"""Deterministic random streams.

Every sample path gets its own Philox stream keyed by ``(master seed, path
index)``, so ensembles give the same numbers regardless of how paths are
chunked or scheduled across threads.
"""
from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def _key(seed: int) -> int:
    if seed < 0:
        raise ValueError("seed must be non-negative")
    return int(seed) & _MASK64


def path_rng(seed: int, index: int) -> np.random.Generator:
    """Random generator for path ``index`` of the ensemble with master ``seed``."""
    ss = np.random.SeedSequence([_key(seed), int(index)])
    return np.random.Generator(np.random.Philox(ss))


def stream_rng(seed: int, tag: str, index: int = 0) -> np.random.Generator:
    """Generator for a named auxiliary stream (batched i.i.d. samples, pilots)."""
    words = [_key(seed), *tag.encode("utf-8"), 0xFFFF, int(index)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(words)))


def derive_seed(seed: int, tag: str) -> int:
    """A new 63-bit master seed, disjoint in practice from ``seed`` itself."""
    words = [_key(seed), *tag.encode("utf-8")]
    state = np.random.SeedSequence(words).generate_state(1, dtype=np.uint64)
    return int(state[0]) >> 1
