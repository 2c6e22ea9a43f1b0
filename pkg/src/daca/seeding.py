"""Named deterministic random substreams.

A substream is keyed by a base seed plus any sequence of string/int keys
(e.g. image id and cell index), so results never depend on the order in
which substreams are consumed.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _key_entropy(key) -> int:
    if isinstance(key, (int, np.integer)) and not isinstance(key, bool) and key >= 0:
        return int(key)
    digest = hashlib.sha256(repr(key).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def substream(base_seed: int, *keys) -> np.random.Generator:
    entropy = [int(base_seed) & _MASK64] + [_key_entropy(k) for k in keys]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def trace(base_seed: int, *keys) -> str:
    """Human-readable identifier of a substream, recorded in reports."""
    return "/".join([str(int(base_seed) & _MASK64), *(str(k) for k in keys)])
