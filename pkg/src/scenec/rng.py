"""Deterministic RNG streams.

Every random draw in the pipeline comes from a generator derived from the run
seed plus a purpose path (e.g. seed, "match", object_id). Streams are
independent of iteration order, so parallel and serial runs agree bit for bit.
"""
from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(seed: int, *tokens) -> int:
    h = hashlib.sha256()
    h.update(int(seed).to_bytes(8, "little", signed=False))
    for tok in tokens:
        h.update(b"\x1f")
        h.update(str(tok).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "little")


def derive_rng(seed: int, *tokens) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *tokens))
