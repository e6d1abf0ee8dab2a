"""Deterministic seed derivation shared by generation and fixtures.

Every random draw in the engine flows from a named blake2b-derived stream, so
any sample can be regenerated in isolation from (global_seed, scene_id, index)
alone, independent of worker count or generation order.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stable_hash(*parts) -> int:
    """63-bit hash of the '|'-joined string forms of the parts."""
    text = "|".join(str(p) for p in parts)
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") & 0x7FFF_FFFF_FFFF_FFFF


def derive_rng(*parts) -> np.random.Generator:
    """Generator seeded from a named substream."""
    return np.random.default_rng(stable_hash(*parts))
