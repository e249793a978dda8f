"""Deterministic seed derivation.

Every random draw in the package flows from a single root seed expanded by
labeled hashing, so independent stages (and parallel workers) get stable,
order-independent substreams.
"""

import hashlib

import numpy as np


def stable_seed(root: int, label: str, *indices: int) -> int:
    """Derive a 64-bit child seed from ``root`` and a label path.

    blake2b keyed by nothing, over a canonical byte encoding; stable across
    platforms and Python versions.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(int(root).to_bytes(8, "little", signed=False))
    h.update(label.encode("utf-8"))
    for idx in indices:
        h.update(b"\x1f")
        h.update(int(idx).to_bytes(8, "little", signed=True))
    return int.from_bytes(h.digest(), "little")


def rng_for(root: int, label: str, *indices: int) -> np.random.Generator:
    """Seeded generator for the substream named by (label, indices)."""
    return np.random.default_rng(stable_seed(root, label, *indices))
