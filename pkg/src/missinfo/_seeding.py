"""Deterministic RNG substreams.

Every Monte Carlo consumer derives its own generator from a master seed plus
a tuple of labels (measure name, unit index, delta index, ...).  Two runs
with the same master seed therefore produce bit-identical results no matter
in which order the consumers execute.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _label_key(label) -> int:
    if isinstance(label, (bool, np.bool_)):
        return int(label)
    if isinstance(label, (int, np.integer)):
        return int(label) & 0xFFFFFFFF
    digest = hashlib.blake2b(str(label).encode("utf-8"), digest_size=4).digest()
    return int.from_bytes(digest, "big")


def derive_rng(seed: int, *labels) -> np.random.Generator:
    """Generator for the substream identified by ``labels`` under ``seed``."""
    key = tuple(_label_key(lab) for lab in labels)
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=key))
