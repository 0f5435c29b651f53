"""Deterministic per-purpose random streams.

Every random draw in the library flows from one root seed. A stream for a
given purpose is a Philox (counter-based, splittable) generator keyed by
sha256(root_seed, label), so adding a new consumer never perturbs the draws
of an existing one.
"""
from __future__ import annotations

import hashlib

import numpy as np


def derive_key(root_seed: int, label: str) -> int:
    """128-bit Philox key for (root_seed, label)."""
    digest = hashlib.sha256(f"{root_seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:16], "little")


def stream(root_seed: int, label: str) -> np.random.Generator:
    """Independent generator for one named purpose."""
    return np.random.Generator(np.random.Philox(key=derive_key(root_seed, label)))


RNG_DESCRIPTOR = "philox4x64 keyed by sha256(seed:label)"
