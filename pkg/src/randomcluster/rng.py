"""Seeding: counter-based bit generators with hash-derived child streams.

A master seed plus a spawn key (replica index, grid cell, ...) determines
each stream; replicas never share state, and merging their results in
index order keeps every experiment reproducible bit for bit.
"""

from __future__ import annotations

import numpy as np


def child_generator(master_seed: int, *spawn_key: int) -> np.random.Generator:
    """Philox generator for the child stream hash(master_seed, spawn_key)."""
    ss = np.random.SeedSequence(entropy=int(master_seed),
                                spawn_key=tuple(int(k) for k in spawn_key))
    return np.random.Generator(np.random.Philox(ss))
