"""Deterministic child-seed derivation.

All randomness in a run flows from one integer master seed.  Child
generators are derived with ``numpy.random.SeedSequence`` spawn keys, so
independent parts of a simulation (schedule entries, frames, projector
settings) can be sampled in any order, or in parallel, and still
reproduce bit-identical streams.

String key components are mapped to integers with CRC-32, which keeps
the derivation stable across processes and platforms.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key_component(part: int | str) -> int:
    if isinstance(part, int):
        if part < 0:
            raise ValueError(f"seed key components must be non-negative, got {part}")
        return part
    return zlib.crc32(part.encode("utf-8"))


def child_sequence(master_seed: int, *key: int | str) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=tuple(_key_component(k) for k in key))


def spawn_rng(master_seed: int, *key: int | str) -> np.random.Generator:
    """Generator for the sub-stream identified by ``key`` under ``master_seed``."""
    return np.random.default_rng(child_sequence(master_seed, *key))
