"""Seeded random substreams.

Every random decision point (a noisy gate, a measurement, a readout) gets its
own generator keyed by ``(seed, *keys)``; shot ``i`` always consumes element
``i`` of that stream, so results do not depend on batch size or execution
order.
"""
from __future__ import annotations

import zlib
from typing import Sequence, Union

import numpy as np

Seed = Union[int, Sequence[int]]


def _key(k) -> int:
    if isinstance(k, (int, np.integer)):
        return int(k)
    return zlib.crc32(str(k).encode())


def entropy(seed: Seed) -> list[int]:
    if isinstance(seed, (int, np.integer)):
        return [int(seed)]
    return [int(s) for s in seed]


def derive(seed: Seed, *keys) -> tuple[int, ...]:
    """Child seed for an independent sub-experiment (repetition, setting...)."""
    return tuple(entropy(seed)) + tuple(_key(k) for k in keys)


def stream(seed: Seed, *keys) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy(seed), spawn_key=tuple(_key(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))
