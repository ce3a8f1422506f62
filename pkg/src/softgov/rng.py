"""Named, counter-keyed random streams.

Every (seed, purpose, epoch, step) tuple gets its own Philox generator,
derived through ``SeedSequence`` so the mapping is stable across platforms.
No stream's output depends on how many draws another stream consumed, which
keeps logs identical when control flow inside a step changes.
"""

from __future__ import annotations

import zlib

import numpy as np

PURPOSES = ("initiator", "counterparty", "observables", "acceptance", "audit")


def _purpose_code(purpose: str) -> int:
    if purpose not in PURPOSES:
        raise KeyError(f"unknown stream purpose {purpose!r}")
    return zlib.crc32(purpose.encode("ascii"))


def stream(seed: int, purpose: str, epoch: int, step: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed % 2**64,
                                spawn_key=(_purpose_code(purpose), epoch, step))
    return np.random.Generator(np.random.Philox(ss))


class StepStreams:
    """Lazily created streams for one (epoch, step)."""

    def __init__(self, seed: int, epoch: int, step: int):
        self.seed, self.epoch, self.step = seed, epoch, step
        self._cache: dict[str, np.random.Generator] = {}

    def __getitem__(self, purpose: str) -> np.random.Generator:
        gen = self._cache.get(purpose)
        if gen is None:
            gen = self._cache[purpose] = stream(self.seed, purpose, self.epoch, self.step)
        return gen
