"""Deterministic randomness plumbing.

Every stochastic stage draws from a RandomnessContext derived from the run's
global seed plus a (label, index) pair, so the train-time and inference-time
quantizer draws are distinct streams of one seeded experiment and any sample
can be re-derived from its manifest record. No operation reads ambient
entropy. Determinism is promised within one toolkit version: the underlying
bit generator is numpy's PCG64.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RandomnessContext:
    """Addressable random stream: (global_seed, stream_id) fully determine
    the draw sequence produced by generator()."""

    global_seed: int
    stream_id: int

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream.

        Each call returns an identical, independent generator, which keeps
        operations taking a context pure: same context, same draws.
        """
        seq = np.random.SeedSequence(
            [self.global_seed & _MASK64, self.stream_id & _MASK64]
        )
        return np.random.Generator(np.random.PCG64(seq))


def derive_stream(global_seed: int, label: str, index: int) -> RandomnessContext:
    """Derive the stream for one (stage label, sample index) pair.

    Distinct (label, index) pairs map to distinct stream ids with
    overwhelming probability (64-bit BLAKE2 of the canonical encoding).
    """
    h = hashlib.blake2b(f"{label}\x1f{index}".encode("utf-8"), digest_size=8)
    stream_id = int.from_bytes(h.digest(), "big")
    return RandomnessContext(global_seed=global_seed & _MASK64, stream_id=stream_id)
