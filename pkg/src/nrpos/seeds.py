"""Reproducible RNG streams derived from one scenario seed.

Every stream is ``PCG64(SeedSequence(scenario_seed, spawn_key=keys))`` where
``keys`` is a tuple of non-negative ints, conventionally
``(purpose, trial_id, gnb_id)``. numpy guarantees the PCG64 and SeedSequence
output across platforms, so runs reproduce bit for bit.
"""

from __future__ import annotations

from enum import IntEnum

import numpy as np


class Purpose(IntEnum):
    DELTA = 1
    PHI = 2
    TOA_NOISE = 3
    AWGN = 4
    STUDY = 5
    SOLVER = 6


def child_rng(scenario_seed: int, purpose: Purpose, *keys: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(scenario_seed), spawn_key=(int(purpose), *map(int, keys)))
    return np.random.Generator(np.random.PCG64(ss))


def child_seed(scenario_seed: int, purpose: Purpose, *keys: int) -> int:
    ss = np.random.SeedSequence(int(scenario_seed), spawn_key=(int(purpose), *map(int, keys)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
