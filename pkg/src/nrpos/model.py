"""Planar geometry, gNB deployments and exact time of flight."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError

SPEED_OF_LIGHT = 299_792_458.0  # m/s, exact by definition


@dataclass(frozen=True)
class PhysConstants:
    c: float = SPEED_OF_LIGHT


@dataclass(frozen=True)
class Position2D:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"position must be finite, got ({self.x}, {self.y})")
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))

    @classmethod
    def from_seq(cls, xy: Sequence[float]) -> "Position2D":
        x, y = xy
        return cls(float(x), float(y))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class GnbDeployment:
    """Ordered gNB positions; ``positions[0]`` is the reference gNB (id 1).

    gNB ids are 1-based everywhere in the public API, so gNB ``j`` lives at
    ``positions[j - 1]``.
    """

    positions: tuple[Position2D, ...]
    carrier_hz: float = 3.6e9
    scs_hz: float = 30e3
    n_prb: int = 106

    def __post_init__(self):
        pos = tuple(p if isinstance(p, Position2D) else Position2D.from_seq(p) for p in self.positions)
        object.__setattr__(self, "positions", pos)
        if len(pos) < 3:
            raise ConfigError(f"need at least 3 gNBs, got {len(pos)}")
        for i in range(len(pos)):
            for j in range(i + 1, len(pos)):
                if pos[i] == pos[j]:
                    raise ConfigError(f"gNB {i + 1} and gNB {j + 1} are co-located")
        if not self.scs_hz > 0:
            raise ConfigError("scs_hz must be positive")
        if int(self.n_prb) != self.n_prb or self.n_prb <= 0:
            raise ConfigError("n_prb must be a positive integer")

    @property
    def n_gnbs(self) -> int:
        return len(self.positions)

    @property
    def gnb_ids(self) -> range:
        return range(1, len(self.positions) + 1)

    def position(self, gnb_id: int) -> Position2D:
        if gnb_id not in self.gnb_ids:
            raise ConfigError(f"unknown gNB id {gnb_id}")
        return self.positions[gnb_id - 1]

    @property
    def bandwidth_hz(self) -> float:
        return 12 * self.n_prb * self.scs_hz

    @property
    def numerology(self) -> int:
        mu = math.log2(self.scs_hz / 15e3)
        if mu != int(mu) or mu < 0:
            raise ConfigError(f"scs {self.scs_hz} Hz is not 15 kHz * 2^mu")
        return int(mu)

    def as_array(self) -> np.ndarray:
        return np.array([[p.x, p.y] for p in self.positions])


def euclidean_distance(a: Position2D, b: Position2D) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


def time_of_flight(gnb: Position2D, ue: Position2D) -> float:
    """Line-of-sight propagation time in seconds."""
    return euclidean_distance(gnb, ue) / SPEED_OF_LIGHT
