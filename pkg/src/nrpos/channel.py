"""Tapped-delay multipath channels applied in the frequency domain."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DuplicateDelay
from .model import Position2D, time_of_flight
from .prs import ResourceGrid


@dataclass(frozen=True)
class ChannelTap:
    delay: float
    gain: complex = 1.0 + 0.0j

    def __post_init__(self):
        if not (math.isfinite(self.delay) and self.delay >= 0):
            raise ValueError(f"tap delay must be finite and >= 0, got {self.delay}")
        g = complex(self.gain)
        if not (math.isfinite(g.real) and math.isfinite(g.imag)):
            raise ValueError("tap gain must be finite")
        object.__setattr__(self, "gain", g)


@dataclass(frozen=True)
class ChannelProfile:
    """Taps sorted by delay; ``taps[0]`` is the first arriving path."""

    taps: tuple[ChannelTap, ...]

    def __post_init__(self):
        taps = tuple(sorted(self.taps, key=lambda t: t.delay))
        if not taps:
            raise ValueError("a channel profile needs at least one tap")
        for a, b in zip(taps, taps[1:]):
            if a.delay == b.delay:
                raise DuplicateDelay(f"two taps at delay {a.delay!r} s")
        object.__setattr__(self, "taps", taps)

    @property
    def delays(self) -> np.ndarray:
        return np.array([t.delay for t in self.taps])

    @property
    def gains(self) -> np.ndarray:
        return np.array([t.gain for t in self.taps], dtype=complex)

    @property
    def first_arrival(self) -> float:
        return self.taps[0].delay

    def shifted(self, dt: float) -> "ChannelProfile":
        """Same profile with every delay moved by ``dt`` (clock offsets, jitter)."""
        return ChannelProfile(tuple(ChannelTap(t.delay + dt, t.gain) for t in self.taps))


@dataclass(frozen=True)
class NoiseSpec:
    """Per-RE SNR relative to unit-power PRS REs; ``snr_db=None`` or ``inf`` disables noise."""

    snr_db: float | None = None
    rng_seed: int = 0

    @property
    def enabled(self) -> bool:
        return self.snr_db is not None and math.isfinite(self.snr_db)

    @property
    def noise_variance(self) -> float:
        return 10 ** (-self.snr_db / 10) if self.enabled else 0.0


def los_profile(gnb: Position2D, ue: Position2D) -> ChannelProfile:
    return ChannelProfile((ChannelTap(time_of_flight(gnb, ue), 1.0),))


def multipath_profile(
    gnb: Position2D,
    ue: Position2D,
    echoes: Iterable[tuple[float, complex]] = (),
) -> ChannelProfile:
    """LOS tap plus one tap per ``(excess_delay, gain)`` echo."""
    tof = time_of_flight(gnb, ue)
    taps = [ChannelTap(tof, 1.0)]
    for excess, gain in echoes:
        if not excess > 0:
            raise ValueError(f"echo excess delay must be > 0, got {excess}")
        taps.append(ChannelTap(tof + excess, gain))
    return ChannelProfile(tuple(taps))


def frequency_response(profile: ChannelProfile, subcarrier_freqs: Sequence[float]) -> np.ndarray:
    f = np.asarray(subcarrier_freqs, dtype=float)
    g = profile.gains
    live = g != 0  # zero-gain taps drop out exactly, not just to rounding
    phase = np.exp(-2j * np.pi * np.outer(f, profile.delays[live]))
    return phase @ g[live]


def apply_channel(
    grid: ResourceGrid,
    profile: ChannelProfile,
    noise: NoiseSpec = NoiseSpec(),
) -> ResourceGrid:
    """Multiply every RE by H(f) of its subcarrier, then add complex AWGN.

    Noise goes on every RE of the grid, occupied or not, drawn from
    ``default_rng(noise.rng_seed)``.
    """
    h = frequency_response(profile, grid.subcarrier_freqs())
    out = grid.data * h[np.newaxis, :]
    if noise.enabled:
        rng = np.random.default_rng(noise.rng_seed)
        scale = math.sqrt(noise.noise_variance / 2)
        out = out + scale * (rng.standard_normal(out.shape) + 1j * rng.standard_normal(out.shape))
    return ResourceGrid(out, grid.scs_hz, grid.slot, grid.prs_symbols)


def rms_delay_spread(profile: ChannelProfile) -> float:
    p = np.abs(profile.gains) ** 2
    if p.sum() == 0:
        return 0.0
    tau = profile.delays
    mean = np.sum(p * tau) / p.sum()
    return float(np.sqrt(np.sum(p * (tau - mean) ** 2) / p.sum()))
