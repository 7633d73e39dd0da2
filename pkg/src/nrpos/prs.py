"""Downlink PRS: Gold-sequence generation, comb mapping and slot scheduling.

Sequence initialisation and the comb stagger follow TS 38.211 7.4.1.7.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ConfigConflict, ConfigError, SlotNotScheduled
from .model import GnbDeployment

SYMBOLS_PER_SLOT = 14
SUBCARRIERS_PER_PRB = 12
GOLD_NC = 1600

# Relative frequency offset k' per PRS symbol (l - l_start), keyed by comb
# size then by number of symbols. Combinations missing here are rejected.
COMB_STAGGER: dict[int, dict[int, tuple[int, ...]]] = {
    2: {
        2: (0, 1),
        4: (0, 1, 0, 1),
        6: (0, 1, 0, 1, 0, 1),
        12: (0, 1) * 6,
    },
    4: {
        4: (0, 2, 1, 3),
        12: (0, 2, 1, 3) * 3,
    },
    6: {
        6: (0, 3, 1, 4, 2, 5),
        12: (0, 3, 1, 4, 2, 5) * 2,
    },
    12: {
        12: (0, 6, 3, 9, 1, 7, 4, 10, 2, 8, 5, 11),
    },
}


@dataclass(frozen=True)
class PrsConfig:
    resource_set_period: int = 20
    resource_set_offset: int = 2
    resource_offset_per_gnb: tuple[int, ...] = (1, 2, 3)
    resource_repetition: int = 1
    resource_time_gap: int = 1
    symbol_start: int = 1
    num_symbols: int = 4
    rb_offset: int = 0
    num_rbs: int = 106
    comb_size: int = 2
    comb_offset_per_gnb: tuple[int, ...] = (0, 0, 0)
    sequence_id_per_gnb: tuple[int, ...] = (0, 1, 2)

    def __post_init__(self):
        for name in ("resource_offset_per_gnb", "comb_offset_per_gnb", "sequence_id_per_gnb"):
            object.__setattr__(self, name, tuple(int(v) for v in getattr(self, name)))

    @property
    def n_gnbs(self) -> int:
        return len(self.resource_offset_per_gnb)

    @property
    def stagger(self) -> tuple[int, ...]:
        return COMB_STAGGER[self.comb_size][self.num_symbols]

    @property
    def res_per_symbol(self) -> int:
        return SUBCARRIERS_PER_PRB * self.num_rbs // self.comb_size

    def validate(self, n_prb: int | None = None) -> None:
        """Raise :class:`ConfigError` (or :class:`ConfigConflict`) on bad settings."""
        if self.resource_set_period <= 0:
            raise ConfigError("resource_set_period must be positive")
        if self.resource_repetition < 1:
            raise ConfigError("resource_repetition must be >= 1")
        if self.resource_repetition > 1 and self.resource_time_gap < 1:
            raise ConfigError("resource_time_gap must be >= 1 when repeating")
        if not 0 <= self.symbol_start < SYMBOLS_PER_SLOT:
            raise ConfigError("symbol_start must be in 0..13")
        if self.num_symbols < 1 or self.symbol_start + self.num_symbols > SYMBOLS_PER_SLOT:
            raise ConfigError("symbol_start + num_symbols must not exceed 14")
        if self.comb_size not in COMB_STAGGER:
            raise ConfigError(f"comb_size must be one of {sorted(COMB_STAGGER)}")
        if self.num_symbols not in COMB_STAGGER[self.comb_size]:
            raise ConfigError(
                f"no stagger pattern for comb {self.comb_size} with {self.num_symbols} symbols; "
                f"allowed symbol counts: {sorted(COMB_STAGGER[self.comb_size])}"
            )
        if self.num_rbs < 1 or self.rb_offset < 0:
            raise ConfigError("num_rbs must be >= 1 and rb_offset >= 0")
        if n_prb is not None and self.rb_offset + self.num_rbs > n_prb:
            raise ConfigError(f"rb_offset + num_rbs exceeds the {n_prb}-PRB carrier")
        n = self.n_gnbs
        if len(self.comb_offset_per_gnb) != n or len(self.sequence_id_per_gnb) != n:
            raise ConfigError("per-gNB lists must all have the same length")
        for j, off in enumerate(self.comb_offset_per_gnb, start=1):
            if not 0 <= off < self.comb_size:
                raise ConfigError(f"gNB {j}: comb offset {off} not below comb size {self.comb_size}")
        for j, sid in enumerate(self.sequence_id_per_gnb, start=1):
            if not 0 <= sid < 4096:
                raise ConfigError(f"gNB {j}: sequence id {sid} outside 0..4095")
        # raises ConfigConflict on slot collisions
        build_schedule(self, n)


@dataclass(frozen=True)
class PrsSchedule:
    """Slot indices (within one resource-set period) per gNB id."""

    slots: dict[int, tuple[int, ...]]
    resource_set_period: int
    slots_per_frame: int = 20

    def frame_slots(self, gnb_id: int) -> list[tuple[int, int]]:
        return [divmod(s, self.slots_per_frame) for s in self.slots[gnb_id]]

    def owner(self, slot: int) -> int | None:
        s = slot % self.resource_set_period
        for j, ss in self.slots.items():
            if s in ss:
                return j
        return None


def build_schedule(config: PrsConfig, n_gnbs: int, slots_per_frame: int = 20) -> PrsSchedule:
    """Assign each gNB its PRS slots inside one resource-set period.

    Slot of repetition r for gNB j is
    ``(set_offset + offset[j] + r * time_gap) mod period``.
    """
    if n_gnbs != config.n_gnbs:
        raise ConfigError(f"config lists {config.n_gnbs} resource offsets for {n_gnbs} gNBs")
    period = config.resource_set_period
    slots: dict[int, tuple[int, ...]] = {}
    owner: dict[int, int] = {}
    for j, off in enumerate(config.resource_offset_per_gnb, start=1):
        mine = []
        for r in range(config.resource_repetition):
            s = (config.resource_set_offset + off + r * config.resource_time_gap) % period
            if s in owner:
                other = owner[s]
                if other == j:
                    raise ConfigConflict(f"gNB {j}: repetitions wrap onto slot {s}")
                raise ConfigConflict(f"gNB {other} and gNB {j} both map to slot {s}")
            owner[s] = j
            mine.append(s)
        slots[j] = tuple(mine)
    return PrsSchedule(slots=slots, resource_set_period=period, slots_per_frame=slots_per_frame)


def prs_c_init(sequence_id: int, slot: int, symbol: int) -> int:
    """Gold-sequence seed for one PRS symbol (slot number within the frame)."""
    hi, lo = divmod(sequence_id, 1024)
    c = (1 << 22) * hi + (1 << 10) * (SYMBOLS_PER_SLOT * slot + symbol + 1) * (2 * lo + 1) + lo
    return c % (1 << 31)


@lru_cache(maxsize=512)
def _gold_bits(c_init: int, length: int) -> bytes:
    total = length + GOLD_NC
    x1 = bytearray(total + 31)
    x2 = bytearray(total + 31)
    x1[0] = 1
    for i in range(31):
        x2[i] = (c_init >> i) & 1
    for n in range(total):
        x1[n + 31] = x1[n + 3] ^ x1[n]
        x2[n + 31] = x2[n + 3] ^ x2[n + 2] ^ x2[n + 1] ^ x2[n]
    return bytes(a ^ b for a, b in zip(x1[GOLD_NC:total], x2[GOLD_NC:total]))


def gold_sequence(c_init: int, length: int) -> np.ndarray:
    """Length-31 Gold sequence c(n), n = 0..length-1, as uint8 bits."""
    return np.frombuffer(_gold_bits(int(c_init), int(length)), dtype=np.uint8).copy()


def generate_prs_sequence(sequence_id: int, slot: int, symbol: int, length: int) -> np.ndarray:
    if length <= 0:
        raise ValueError("length must be positive")
    c = gold_sequence(prs_c_init(sequence_id, slot, symbol), 2 * length).astype(float)
    return ((1 - 2 * c[0::2]) + 1j * (1 - 2 * c[1::2])) / np.sqrt(2)


@dataclass
class ResourceGrid:
    """One slot of REs, shape ``(14, 12 * n_prb)``; unused REs are exactly 0."""

    data: np.ndarray
    scs_hz: float
    slot: int
    prs_symbols: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if self.data.ndim != 2 or min(self.data.shape) == 0:
            raise ValueError("grid must be a non-empty 2-D array")

    @property
    def n_subcarriers(self) -> int:
        return self.data.shape[1]

    def subcarrier_freqs(self) -> np.ndarray:
        """Baseband frequency of every subcarrier, band centred on DC."""
        k = np.arange(self.n_subcarriers) - self.n_subcarriers // 2
        return k * self.scs_hz

    @property
    def occupied(self) -> np.ndarray:
        return self.data != 0

    def copy(self) -> "ResourceGrid":
        return ResourceGrid(self.data.copy(), self.scs_hz, self.slot, self.prs_symbols)


def comb_subcarriers(config: PrsConfig, gnb_id: int, symbol_rel: int) -> np.ndarray:
    """Subcarrier indices used by gNB ``gnb_id`` on PRS symbol ``symbol_rel``."""
    k_comb = config.comb_size
    offset = (config.comb_offset_per_gnb[gnb_id - 1] + config.stagger[symbol_rel]) % k_comb
    start = SUBCARRIERS_PER_PRB * config.rb_offset
    return start + offset + k_comb * np.arange(config.res_per_symbol)


def map_prs_to_grid(
    config: PrsConfig,
    gnb_id: int,
    slot: int,
    deployment: GnbDeployment,
) -> ResourceGrid:
    """Place gNB ``gnb_id``'s PRS on the resource grid of ``slot``.

    ``slot`` counts from the start of a resource-set period; it is reduced
    modulo the period before the schedule lookup.
    """
    spf = 10 * 2**deployment.numerology
    schedule = build_schedule(config, deployment.n_gnbs, slots_per_frame=spf)
    if slot % config.resource_set_period not in schedule.slots[gnb_id]:
        raise SlotNotScheduled(f"slot {slot} is not scheduled for gNB {gnb_id}")
    n_sc = SUBCARRIERS_PER_PRB * deployment.n_prb
    data = np.zeros((SYMBOLS_PER_SLOT, n_sc), dtype=complex)
    slot_in_frame = slot % spf
    seq_id = config.sequence_id_per_gnb[gnb_id - 1]
    # sequence index m runs over the whole carrier as in TS 38.211
    m_first = SUBCARRIERS_PER_PRB * config.rb_offset // config.comb_size
    symbols = []
    for rel in range(config.num_symbols):
        l = config.symbol_start + rel
        seq = generate_prs_sequence(seq_id, slot_in_frame, l, m_first + config.res_per_symbol)
        data[l, comb_subcarriers(config, gnb_id, rel)] = seq[m_first:]
        symbols.append(l)
    return ResourceGrid(data, deployment.scs_hz, slot, tuple(symbols))
