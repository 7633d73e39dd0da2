"""TOA measurement model with clock offsets, and inter-gNB offset calibration.

A TOA from gNB ``j`` at UE position ``i`` is modelled as::

    tau[i, j] = tof[i, j] + phi + delta[j] + n[i, j]

``phi`` is the UE-gNB offset (one value per UE session), ``delta[j]`` the
offset of gNB ``j`` against the reference gNB 1 (``delta[1] == 0``), and
``n`` zero-mean Gaussian noise independent across gNBs.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, InsufficientData, MissingReference
from .model import SPEED_OF_LIGHT, GnbDeployment, Position2D, euclidean_distance


@dataclass(frozen=True)
class TimingOffsets:
    phi_s: float
    delta_s: tuple[float, ...]
    noise_sigma_s: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "delta_s", tuple(float(d) for d in self.delta_s))
        if not self.delta_s or self.delta_s[0] != 0.0:
            raise ConfigError("delta_s[gNB 1] must be exactly 0")
        vals = (self.phi_s, self.noise_sigma_s, *self.delta_s)
        if not all(math.isfinite(v) for v in vals):
            raise ConfigError("timing offsets must be finite")
        if self.noise_sigma_s < 0:
            raise ConfigError("noise_sigma_s must be >= 0")

    def delta(self, gnb_id: int) -> float:
        return self.delta_s[gnb_id - 1]


@dataclass(frozen=True)
class ToaRecord:
    trial_id: int
    ue_position_id: int
    gnb_id: int
    toa_s: float
    true_tof_s: float | None = None


@dataclass(frozen=True)
class CalibrationResult:
    delta_hat_s: tuple[float, ...]
    sample_count: tuple[int, ...]
    residual_std_s: tuple[float, ...]

    @classmethod
    def zero(cls, n_gnbs: int) -> "CalibrationResult":
        """No correction at all; the uncalibrated control."""
        return cls((0.0,) * n_gnbs, (0,) * n_gnbs, (0.0,) * n_gnbs)

    def delta_hat(self, gnb_id: int) -> float:
        return self.delta_hat_s[gnb_id - 1]

    @property
    def n_gnbs(self) -> int:
        return len(self.delta_hat_s)


def simulate_toa(
    true_tof_s: float,
    offsets: TimingOffsets,
    gnb_id: int,
    rng: np.random.Generator | None = None,
    size: int | None = None,
):
    """Draw TOA(s) for one gNB; ``rng`` must be that gNB's own stream."""
    base = true_tof_s + offsets.phi_s + offsets.delta(gnb_id)
    if offsets.noise_sigma_s == 0 or rng is None:
        return base if size is None else np.full(size, base)
    return base + rng.normal(0.0, offsets.noise_sigma_s, size=size)


def measured_rstd(toa_j: float, toa_ref: float) -> float:
    return toa_j - toa_ref


def true_rstd(gnb_j: Position2D, gnb_ref: Position2D, ue: Position2D) -> float:
    return (euclidean_distance(gnb_j, ue) - euclidean_distance(gnb_ref, ue)) / SPEED_OF_LIGHT


def trial_rstds(records: Iterable[ToaRecord]) -> dict[tuple[int, int], dict[int, float]]:
    """Mean-TOA RSTD per ``(ue_position_id, trial_id)`` and non-reference gNB.

    Within a trial every gNB shares one ``phi``, so the difference of mean
    TOAs cancels it even though gNBs transmit one after another.
    """
    sums: dict[tuple[int, int, int], list[float]] = defaultdict(lambda: [0.0, 0])
    for r in records:
        acc = sums[(r.ue_position_id, r.trial_id, r.gnb_id)]
        acc[0] += r.toa_s
        acc[1] += 1
    means = {k: s / n for k, (s, n) in sums.items()}
    out: dict[tuple[int, int], dict[int, float]] = defaultdict(dict)
    for (pos, trial, gnb), m in means.items():
        if gnb == 1:
            continue
        ref = means.get((pos, trial, 1))
        if ref is None:
            raise MissingReference(f"position {pos}, trial {trial}: no reference-gNB TOAs")
        out[(pos, trial)][gnb] = measured_rstd(m, ref)
    for (pos, trial, gnb) in means:
        if gnb == 1 and (pos, trial) not in out:
            out[(pos, trial)] = {}
    return dict(out)


def calibrate(
    records: Sequence[ToaRecord],
    deployment: GnbDeployment,
    known_positions: Sequence[Position2D] | dict[int, Position2D],
) -> CalibrationResult:
    """Estimate inter-gNB offsets from TOAs taken at known UE positions.

    RSTDs are averaged per position first (over trials), then
    ``delta_hat[j]`` is the equal-weight mean over the K positions of
    measured minus true RSTD. ``known_positions`` is indexed by
    ``ue_position_id``.
    """
    if not isinstance(known_positions, dict):
        known_positions = dict(enumerate(known_positions))
    per_trial = trial_rstds(records)

    per_pos: dict[int, dict[int, list[float]]] = defaultdict(lambda: defaultdict(list))
    for (pos, _trial), by_gnb in per_trial.items():
        if pos not in known_positions:
            raise ConfigError(f"ue_position_id {pos} has no known position")
        for gnb, rstd in by_gnb.items():
            per_pos[pos][gnb].append(rstd)

    ref = deployment.position(1)
    delta_hat = [0.0]
    counts = [len(per_pos)]
    resid_std = [0.0]
    for gnb in list(deployment.gnb_ids)[1:]:
        g = deployment.position(gnb)
        errs = []
        for pos in sorted(per_pos):
            vals = per_pos[pos].get(gnb)
            if not vals:
                continue
            errs.append(np.mean(vals) - true_rstd(g, ref, known_positions[pos]))
        if not errs:
            raise InsufficientData(f"no calibration positions with TOAs from gNB {gnb}")
        errs = np.asarray(errs)
        delta_hat.append(float(errs.mean()))
        counts.append(len(errs))
        resid_std.append(float(errs.std()))
    return CalibrationResult(tuple(delta_hat), tuple(counts), tuple(resid_std))
