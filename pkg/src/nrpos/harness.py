"""End-to-end experiment orchestration.

Session lifecycle: the inter-gNB offsets are fixed once per session (gNB
start-up), the UE-gNB offset ``phi`` is redrawn for every trial (UE
restart), and within a trial each gNB transmits alone for
``estimates_per_gnb`` resource-set periods.

Trial ids run through the session: calibration trials first, then
positioning trials. Position ids are 0-based in the same order. Every random
draw comes from a stream keyed by ``(purpose, trial_id, gnb_id)``, so
campaigns can be run separately or together with identical results.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .channel import ChannelProfile, ChannelTap, NoiseSpec, apply_channel, multipath_profile
from .config import ScenarioConfig, validate
from .errors import InsufficientData, PositioningError, UnknownParameter
from .model import Position2D, euclidean_distance, time_of_flight
from .prs import ResourceGrid, build_schedule, map_prs_to_grid
from .seeds import Purpose, child_rng, child_seed
from .tdoa import (
    PositionEstimate,
    RstdRecord,
    estimate_position,
    hyperbola_from_rstd,
    make_rstd_record,
    rmse,
)
from .timing import CalibrationResult, TimingOffsets, ToaRecord, calibrate
from .toa import detect_toa, estimate_cfr, interpolate_cir, quantize_delay, tap_spacing

log = logging.getLogger(__name__)


@dataclass
class TrialToas:
    trial_id: int
    position_id: int
    gnb_id: int
    toas: np.ndarray
    true_tof_s: float

    def records(self) -> list[ToaRecord]:
        return [ToaRecord(self.trial_id, self.position_id, self.gnb_id, float(t), self.true_tof_s) for t in self.toas]


@dataclass(frozen=True)
class ToaStats:
    trial_id: int
    position_id: int
    gnb_id: int
    mean_s: float
    std_s: float
    count: int


@dataclass
class PositionResult:
    position_id: int
    trial_id: int
    truth: Position2D
    estimate: Position2D | None
    error_m: float | None
    status: str  # "true" | "false" | "invalid" | "error"
    rstds: list[RstdRecord] = field(default_factory=list)
    message: str = ""


@dataclass
class TrialReport:
    delta_true_s: tuple[float, ...]
    toa_stats: list[ToaStats] = field(default_factory=list)
    calibration: CalibrationResult | None = None
    positions: list[PositionResult] = field(default_factory=list)
    rmse_m: float | None = None
    trials: list[TrialToas] = field(default_factory=list)
    airtime_per_gnb_s: float = 0.0
    airtime_per_trial_s: float = 0.0

    def toa_records(self) -> list[ToaRecord]:
        return [r for t in self.trials for r in t.records()]

    @property
    def flagged(self) -> list[PositionResult]:
        return [p for p in self.positions if p.status in ("invalid", "error")]


@dataclass(frozen=True)
class StudyRow:
    parameter: str
    value: float
    excess_delay_s: float | None
    snr_db: float | None
    oversample_factor: int
    toa_bias_s: float
    toa_std_s: float
    max_abs_error_s: float
    trials: int


# ------------------------------------------------------------ session state


def session_deltas(config: ScenarioConfig) -> tuple[float, ...]:
    """Inter-gNB offsets for the session: fixed, or drawn once from the seed."""
    off = config.offsets
    if off.delta_s is not None:
        return tuple(off.delta_s)
    rng = child_rng(config.seed, Purpose.DELTA)
    draws = rng.uniform(-off.delta_bound_s, off.delta_bound_s, size=config.deployment.n_gnbs - 1)
    return (0.0, *map(float, draws))


def trial_phi(config: ScenarioConfig, trial_id: int) -> float:
    off = config.offsets
    if off.phi_s is not None:
        return off.phi_s
    return float(child_rng(config.seed, Purpose.PHI, trial_id).uniform(-off.phi_bound_s, off.phi_bound_s))


def airtime(config: ScenarioConfig) -> tuple[float, float]:
    """Simulated airtime per gNB and per trial, in seconds."""
    slot_s = 1e-3 / 2 ** config.deployment.numerology
    per_gnb = config.campaign.estimates_per_gnb * config.prs.resource_set_period * slot_s
    return per_gnb, per_gnb * config.deployment.n_gnbs


def _reference_grid(config: ScenarioConfig, gnb_id: int) -> ResourceGrid:
    return _cached_grid(config.prs, config.deployment, gnb_id)


@lru_cache(maxsize=64)
def _cached_grid(prs, dep, gnb_id: int) -> ResourceGrid:
    sched = build_schedule(prs, dep.n_gnbs, slots_per_frame=10 * 2**dep.numerology)
    return map_prs_to_grid(prs, gnb_id, sched.slots[gnb_id][0], dep)


def _phy_toa(config: ScenarioConfig, ref: ResourceGrid, profile: ChannelProfile, seed: int):
    est = config.estimator
    rx = apply_channel(ref, profile, NoiseSpec(config.channel.snr_db, seed))
    cir = interpolate_cir(estimate_cfr(rx, ref), est.oversample_factor, est.native_sample_rate_hz)
    return detect_toa(cir, est.mode, est.threshold_db)


def simulate_trial(
    config: ScenarioConfig,
    deltas: tuple[float, ...],
    ue: Position2D,
    position_id: int,
    trial_id: int,
) -> list[TrialToas]:
    """All gNBs' TOAs for one trial at one UE position (one ``phi`` draw)."""
    dep = config.deployment
    est = config.estimator
    phi = trial_phi(config, trial_id)
    n_est = config.campaign.estimates_per_gnb
    out = []
    for j in dep.gnb_ids:
        offsets = TimingOffsets(phi, deltas, config.offsets.noise_sigma_s)
        tof = time_of_flight(dep.position(j), ue)
        rng = child_rng(config.seed, Purpose.TOA_NOISE, trial_id, j)
        shift = phi + offsets.delta(j)
        if offsets.noise_sigma_s > 0:
            shift = shift + rng.normal(0.0, offsets.noise_sigma_s, size=n_est)
        else:
            shift = np.full(n_est, shift)
        if est.engine == "ideal":
            toas = tof + shift
        elif est.engine == "quantized":
            toas = quantize_delay(tof + shift, dep.scs_hz, est.oversample_factor, est.native_sample_rate_hz)
        else:
            ref = _reference_grid(config, j)
            base = multipath_profile(dep.position(j), ue, config.channel.echoes_for(j))
            toas = np.array([
                _phy_toa(config, ref, base.shifted(float(s)),
                         child_seed(config.seed, Purpose.AWGN, trial_id, j, e)).toa_s
                for e, s in enumerate(shift)
            ])
        out.append(TrialToas(trial_id, position_id, j, np.asarray(toas, dtype=float), tof))
    return out


def _stats(trials: list[TrialToas]) -> list[ToaStats]:
    return [
        ToaStats(t.trial_id, t.position_id, t.gnb_id, float(t.toas.mean()), float(t.toas.std()), len(t.toas))
        for t in trials
    ]


# ---------------------------------------------------------------- campaigns


def _calibration_trials(config: ScenarioConfig, deltas) -> list[TrialToas]:
    T = config.campaign.trials_per_position
    trials = []
    for i, ue in enumerate(config.campaign.calibration_positions):
        for t in range(T):
            trials.extend(simulate_trial(config, deltas, ue, i, i * T + t))
    return trials


def run_calibration_campaign(config: ScenarioConfig, _report: TrialReport | None = None) -> CalibrationResult:
    """One trial per calibration position (times ``trials_per_position``), then calibrate."""
    if not config.campaign.calibration_positions:
        raise InsufficientData("no calibration positions (K = 0)")
    validate(config)
    deltas = session_deltas(config)
    trials = _calibration_trials(config, deltas)
    records = [r for t in trials for r in t.records()]
    known = dict(enumerate(config.campaign.calibration_positions))
    result = calibrate(records, config.deployment, known)
    log.info("calibration: delta_hat=%s (true %s)", result.delta_hat_s, deltas)
    if _report is not None:
        _report.trials.extend(trials)
        _report.calibration = result
    return result


def check_hyperbolas(config: ScenarioConfig, rstds: list[RstdRecord]) -> list[str]:
    """Validity gate: gNB pairs whose corrected RSTD gives ``a^2 >= d^2``."""
    dep = config.deployment
    bad = []
    for r in rstds:
        try:
            hyperbola_from_rstd(dep.position(1), dep.position(r.gnb_id), r.corrected_rstd_s)
        except PositioningError as exc:
            bad.append(f"gNB {r.gnb_id}: {exc}")
    return bad


def run_positioning_campaign(config: ScenarioConfig, calibration: CalibrationResult,
                             _report: TrialReport | None = None) -> TrialReport:
    """Fresh TOAs at each test position, corrected RSTDs, TDOA fix, RMSE.

    A failing position is recorded with status ``invalid`` or ``error`` and
    left out of the RMSE instead of aborting the campaign.
    """
    validate(config, require_calibration=False)
    dep = config.deployment
    if calibration.n_gnbs != dep.n_gnbs:
        raise InsufficientData(f"calibration covers {calibration.n_gnbs} gNBs, deployment has {dep.n_gnbs}")
    deltas = session_deltas(config)
    report = _report or TrialReport(delta_true_s=deltas)
    report.calibration = report.calibration or calibration
    T = config.campaign.trials_per_position
    K = len(config.campaign.calibration_positions)
    first_trial = K * T
    for i, ue in enumerate(config.campaign.test_positions):
        pid = K + i
        for t in range(T):
            tid = first_trial + i * T + t
            trials = simulate_trial(config, deltas, ue, pid, tid)
            report.trials.extend(trials)
            mean = {tr.gnb_id: float(tr.toas.mean()) for tr in trials}
            rstds = [make_rstd_record(j, mean[j] - mean[1], calibration.delta_hat(j)) for j in list(dep.gnb_ids)[1:]]
            res = PositionResult(pid, tid, ue, None, None, "error", rstds)
            bad = check_hyperbolas(config, rstds)
            if bad:
                res.status = "invalid"
                res.message = "; ".join(bad)
            else:
                try:
                    fix: PositionEstimate = estimate_position(dep, rstds)
                    res.estimate = fix.position
                    res.error_m = euclidean_distance(fix.position, ue)
                    res.status = "true" if fix.converged else "false"
                except PositioningError as exc:
                    res.message = str(exc)
            if res.status in ("invalid", "error"):
                log.warning("position %d trial %d flagged: %s", pid, tid, res.message)
            report.positions.append(res)
    ok = [p for p in report.positions if p.estimate is not None]
    report.rmse_m = rmse([p.estimate for p in ok], [p.truth for p in ok]) if ok else None
    report.toa_stats = _stats(report.trials)
    report.airtime_per_gnb_s, report.airtime_per_trial_s = airtime(config)
    return report


def run_session(config: ScenarioConfig) -> TrialReport:
    """Calibration campaign followed by a positioning campaign in one session."""
    validate(config)
    report = TrialReport(delta_true_s=session_deltas(config))
    cal = run_calibration_campaign(config, _report=report)
    return run_positioning_campaign(config, cal, _report=report)


# ------------------------------------------------------------------ studies


def _study_errors(config: ScenarioConfig, echoes, snr_db, factors) -> dict[int, np.ndarray]:
    """TOA errors vs the LOS delay for a one-gNB link, per oversample factor.

    Trial ``t`` puts the LOS tap ``(t + 0.5) / trials`` of a native tap past
    the native tap nearest the geometric delay. The offsets are symmetric
    about half a tap, so tap quantisation cancels out of the mean bias at
    every oversample factor. AWGN streams depend only on the trial, so sweep
    points share noise.
    """
    st = config.study
    est = config.estimator
    gnb = config.deployment.position(1)
    ue = Position2D(gnb.x + st.distance_m, gnb.y)
    ref = _reference_grid(config, 1)
    native = tap_spacing(est.native_sample_rate_hz, 1)
    errs = {f: np.empty(st.trials) for f in factors}
    for t in range(st.trials):
        los = (round(time_of_flight(gnb, ue) / native) + (t + 0.5) / st.trials) * native
        taps = [ChannelTap(los, 1.0)] + [ChannelTap(los + ex, g) for ex, g in echoes if ex > 0]
        profile = ChannelProfile(tuple(taps))
        rx = apply_channel(ref, profile, NoiseSpec(snr_db, child_seed(config.seed, Purpose.STUDY, t)))
        cfr = estimate_cfr(rx, ref)
        for f in factors:
            cir = interpolate_cir(cfr, f, est.native_sample_rate_hz)
            errs[f][t] = detect_toa(cir, est.mode, est.threshold_db).toa_s - los
    return errs


def _row(parameter, value, excess, snr, factor, e: np.ndarray) -> StudyRow:
    return StudyRow(parameter, float(value), excess, snr, int(factor), float(e.mean()), float(e.std()),
                    float(np.abs(e).max()), len(e))


def run_multipath_study(
    config: ScenarioConfig,
    excess_delay_sweep,
    echo_gain: complex,
    oversample_factors=(1, 16),
) -> list[StudyRow]:
    """Mean TOA bias of a two-tap channel per excess delay and oversample factor."""
    rows = []
    for ex in excess_delay_sweep:
        echoes = [] if echo_gain == 0 else [(float(ex), complex(echo_gain))]
        errs = _study_errors(config, echoes, config.study.snr_db, oversample_factors)
        rows.extend(_row("excess_delay", ex, float(ex), config.study.snr_db, f, errs[f]) for f in oversample_factors)
    return rows


SWEEP_PARAMETERS = ("excess_delay", "snr_db", "oversample_factor")


def sweep_values(parameter: str, start: float, stop: float, n: int) -> np.ndarray:
    """Sweep grid: linear, except oversample factors which are log-spaced integers."""
    if parameter == "oversample_factor":
        return np.unique(np.rint(np.geomspace(start, stop, n)).astype(int))
    return np.linspace(start, stop, n)


def run_sweep(config: ScenarioConfig, parameter: str, values) -> list[StudyRow]:
    st = config.study
    if parameter == "excess_delay":
        return run_multipath_study(config, values, st.echo_gain, st.oversample_factors)
    if parameter == "snr_db":
        f = config.estimator.oversample_factor
        rows = []
        for snr in values:
            e = _study_errors(config, [], float(snr), (f,))[f]
            rows.append(_row("snr_db", snr, None, float(snr), f, e))
        return rows
    if parameter == "oversample_factor":
        factors = tuple(int(v) for v in values)
        errs = _study_errors(config, [], st.snr_db, factors)
        return [_row("oversample_factor", f, None, st.snr_db, f, errs[f]) for f in factors]
    raise UnknownParameter(f"unknown sweep parameter {parameter!r}; choose from {SWEEP_PARAMETERS}")
