"""Scenario configuration: YAML ingestion and cross-module validation.

All quantities are SI (seconds, metres, hertz). Complex gains are written
as ``[re, im]`` pairs. See ``data/default.yaml`` for the full layout.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigError, ParseError
from .model import SPEED_OF_LIGHT, GnbDeployment, Position2D, euclidean_distance, time_of_flight
from .prs import PrsConfig
from .timing import true_rstd
from .toa import NATIVE_SAMPLE_RATE_HZ, unambiguous_range

ENGINES = ("phy", "quantized", "ideal")
NOISE_MARGIN_SIGMAS = 6.0


@dataclass(frozen=True)
class OffsetSpec:
    """Fixed offsets, or uniform draw bounds when the fixed value is ``None``."""

    delta_s: tuple[float, ...] | None = None
    delta_bound_s: float = 50e-9
    phi_s: float | None = None
    phi_bound_s: float = 50e-9
    noise_sigma_s: float = 0.65e-9

    def delta_range(self, gnb_id: int) -> tuple[float, float]:
        if gnb_id == 1:
            return 0.0, 0.0
        if self.delta_s is not None:
            return self.delta_s[gnb_id - 1], self.delta_s[gnb_id - 1]
        return -self.delta_bound_s, self.delta_bound_s

    def phi_range(self) -> tuple[float, float]:
        if self.phi_s is not None:
            return self.phi_s, self.phi_s
        return -self.phi_bound_s, self.phi_bound_s


@dataclass(frozen=True)
class ChannelSpec:
    snr_db: float | None = None
    echoes: dict[int, tuple[tuple[float, complex], ...]] = field(default_factory=dict)

    def echoes_for(self, gnb_id: int) -> tuple[tuple[float, complex], ...]:
        return self.echoes.get(gnb_id, ())


@dataclass(frozen=True)
class EstimatorSpec:
    engine: str = "quantized"
    oversample_factor: int = 16
    mode: str = "max_peak"
    threshold_db: float = 10.0
    native_sample_rate_hz: float = NATIVE_SAMPLE_RATE_HZ


@dataclass(frozen=True)
class CampaignSpec:
    calibration_positions: tuple[Position2D, ...] = ()
    test_positions: tuple[Position2D, ...] = ()
    trials_per_position: int = 1
    estimates_per_gnb: int = 500


@dataclass(frozen=True)
class StudySpec:
    """One gNB / one UE link used by the multipath and sweep studies."""

    distance_m: float = 30.0
    trials: int = 256
    echo_gain: complex = 0.9 + 0j
    excess_delays_s: tuple[float, ...] = ()
    oversample_factors: tuple[int, ...] = (1, 16)
    snr_db: float | None = None


@dataclass(frozen=True)
class OutputSpec:
    histogram_bin_s: float = 0.1e-9
    hyperbola_t_max: float = 2.0
    hyperbola_points: int = 101


@dataclass(frozen=True)
class ScenarioConfig:
    deployment: GnbDeployment
    prs: PrsConfig = PrsConfig()
    offsets: OffsetSpec = OffsetSpec()
    channel: ChannelSpec = ChannelSpec()
    estimator: EstimatorSpec = EstimatorSpec()
    campaign: CampaignSpec = CampaignSpec()
    study: StudySpec = StudySpec()
    output: OutputSpec = OutputSpec()
    seed: int = 0

    def all_positions(self) -> tuple[Position2D, ...]:
        return self.campaign.calibration_positions + self.campaign.test_positions


# ---------------------------------------------------------------- parsing


def _get(d: dict, key: str, path: str, default=..., kind=None):
    if key not in d:
        if default is ...:
            raise ParseError("missing required field", f"{path}.{key}".lstrip("."))
        return default
    val = d[key]
    if kind is not None and val is not None:
        try:
            val = kind(val)
        except (TypeError, ValueError) as exc:
            raise ParseError(f"expected {kind.__name__}: {exc}", f"{path}.{key}".lstrip(".")) from None
    return val


def _section(d: dict, key: str) -> dict:
    sec = d.get(key) or {}
    if not isinstance(sec, dict):
        raise ParseError("expected a mapping", key)
    return sec


def _positions(raw, path: str) -> tuple[Position2D, ...]:
    if raw is None:
        return ()
    try:
        return tuple(Position2D(float(x), float(y)) for x, y in raw)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"expected a list of [x, y] pairs: {exc}", path) from None


def _complex(raw, path: str) -> complex:
    if isinstance(raw, (int, float)):
        return complex(raw)
    try:
        re, im = raw
        return complex(float(re), float(im))
    except (TypeError, ValueError):
        raise ParseError("expected a number or [re, im]", path) from None


def _opt_float(v):
    if v is None:
        return None
    if isinstance(v, str) and v.lower() in ("inf", "+inf", ".inf"):
        return None
    f = float(v)
    return None if math.isinf(f) else f


def _check_keys(d: dict, allowed: set[str], path: str) -> None:
    extra = sorted(set(d) - allowed)
    if extra:
        raise ParseError(f"unknown field(s): {', '.join(extra)}", path or "<root>")


def config_from_dict(d: dict[str, Any]) -> ScenarioConfig:
    if not isinstance(d, dict):
        raise ParseError("top level must be a mapping")
    _check_keys(d, {"seed", "deployment", "prs", "offsets", "channel", "estimator", "campaign", "study", "output"}, "")

    dep = _section(d, "deployment")
    _check_keys(dep, {"gnb_positions_m", "carrier_hz", "scs_hz", "n_prb"}, "deployment")
    try:
        deployment = GnbDeployment(
            positions=_positions(_get(dep, "gnb_positions_m", "deployment"), "deployment.gnb_positions_m"),
            carrier_hz=_get(dep, "carrier_hz", "deployment", 3.6e9, float),
            scs_hz=_get(dep, "scs_hz", "deployment", 30e3, float),
            n_prb=_get(dep, "n_prb", "deployment", 106, int),
        )
    except ConfigError as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(str(exc), "deployment") from None

    prs_d = _section(d, "prs")
    prs_fields = set(PrsConfig.__dataclass_fields__)
    _check_keys(prs_d, prs_fields, "prs")
    try:
        prs = PrsConfig(**{k: (tuple(v) if isinstance(v, list) else int(v)) for k, v in prs_d.items()})
    except (TypeError, ValueError) as exc:
        raise ParseError(str(exc), "prs") from None

    off = _section(d, "offsets")
    _check_keys(off, set(OffsetSpec.__dataclass_fields__), "offsets")
    delta = off.get("delta_s")
    offsets = OffsetSpec(
        delta_s=None if delta is None else tuple(float(v) for v in delta),
        delta_bound_s=_get(off, "delta_bound_s", "offsets", 50e-9, float),
        phi_s=_get(off, "phi_s", "offsets", None, float),
        phi_bound_s=_get(off, "phi_bound_s", "offsets", 50e-9, float),
        noise_sigma_s=_get(off, "noise_sigma_s", "offsets", 0.65e-9, float),
    )

    ch = _section(d, "channel")
    _check_keys(ch, {"snr_db", "echoes"}, "channel")
    echoes: dict[int, list] = {}
    for i, e in enumerate(ch.get("echoes") or []):
        p = f"channel.echoes[{i}]"
        if not isinstance(e, dict):
            raise ParseError("expected a mapping with gnb_id, excess_delay_s, gain", p)
        _check_keys(e, {"gnb_id", "excess_delay_s", "gain"}, p)
        echoes.setdefault(_get(e, "gnb_id", p, kind=int), []).append(
            (_get(e, "excess_delay_s", p, kind=float), _complex(e.get("gain", 1.0), p + ".gain"))
        )
    channel = ChannelSpec(
        snr_db=_opt_float(ch.get("snr_db")),
        echoes={k: tuple(v) for k, v in echoes.items()},
    )

    est = _section(d, "estimator")
    _check_keys(est, set(EstimatorSpec.__dataclass_fields__), "estimator")
    estimator = EstimatorSpec(
        engine=_get(est, "engine", "estimator", "quantized", str),
        oversample_factor=_get(est, "oversample_factor", "estimator", 16, int),
        mode=_get(est, "mode", "estimator", "max_peak", str),
        threshold_db=_get(est, "threshold_db", "estimator", 10.0, float),
        native_sample_rate_hz=_get(est, "native_sample_rate_hz", "estimator", NATIVE_SAMPLE_RATE_HZ, float),
    )

    camp = _section(d, "campaign")
    _check_keys(camp, {"calibration_positions_m", "test_positions_m", "trials_per_position", "estimates_per_gnb"}, "campaign")
    campaign = CampaignSpec(
        calibration_positions=_positions(camp.get("calibration_positions_m"), "campaign.calibration_positions_m"),
        test_positions=_positions(camp.get("test_positions_m"), "campaign.test_positions_m"),
        trials_per_position=_get(camp, "trials_per_position", "campaign", 1, int),
        estimates_per_gnb=_get(camp, "estimates_per_gnb", "campaign", 500, int),
    )

    st = _section(d, "study")
    _check_keys(st, {"distance_m", "trials", "echo_gain", "excess_delays_s", "oversample_factors", "snr_db"}, "study")
    study = StudySpec(
        distance_m=_get(st, "distance_m", "study", 30.0, float),
        trials=_get(st, "trials", "study", 256, int),
        echo_gain=_complex(st.get("echo_gain", 0.9), "study.echo_gain"),
        excess_delays_s=tuple(float(v) for v in st.get("excess_delays_s") or ()),
        oversample_factors=tuple(int(v) for v in st.get("oversample_factors") or (1, 16)),
        snr_db=_opt_float(st.get("snr_db")),
    )

    out = _section(d, "output")
    _check_keys(out, set(OutputSpec.__dataclass_fields__), "output")
    output = OutputSpec(
        histogram_bin_s=_get(out, "histogram_bin_s", "output", 0.1e-9, float),
        hyperbola_t_max=_get(out, "hyperbola_t_max", "output", 2.0, float),
        hyperbola_points=_get(out, "hyperbola_points", "output", 101, int),
    )

    return ScenarioConfig(
        deployment=deployment,
        prs=prs,
        offsets=offsets,
        channel=channel,
        estimator=estimator,
        campaign=campaign,
        study=study,
        output=output,
        seed=_get(d, "seed", "", 0, int),
    )


def default_config_text() -> str:
    return resources.files("nrpos").joinpath("data/default.yaml").read_text()


def default_config_dict() -> dict[str, Any]:
    return yaml.safe_load(default_config_text())


def parse_config_text(text: str) -> ScenarioConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else None
        raise ParseError(getattr(exc, "problem", None) or str(exc), where) from None
    return config_from_dict(raw)


def load_config(path: str | Path | None = None) -> ScenarioConfig:
    """Read a scenario file; ``None`` loads the shipped default scenario.

    Raises ``OSError`` when the file cannot be read and :class:`ParseError`
    when it is malformed.
    """
    if path is None:
        return parse_config_text(default_config_text())
    return parse_config_text(Path(path).read_text())


def merge(base: dict, overrides: dict) -> dict:
    """Deep-merge ``overrides`` into a copy of ``base``."""
    out = copy.deepcopy(base)
    for k, v in overrides.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


# ------------------------------------------------------------- validation


def problems(config: ScenarioConfig, require_calibration: bool = True) -> list[str]:
    """Every violated scenario invariant, as human-readable messages."""
    errs: list[str] = []
    dep = config.deployment
    try:
        config.prs.validate(dep.n_prb)
        if config.prs.n_gnbs != dep.n_gnbs:
            errs.append(f"prs lists {config.prs.n_gnbs} gNBs, deployment has {dep.n_gnbs}")
    except ConfigError as exc:
        errs.append(f"prs: {exc}")
    try:
        dep.numerology
    except ConfigError as exc:
        errs.append(f"deployment: {exc}")

    off = config.offsets
    if off.delta_s is not None:
        if len(off.delta_s) != dep.n_gnbs:
            errs.append(f"offsets.delta_s has {len(off.delta_s)} entries for {dep.n_gnbs} gNBs")
        elif off.delta_s[0] != 0.0:
            errs.append("offsets.delta_s[0] (reference gNB) must be exactly 0")
    if off.noise_sigma_s < 0 or off.delta_bound_s < 0 or off.phi_bound_s < 0:
        errs.append("offset bounds and noise_sigma_s must be >= 0")

    est = config.estimator
    if est.engine not in ENGINES:
        errs.append(f"estimator.engine must be one of {ENGINES}")
    if est.mode not in ("max_peak", "first_path"):
        errs.append("estimator.mode must be max_peak or first_path")
    if est.oversample_factor < 1:
        errs.append("estimator.oversample_factor must be >= 1")
    if est.engine != "phy" and (config.channel.echoes or config.channel.snr_db is not None):
        errs.append(f"engine {est.engine!r} models LOS without AWGN; use engine 'phy' for echoes or finite snr_db")
    for gnb_id, echoes in config.channel.echoes.items():
        if gnb_id not in dep.gnb_ids:
            errs.append(f"channel.echoes: unknown gNB id {gnb_id}")
        for excess, _ in echoes:
            if not excess > 0:
                errs.append(f"channel.echoes: gNB {gnb_id} excess delay must be > 0")

    camp = config.campaign
    if require_calibration and not camp.calibration_positions:
        errs.append("campaign.calibration_positions_m is empty (K = 0)")
    if set(camp.calibration_positions) & set(camp.test_positions):
        errs.append("calibration and test positions must be disjoint")
    if camp.trials_per_position < 1 or camp.estimates_per_gnb < 1:
        errs.append("trials_per_position and estimates_per_gnb must be >= 1")
    if config.study.trials < 1 or any(f < 1 for f in config.study.oversample_factors):
        errs.append("study.trials and study.oversample_factors must be >= 1")

    try:
        span = unambiguous_range(dep.scs_hz, est.native_sample_rate_hz)
    except ConfigError as exc:
        errs.append(f"estimator: {exc}")
        span = None
    deltas_ok = off.delta_s is None or len(off.delta_s) == dep.n_gnbs
    if span is not None and deltas_ok:
        margin = NOISE_MARGIN_SIGMAS * off.noise_sigma_s
        phi_lo, phi_hi = off.phi_range()
        for i, ue in enumerate(config.all_positions()):
            for j in dep.gnb_ids:
                tof = time_of_flight(dep.position(j), ue)
                d_lo, d_hi = off.delta_range(j)
                max_echo = max((e for e, _ in config.channel.echoes_for(j)), default=0.0)
                lo = tof + phi_lo + d_lo - margin
                hi = tof + phi_hi + d_hi + margin + max_echo
                if lo < 0 or hi >= span:
                    errs.append(
                        f"position {i} gNB {j}: delays [{lo:.3e}, {hi:.3e}] s leave the "
                        f"unambiguous range [0, {span:.3e}) s"
                    )

    ref = dep.position(1)
    for i, ue in enumerate(camp.calibration_positions):
        for j in list(dep.gnb_ids)[1:]:
            g = dep.position(j)
            a = SPEED_OF_LIGHT / 2 * true_rstd(g, ref, ue)
            d = euclidean_distance(g, ref) / 2
            if a * a >= d * d * (1 - 1e-9):
                errs.append(f"calibration position {i}: hyperbola for gNB {j} is infeasible (|a| >= d)")
    return errs


def validate(config: ScenarioConfig, require_calibration: bool = True) -> None:
    errs = problems(config, require_calibration)
    if errs:
        raise ConfigError("; ".join(errs))
