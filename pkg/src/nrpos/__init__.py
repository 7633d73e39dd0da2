"""5G NR downlink-PRS TDOA positioning simulator."""

from .channel import ChannelProfile, ChannelTap, NoiseSpec, apply_channel, los_profile, multipath_profile
from .config import ScenarioConfig, load_config, problems, validate
from .errors import ConfigError, NoConvergenceWarning, PositioningError
from .estimators import OffsetCalibrator, TdoaLocator, ToaExtractor
from .harness import run_calibration_campaign, run_multipath_study, run_positioning_campaign, run_session, run_sweep
from .model import SPEED_OF_LIGHT, GnbDeployment, Position2D
from .prs import PrsConfig, ResourceGrid, build_schedule, generate_prs_sequence, map_prs_to_grid
from .tdoa import RstdRecord, estimate_position, hyperbola_from_rstd, rmse
from .timing import CalibrationResult, TimingOffsets, ToaRecord, calibrate
from .toa import Cfr, Cir, ToaEstimate, detect_toa, estimate_cfr, interpolate_cir

__version__ = "0.1.0"

__all__ = [
    "SPEED_OF_LIGHT", "CalibrationResult", "Cfr", "ChannelProfile", "ChannelTap", "Cir", "ConfigError",
    "GnbDeployment", "NoConvergenceWarning", "NoiseSpec", "OffsetCalibrator", "Position2D", "PositioningError",
    "PrsConfig", "ResourceGrid", "RstdRecord", "ScenarioConfig", "TdoaLocator", "TimingOffsets", "ToaEstimate",
    "ToaExtractor", "ToaRecord", "apply_channel", "build_schedule", "calibrate", "detect_toa", "estimate_cfr",
    "estimate_position", "generate_prs_sequence", "hyperbola_from_rstd", "interpolate_cir", "load_config",
    "los_profile", "map_prs_to_grid", "multipath_profile", "problems", "rmse", "run_calibration_campaign",
    "run_multipath_study", "run_positioning_campaign", "run_session", "run_sweep", "validate",
]
