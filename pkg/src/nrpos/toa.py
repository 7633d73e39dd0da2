"""TOA extraction from PRS channel estimates.

The pipeline is: least-squares CFR on the PRS REs, coherent averaging over
PRS symbols on a common subcarrier lattice, zero-padded inverse FFT
("digital interpolation"), then a peak search on ``|CIR|``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import AllZero, ConfigError, EmptyReference
from .prs import ResourceGrid

NATIVE_SAMPLE_RATE_HZ = 46.08e6

DetectionMode = Literal["max_peak", "first_path"]


@dataclass
class Cfr:
    """Channel estimate on the PRS subcarriers of one slot.

    ``subcarriers`` indexes into the ``n_band``-wide carrier; ``values[i]``
    is the estimate at ``subcarriers[i]`` after combining PRS symbols.
    """

    values: np.ndarray
    subcarriers: np.ndarray
    scs_hz: float
    n_band: int
    symbols_per_subcarrier: np.ndarray | None = None

    def full_band(self) -> np.ndarray:
        out = np.zeros(self.n_band, dtype=complex)
        out[self.subcarriers] = self.values
        return out


@dataclass
class Cir:
    taps: np.ndarray
    oversample_factor: int
    native_sample_rate_hz: float = NATIVE_SAMPLE_RATE_HZ

    @property
    def tap_spacing(self) -> float:
        return 1.0 / (self.native_sample_rate_hz * self.oversample_factor)

    @property
    def native_tap_count(self) -> int:
        return len(self.taps) // self.oversample_factor

    @property
    def unambiguous_range(self) -> float:
        return len(self.taps) * self.tap_spacing


@dataclass
class ToaEstimate:
    toa_s: float
    peak_index: int
    peak_magnitude: float
    second_peak_ratio: float


def tap_spacing(native_sample_rate_hz: float = NATIVE_SAMPLE_RATE_HZ, oversample_factor: int = 1) -> float:
    """Seconds per CIR tap after interpolation by ``oversample_factor``."""
    return 1.0 / (native_sample_rate_hz * oversample_factor)


def native_fft_size(scs_hz: float, native_sample_rate_hz: float = NATIVE_SAMPLE_RATE_HZ) -> int:
    n = native_sample_rate_hz / scs_hz
    if abs(n - round(n)) > 1e-9 * n:
        raise ConfigError(f"sample rate {native_sample_rate_hz} Hz is not a multiple of scs {scs_hz} Hz")
    return int(round(n))


def unambiguous_range(scs_hz: float, native_sample_rate_hz: float = NATIVE_SAMPLE_RATE_HZ) -> float:
    return native_fft_size(scs_hz, native_sample_rate_hz) / native_sample_rate_hz


def estimate_cfr(rx_grid: ResourceGrid, ref_grid: ResourceGrid) -> Cfr:
    """LS estimate Y/X per occupied RE, averaged over PRS symbols per subcarrier."""
    if rx_grid.data.shape != ref_grid.data.shape:
        raise ValueError(f"grid shapes differ: {rx_grid.data.shape} vs {ref_grid.data.shape}")
    occ = ref_grid.occupied
    if not occ.any():
        raise EmptyReference("reference grid has no occupied REs")
    ls = np.zeros(rx_grid.data.shape, dtype=complex)
    ls[occ] = rx_grid.data[occ] / ref_grid.data[occ]
    counts = occ.sum(axis=0)
    sc = np.flatnonzero(counts)
    values = ls[:, sc].sum(axis=0) / counts[sc]
    return Cfr(values, sc, rx_grid.scs_hz, rx_grid.n_subcarriers, counts[sc])


def interpolate_cir(
    cfr: Cfr,
    oversample_factor: int = 16,
    native_sample_rate_hz: float = NATIVE_SAMPLE_RATE_HZ,
) -> Cir:
    """Zero-fill the band, zero-pad to ``oversample_factor`` x the native FFT size, IFFT.

    Subcarrier ``k`` sits at baseband bin ``k - n_band // 2``. The unitary
    ("ortho") transform keeps sum |cir|^2 equal to sum |cfr|^2.
    """
    if int(oversample_factor) != oversample_factor or oversample_factor < 1:
        raise ValueError("oversample_factor must be an integer >= 1")
    oversample_factor = int(oversample_factor)
    n_native = native_fft_size(cfr.scs_hz, native_sample_rate_hz)
    if cfr.n_band > n_native:
        raise ConfigError(f"{cfr.n_band} subcarriers do not fit a {n_native}-point FFT")
    m = n_native * oversample_factor
    spectrum = np.zeros(m, dtype=complex)
    bins = (cfr.subcarriers - cfr.n_band // 2) % m
    spectrum[bins] = cfr.values
    return Cir(np.fft.ifft(spectrum, norm="ortho"), oversample_factor, native_sample_rate_hz)


def _local_maxima(mag: np.ndarray) -> np.ndarray:
    left = np.roll(mag, 1)
    right = np.roll(mag, -1)
    return np.flatnonzero((mag >= left) & (mag > right))


def detect_toa(
    cir: Cir,
    mode: DetectionMode = "max_peak",
    threshold_db: float = 10.0,
    refine: bool = False,
) -> ToaEstimate:
    """Pick the TOA tap of a CIR.

    ``max_peak`` takes the global maximum of ``|cir|``. ``first_path`` takes
    the earliest local maximum within ``threshold_db`` of the global one.
    ``refine`` adds a parabolic sub-tap correction to ``toa_s``; off by
    default because resolution is quoted in whole taps.
    """
    mag = np.abs(cir.taps)
    if mag.size == 0:
        raise ValueError("empty CIR")
    peak = int(np.argmax(mag))
    peak_mag = float(mag[peak])
    if peak_mag == 0.0:
        raise AllZero("CIR is identically zero")
    maxima = _local_maxima(mag)
    if mode == "max_peak":
        idx = peak
    elif mode == "first_path":
        floor = peak_mag * 10 ** (-threshold_db / 20)
        idx = int(maxima[mag[maxima] >= floor][0])
    else:
        raise ValueError(f"unknown detection mode {mode!r}")

    others = mag[maxima[maxima != peak]]
    second = float(others.max() / peak_mag) if others.size else 0.0

    toa = idx * cir.tap_spacing
    if refine:
        n = len(mag)
        y0, y1, y2 = mag[(idx - 1) % n], mag[idx], mag[(idx + 1) % n]
        den = y0 - 2 * y1 + y2
        if den != 0:
            toa += 0.5 * (y0 - y2) / den * cir.tap_spacing
    return ToaEstimate(toa_s=toa, peak_index=idx, peak_magnitude=float(mag[idx]), second_peak_ratio=second)


def quantize_delay(
    delay_s,
    scs_hz: float,
    oversample_factor: int = 16,
    native_sample_rate_hz: float = NATIVE_SAMPLE_RATE_HZ,
):
    """Closed-form TOA of a noiseless single-tap channel.

    ``|CIR|`` of one tap is a Dirichlet kernel centred on the tap delay, so
    the max-peak tap is the grid point nearest the delay, wrapped onto the
    circular CIR. Accepts scalars or arrays.
    """
    step = tap_spacing(native_sample_rate_hz, oversample_factor)
    m = native_fft_size(scs_hz, native_sample_rate_hz) * oversample_factor
    idx = np.mod(np.rint(np.asarray(delay_s) / step), m)
    return idx * step
