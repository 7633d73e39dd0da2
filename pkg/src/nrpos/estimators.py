"""scikit-learn style wrappers over the functional pipeline.

``ToaExtractor`` turns CFR rows into TOAs, ``OffsetCalibrator`` learns the
inter-gNB offsets from TOAs at known positions, and ``TdoaLocator`` chains
calibration and the hyperbolic solver into a regressor from TOA rows to
``(x, y)``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .model import GnbDeployment, Position2D
from .tdoa import estimate_position, make_rstd_record
from .timing import CalibrationResult, ToaRecord, calibrate
from .toa import NATIVE_SAMPLE_RATE_HZ, Cfr, detect_toa, interpolate_cir


def _deployment(gnb_positions) -> GnbDeployment:
    arr = check_array(gnb_positions, dtype=float)
    if arr.shape[1] != 2:
        raise ValueError(f"gnb_positions must be (n_gnbs, 2), got {arr.shape}")
    return GnbDeployment(tuple(map(tuple, arr)))


class ToaExtractor(TransformerMixin, BaseEstimator):
    """CFR rows ``(n_samples, n_subcarriers)`` (complex, zero where unoccupied) to TOAs ``(n_samples, 1)``.

    Stateless; ``fit`` only records the band width.
    """

    def __init__(self, oversample_factor=16, mode="max_peak", threshold_db=10.0,
                 scs_hz=30e3, native_sample_rate_hz=NATIVE_SAMPLE_RATE_HZ):
        self.oversample_factor = oversample_factor
        self.mode = mode
        self.threshold_db = threshold_db
        self.scs_hz = scs_hz
        self.native_sample_rate_hz = native_sample_rate_hz

    @staticmethod
    def _check(X) -> np.ndarray:
        # check_array refuses complex input, so validate by hand.
        X = np.asarray(X, dtype=complex)
        if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
            raise ValueError(f"expected a non-empty 2-D CFR array, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ValueError("CFR contains NaN or inf")
        return X

    def fit(self, X, y=None):
        X = self._check(X)
        if self.mode not in ("max_peak", "first_path"):
            raise ValueError(f"unknown detection mode {self.mode!r}")
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = self._check(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} subcarriers, fitted with {self.n_features_in_}")
        sc = np.arange(X.shape[1])
        ones = np.ones(X.shape[1], dtype=int)
        out = np.empty((X.shape[0], 1))
        for i, row in enumerate(X):
            cir = interpolate_cir(Cfr(row, sc, self.scs_hz, X.shape[1], ones),
                                  self.oversample_factor, self.native_sample_rate_hz)
            out[i, 0] = detect_toa(cir, self.mode, self.threshold_db).toa_s
        return out


class OffsetCalibrator(TransformerMixin, BaseEstimator):
    """Learn ``delta_hat`` from TOA rows taken at known positions.

    ``X`` is ``(n_samples, n_gnbs)``: one TOA per gNB, all sharing the row's
    UE clock offset. ``y`` is ``(n_samples, 2)``; identical rows of ``y``
    form one calibration position. ``transform`` returns corrected RSTDs
    ``(n_samples, n_gnbs - 1)``.
    """

    def __init__(self, gnb_positions):
        self.gnb_positions = gnb_positions

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float, multi_output=True)
        dep = _deployment(self.gnb_positions)
        if X.shape[1] != dep.n_gnbs:
            raise ValueError(f"X has {X.shape[1]} columns, deployment has {dep.n_gnbs} gNBs")
        if y.ndim != 2 or y.shape[1] != 2:
            raise ValueError("y must be (n_samples, 2) known positions")
        uniq, pos_id = np.unique(y, axis=0, return_inverse=True)
        pos_id = pos_id.ravel()
        records = [
            ToaRecord(i, int(pos_id[i]), j + 1, float(X[i, j]))
            for i in range(X.shape[0]) for j in range(X.shape[1])
        ]
        known = {k: Position2D.from_seq(p) for k, p in enumerate(uniq)}
        self.calibration_ = calibrate(records, dep, known)
        self.delta_hat_ = np.asarray(self.calibration_.delta_hat_s)
        self.n_positions_ = len(uniq)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "delta_hat_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} columns, fitted with {self.n_features_in_}")
        return (X[:, 1:] - X[:, :1]) - self.delta_hat_[1:]


class TdoaLocator(RegressorMixin, BaseEstimator):
    """TOA rows to UE positions.

    ``fit`` calibrates on known positions; with ``calibrate=False`` it skips
    that and uses zero offsets (the uncalibrated control).
    """

    def __init__(self, gnb_positions, calibrate=True):
        self.gnb_positions = gnb_positions
        self.calibrate = calibrate

    def fit(self, X, y=None):
        dep = _deployment(self.gnb_positions)
        if self.calibrate:
            if y is None:
                raise ValueError("calibrating needs known positions y")
            self.calibrator_ = OffsetCalibrator(self.gnb_positions).fit(X, y)
            self.calibration_ = self.calibrator_.calibration_
        else:
            X = check_array(X, dtype=float)
            self.calibration_ = CalibrationResult.zero(dep.n_gnbs)
        self.delta_hat_ = np.asarray(self.calibration_.delta_hat_s)
        self.n_features_in_ = dep.n_gnbs
        return self

    def predict(self, X):
        check_is_fitted(self, "delta_hat_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} columns, fitted with {self.n_features_in_}")
        dep = _deployment(self.gnb_positions)
        out = np.empty((X.shape[0], 2))
        for i, row in enumerate(X):
            recs = [make_rstd_record(j + 1, row[j] - row[0], self.delta_hat_[j]) for j in range(1, len(row))]
            out[i] = estimate_position(dep, recs).position.as_array()
        return out
