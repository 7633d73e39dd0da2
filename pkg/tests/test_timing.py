import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nrpos.errors import ConfigError, InsufficientData, MissingReference
from nrpos.model import GnbDeployment, Position2D, time_of_flight
from nrpos.timing import (
    CalibrationResult,
    TimingOffsets,
    ToaRecord,
    calibrate,
    measured_rstd,
    simulate_toa,
    trial_rstds,
    true_rstd,
)

DELTA = (0.0, 41.2e-9, 30.9e-9)
KNOWN = [Position2D(x, y) for x in (17, 25, 33) for y in (8.43, 14.43, 20.43)]


def campaign(dep, delta=DELTA, sigma=0.0, n=500, seed=0, phis=None, positions=KNOWN):
    rng = np.random.default_rng(seed)
    recs = []
    for i, ue in enumerate(positions):
        phi = rng.uniform(-50e-9, 50e-9) if phis is None else phis[i]
        off = TimingOffsets(phi, delta, sigma)
        for j in dep.gnb_ids:
            tof = time_of_flight(dep.position(j), ue)
            for t in np.atleast_1d(simulate_toa(tof, off, j, rng, n)):
                recs.append(ToaRecord(i, i, j, float(t), tof))
    return recs


def test_offsets_invariants():
    with pytest.raises(ConfigError):
        TimingOffsets(0.0, (1e-9, 0.0, 0.0))
    with pytest.raises(ConfigError):
        TimingOffsets(float("nan"), DELTA)
    with pytest.raises(ConfigError):
        TimingOffsets(0.0, DELTA, -1.0)


def test_simulate_toa_examples():
    assert simulate_toa(100e-9, TimingOffsets(0.0, (0.0, 0.0, 0.0)), 1) == 100e-9
    assert simulate_toa(100e-9, TimingOffsets(27e-9, DELTA), 2) == pytest.approx(168.2e-9, abs=1e-18)
    draws = simulate_toa(100e-9, TimingOffsets(0.0, DELTA, 0.65e-9), 1, np.random.default_rng(3), 500)
    assert 0.5e-9 <= draws.std(ddof=1) <= 0.8e-9


def test_rstd_examples():
    assert measured_rstd(5e-9, 5e-9) == 0
    assert measured_rstd(168.2e-9, 127e-9) == pytest.approx(41.2e-9, abs=1e-18)
    assert measured_rstd(3e-9, 7e-9) == -measured_rstd(7e-9, 3e-9)
    ref, gj = Position2D(0, 0), Position2D(100, 0)
    assert true_rstd(gj, ref, Position2D(50, 17)) == 0
    assert true_rstd(gj, ref, Position2D(-30, 0)) == pytest.approx(100 / 299_792_458)
    # gNB j 30 m farther than the reference
    assert true_rstd(Position2D(30, 0), ref, Position2D(-10, 0)) == pytest.approx(100.07e-9, abs=0.01e-9)


@given(st.floats(-500, 500), st.floats(-500, 500))
def test_true_rstd_bounded(x, y):
    ref, gj = Position2D(0, 0), Position2D(50, 0)
    assert abs(true_rstd(gj, ref, Position2D(x, y))) <= 50 / 299_792_458 * (1 + 1e-12)


def test_noiseless_calibration_exact(triangle):
    cal = calibrate(campaign(triangle), triangle, KNOWN)
    assert cal.delta_hat_s[0] == 0.0
    assert abs(cal.delta_hat_s[1] - 41.2e-9) < 1e-15
    assert abs(cal.delta_hat_s[2] - 30.9e-9) < 1e-15
    assert cal.sample_count == (9, 9, 9)


def test_noisy_calibration_standard_error(triangle):
    sigma = 1e-9
    bound = 3 * sigma / np.sqrt(9 * 500)
    cal = calibrate(campaign(triangle, sigma=sigma, seed=5), triangle, KNOWN)
    for j in (2, 3):
        assert abs(cal.delta_hat(j) - DELTA[j - 1]) < bound


def test_colocated_zero_offsets():
    # deployments forbid co-located gNBs, so use a 1 mm cluster around the UE
    dep = GnbDeployment((Position2D(0, 0), Position2D(1e-3, 0), Position2D(0, 1e-3)))
    recs = campaign(dep, delta=(0.0, 0.0, 0.0), n=1, positions=[Position2D(0, 0)])
    cal = calibrate(recs, dep, [Position2D(0, 0)])
    assert cal.delta_hat_s[0] == 0.0
    assert np.allclose(cal.delta_hat_s, 0.0, rtol=0, atol=1e-20)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-1e-6, 1e-6), min_size=9, max_size=9))
def test_phi_invariance(triangle, shifts):
    base = campaign(triangle, sigma=0.3e-9, n=20, seed=1, phis=[0.0] * 9)
    moved = [ToaRecord(r.trial_id, r.ue_position_id, r.gnb_id, r.toa_s + shifts[r.trial_id], r.true_tof_s)
             for r in base]
    a = calibrate(base, triangle, KNOWN).delta_hat_s
    b = calibrate(moved, triangle, KNOWN).delta_hat_s
    assert a[0] == b[0] == 0.0
    assert np.max(np.abs(np.subtract(a, b))) < 1e-15


def test_error_scaling_matches_sqrt2_sigma(triangle):
    # single position so the 1/sqrt(N) slope is sigma * sqrt(2)
    sigma = 1e-9
    pos = [KNOWN[4]]
    ns = np.array([10, 100, 1000, 10000])
    rms = []
    for n in ns:
        errs = [calibrate(campaign(triangle, sigma=sigma, n=int(n), seed=s, positions=pos), triangle, pos)
                .delta_hat(2) - 41.2e-9 for s in range(60)]
        rms.append(np.sqrt(np.mean(np.square(errs))))
    slope = np.exp(np.mean(np.log(rms) + 0.5 * np.log(ns)))
    assert slope == pytest.approx(sigma * np.sqrt(2), rel=0.2)


def test_unequal_counts_weight_positions_equally(triangle):
    recs = campaign(triangle, n=1, positions=KNOWN[:2], delta=(0.0, 10e-9, 0.0))
    # position 1 gets 100x the samples, all shifted 5 ns for gNB 2
    extra = [ToaRecord(1, 1, r.gnb_id, r.toa_s + (5e-9 if r.gnb_id == 2 else 0.0), r.true_tof_s)
             for r in recs if r.ue_position_id == 1 for _ in range(100)]
    recs = [r for r in recs if r.ue_position_id == 0] + extra
    cal = calibrate(recs, triangle, KNOWN[:2])
    assert cal.delta_hat(2) == pytest.approx(12.5e-9, abs=1e-15)


def test_missing_reference(triangle):
    recs = [r for r in campaign(triangle, n=1) if not (r.ue_position_id == 3 and r.gnb_id == 1)]
    with pytest.raises(MissingReference):
        calibrate(recs, triangle, KNOWN)


def test_insufficient_data(triangle):
    recs = [r for r in campaign(triangle, n=1) if r.gnb_id != 3]
    with pytest.raises(InsufficientData):
        calibrate(recs, triangle, KNOWN)


def test_trial_rstds_keys(triangle):
    out = trial_rstds(campaign(triangle, n=3))
    assert sorted(out) == [(i, i) for i in range(9)]
    assert set(out[(0, 0)]) == {2, 3}


def test_zero_calibration():
    z = CalibrationResult.zero(4)
    assert z.n_gnbs == 4 and z.delta_hat(3) == 0.0
