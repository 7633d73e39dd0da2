import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nrpos.channel import (
    ChannelProfile,
    ChannelTap,
    NoiseSpec,
    apply_channel,
    frequency_response,
    los_profile,
    multipath_profile,
    rms_delay_spread,
)
from nrpos.errors import DuplicateDelay
from nrpos.model import Position2D
from nrpos.prs import PrsConfig, ResourceGrid, map_prs_to_grid

O = Position2D(0, 0)
gains = st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False)
delays = st.floats(0, 1e-6)


def test_los_examples():
    assert los_profile(O, Position2D(299.792458, 0)).delays[0] == pytest.approx(1e-6)
    p = los_profile(O, O)
    assert p.delays.tolist() == [0.0] and p.gains.tolist() == [1 + 0j]
    assert los_profile(O, Position2D(30, 40)).first_arrival == pytest.approx(166.78e-9, abs=0.01e-9)


def test_multipath_construction():
    ue = Position2D(30, 40)
    assert multipath_profile(O, ue, []) == los_profile(O, ue)
    p = multipath_profile(O, ue, [(50e-9, 0.8)])
    assert len(p.taps) == 2
    assert p.delays[1] - p.delays[0] == pytest.approx(50e-9)
    with pytest.raises(ValueError):
        multipath_profile(O, ue, [(0.0, 0.5)])


def test_echo_spacing_vs_bandwidth(triangle):
    inv_b = 1 / triangle.bandwidth_hz
    assert inv_b == pytest.approx(26.2e-9, abs=0.05e-9)
    p = multipath_profile(O, Position2D(10, 0), [(26e-9, 0.5), (52e-9, 0.3)])
    spacing = np.diff(p.delays)
    assert spacing == pytest.approx([26e-9, 26e-9])
    assert spacing[0] / inv_b == pytest.approx(1.0, abs=0.01)


def test_profile_invariants():
    p = ChannelProfile((ChannelTap(3e-9, 0.1), ChannelTap(1e-9, 1.0)))
    assert p.delays.tolist() == [1e-9, 3e-9]
    with pytest.raises(DuplicateDelay):
        ChannelProfile((ChannelTap(1e-9), ChannelTap(1e-9, 0.5)))
    with pytest.raises(ValueError):
        ChannelTap(-1e-9)
    with pytest.raises(ValueError):
        ChannelProfile(())


def test_flat_and_phase_ramp():
    f = np.linspace(-19e6, 19e6, 257)
    assert np.allclose(frequency_response(ChannelProfile((ChannelTap(0.0),)), f), 1.0)
    h = frequency_response(ChannelProfile((ChannelTap(123.4e-9),)), f)
    assert np.allclose(np.abs(h), 1.0)


def test_two_ray_null_spacing():
    dt = 26.2e-9
    f = np.linspace(-60e6, 60e6, 120_001)
    h = np.abs(frequency_response(ChannelProfile((ChannelTap(0.0), ChannelTap(dt))), f))
    # oracle: |1 + exp(-i 2 pi f dt)| = 2 |cos(pi f dt)|
    assert np.allclose(h, 2 * np.abs(np.cos(np.pi * f * dt)), atol=1e-9)
    nulls = f[1:-1][(h[1:-1] < h[:-2]) & (h[1:-1] < h[2:])]
    assert np.diff(nulls) == pytest.approx(1 / dt, rel=1e-3)
    assert 1 / dt == pytest.approx(38.16e6, rel=2e-3)


@given(st.lists(st.tuples(delays, gains), min_size=1, max_size=4, unique_by=lambda t: t[0]),
       st.lists(gains, min_size=4, max_size=4))
def test_response_linear_in_gains(taps, other):
    f = np.linspace(-19e6, 19e6, 33)
    a = ChannelProfile(tuple(ChannelTap(d, g) for d, g in taps))
    b = ChannelProfile(tuple(ChannelTap(d, g2) for (d, _), g2 in zip(taps, other)))
    ab = ChannelProfile(tuple(ChannelTap(d, g + g2) for (d, g), g2 in zip(taps, other)))
    assert np.allclose(frequency_response(ab, f), frequency_response(a, f) + frequency_response(b, f), atol=1e-9)


@given(st.lists(st.tuples(st.floats(0, 5e-7), gains), min_size=1, max_size=4, unique_by=lambda t: t[0]))
def test_zero_gain_tap_changes_nothing(taps):
    f = np.linspace(-19e6, 19e6, 33)
    p = ChannelProfile(tuple(ChannelTap(d, g) for d, g in taps))
    q = ChannelProfile(p.taps + (ChannelTap(9.99e-7, 0.0),))
    assert np.array_equal(frequency_response(p, f), frequency_response(q, f))
    assert rms_delay_spread(p) == pytest.approx(rms_delay_spread(q), abs=1e-18)


def test_rms_delay_spread_examples():
    assert rms_delay_spread(ChannelProfile((ChannelTap(5e-9),))) == 0.0
    two = ChannelProfile((ChannelTap(0.0), ChannelTap(100e-9)))
    assert rms_delay_spread(two) == pytest.approx(50e-9)
    weighted = ChannelProfile((ChannelTap(0.0, 1.0), ChannelTap(100e-9, 0.5)))
    assert rms_delay_spread(weighted) == pytest.approx(40e-9)


def test_apply_channel_identity_and_determinism(triangle):
    g = map_prs_to_grid(PrsConfig(), 1, 3, triangle)
    flat = ChannelProfile((ChannelTap(0.0),))
    assert np.array_equal(apply_channel(g, flat, NoiseSpec(None)).data, g.data)
    assert np.array_equal(apply_channel(g, flat, NoiseSpec(float("inf"))).data, g.data)
    a = apply_channel(g, flat, NoiseSpec(10.0, 42)).data
    assert np.array_equal(a, apply_channel(g, flat, NoiseSpec(10.0, 42)).data)
    assert not np.array_equal(a, apply_channel(g, flat, NoiseSpec(10.0, 43)).data)


def test_noise_variance_at_20db():
    grid = ResourceGrid(np.ones((100, 1000), dtype=complex), 30e3, 0)
    out = apply_channel(grid, ChannelProfile((ChannelTap(0.0),)), NoiseSpec(20.0, 7))
    noise = out.data - grid.data
    assert np.mean(np.abs(noise) ** 2) == pytest.approx(0.01, rel=0.02)
