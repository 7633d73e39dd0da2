import math
import warnings

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from conftest import random_in_hull
from nrpos.errors import CoincidentFoci, DegenerateGeometry, InsufficientData, InvalidHyperbola, LengthMismatch
from nrpos.errors import NoConvergenceWarning
from nrpos.model import SPEED_OF_LIGHT, GnbDeployment, Position2D, euclidean_distance
from nrpos.tdoa import (
    RstdRecord,
    correct_rstd,
    estimate_position,
    hyperbola_from_rstd,
    hyperbola_points,
    make_rstd_record,
    rmse,
    solve_tdoa,
)
from nrpos.timing import true_rstd

C = SPEED_OF_LIGHT
coord = st.floats(-200, 200)


def exact_records(dep, ue):
    ref = dep.position(1)
    return [RstdRecord(j, r, r) for j in list(dep.gnb_ids)[1:] for r in [true_rstd(dep.position(j), ref, ue)]]


def test_correct_rstd_examples():
    assert correct_rstd(41.2e-9, 41.2e-9) == 0.0
    assert correct_rstd(12e-9, 0.0) == 12e-9
    assert correct_rstd(100e-9, 30.9e-9) == pytest.approx(69.1e-9, abs=1e-18)
    rec = make_rstd_record(2, 100e-9, 30.9e-9)
    assert rec.rstd_s == 100e-9 and rec.corrected_rstd_s == pytest.approx(69.1e-9, abs=1e-18)
    with pytest.raises(ValueError):
        RstdRecord(1, 0.0, 0.0)


def test_semi_axis_error_from_uncorrected_offset():
    ref, gj = Position2D(0, 0), Position2D(50, 0)
    base = hyperbola_from_rstd(ref, gj, 5e-9)
    off = hyperbola_from_rstd(ref, gj, 5e-9 + 41.2e-9)
    assert off.a - base.a == pytest.approx(6.18, abs=0.01)
    assert off.a - base.a == pytest.approx(C / 2 * 41.2e-9, rel=1e-12)


def test_zero_rstd_is_bisector():
    h = hyperbola_from_rstd(Position2D(0, 0), Position2D(40, 30), 0.0)
    assert h.a == 0.0 and h.b == h.d == 25.0
    for p in hyperbola_points(h, n=11):
        assert euclidean_distance(p, h.focus_ref) == pytest.approx(euclidean_distance(p, h.focus_j))


def test_invalid_and_coincident():
    with pytest.raises(InvalidHyperbola):
        hyperbola_from_rstd(Position2D(0, 0), Position2D(100, 0), 400e-9)
    with pytest.raises(InvalidHyperbola):
        hyperbola_from_rstd(Position2D(0, 0), Position2D(100, 0), -400e-9)
    with pytest.raises(CoincidentFoci):
        hyperbola_from_rstd(Position2D(3, 3), Position2D(3, 3), 0.0)


def test_vertex_and_canonical_form():
    h = hyperbola_from_rstd(Position2D(-50, 0), Position2D(50, 0), 100e-9)
    pts = hyperbola_points(h, (-1.5, 1.5), 31)
    vertex = pts[15]
    assert euclidean_distance(vertex, h.center) == pytest.approx(abs(h.a))
    for p in pts:
        assert p.x**2 / h.a**2 - p.y**2 / h.b**2 == pytest.approx(1.0, rel=1e-9)
    with pytest.raises(ValueError):
        hyperbola_points(h, n=1)


@given(coord, coord, coord, coord, st.floats(-0.999, 0.999))
def test_focal_property_and_branch(x1, y1, x2, y2, frac):
    ref, gj = Position2D(x1, y1), Position2D(x2, y2)
    d = euclidean_distance(ref, gj) / 2
    assume(d > 0.5)
    rstd = frac * 2 * d / C
    h = hyperbola_from_rstd(ref, gj, rstd)
    for p in hyperbola_points(h, (-2, 2), 41):
        dj, dr = euclidean_distance(p, gj), euclidean_distance(p, ref)
        assert abs(dj - dr - C * rstd) < 1e-6
        if C * rstd > 1e-6:
            assert dr < dj
        elif C * rstd < -1e-6:
            assert dj < dr


def test_centroid_recovered(triangle):
    centroid = Position2D(25, 43.30127 / 3)
    recs = exact_records(triangle, centroid)
    assert all(abs(r.corrected_rstd_s) < 1e-15 for r in recs)
    est = estimate_position(triangle, recs)
    assert est.converged
    assert euclidean_distance(est.position, centroid) < 1e-6


def test_in_hull_recovery(triangle):
    rng = np.random.default_rng(2)
    for xy in random_in_hull(rng, triangle, 200):
        ue = Position2D(*xy)
        est = estimate_position(triangle, exact_records(triangle, ue))
        assert euclidean_distance(est.position, ue) < 1e-6


def test_four_gnbs(triangle):
    dep = GnbDeployment(triangle.positions + (Position2D(25, -20),))
    ue = Position2D(30, 10)
    est = estimate_position(dep, exact_records(dep, ue))
    assert euclidean_distance(est.position, ue) < 1e-6


def test_initial_guess_used(triangle):
    ue = Position2D(20, 15)
    est = estimate_position(triangle, exact_records(triangle, ue), initial_guess=Position2D(22, 14))
    assert euclidean_distance(est.position, ue) < 1e-6


def test_needs_two_records(triangle):
    with pytest.raises(InsufficientData):
        estimate_position(triangle, exact_records(triangle, Position2D(20, 10))[:1])


def test_collinear_degenerate():
    dep = GnbDeployment((Position2D(0, 0), Position2D(50, 0), Position2D(100, 0)))
    with pytest.raises(DegenerateGeometry):
        estimate_position(dep, exact_records(dep, Position2D(25, 0)))


def test_no_convergence_warns(triangle):
    recs = exact_records(triangle, Position2D(20, 10))
    with pytest.warns(NoConvergenceWarning):
        est = estimate_position(triangle, recs, initial_guess=Position2D(-80, 90), max_iter=1)
    assert not est.converged and math.isfinite(est.residual_norm)


def test_solver_returns_tuple():
    anchors = np.array([[0, 0], [50, 0], [25, 43.30127]])
    p = np.array([20.0, 12.0])
    d = np.hypot(*(anchors - p).T)
    pos, res, it, ok = solve_tdoa(anchors, d[1:] - d[0])
    assert ok and res < 1e-6 and it >= 1
    assert np.allclose(pos, p, atol=1e-6)


def test_rmse_examples():
    pts = [Position2D(1, 2), Position2D(3, 4)]
    assert rmse(pts, pts) == 0.0
    assert rmse([Position2D(0, 0)], [Position2D(3, 0)]) == 3.0
    truth = [Position2D(0, 0)] * 6
    est = [Position2D(e, 0) for e in (1, 1, 2, 2, 1, 2)]
    assert rmse(est, truth) == pytest.approx(math.sqrt(15 / 6))
    assert rmse(est, truth) == pytest.approx(1.581, abs=1e-3)
    with pytest.raises(LengthMismatch):
        rmse(est, truth[:5])
    with pytest.raises(LengthMismatch):
        rmse([], [])


def test_offset_sensitivity_every_trial(triangle):
    rng = np.random.default_rng(9)
    delta = (0.0, 41.2e-9, 30.9e-9)
    for xy in random_in_hull(rng, triangle, 100):
        ue = Position2D(*xy)
        ref = triangle.position(1)
        noise = rng.normal(0, 0.65e-9 * math.sqrt(2 / 500), 2)
        meas = [true_rstd(triangle.position(j), ref, ue) + delta[j - 1] + n for j, n in zip((2, 3), noise)]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NoConvergenceWarning)
            cal = estimate_position(triangle, [make_rstd_record(j, m, delta[j - 1]) for j, m in zip((2, 3), meas)])
            raw = estimate_position(triangle, [make_rstd_record(j, m, 0.0) for j, m in zip((2, 3), meas)])
        assert euclidean_distance(raw.position, ue) > euclidean_distance(cal.position, ue)
