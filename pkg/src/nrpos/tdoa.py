"""RSTD correction, hyperbola geometry and least-squares TDOA positioning."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    CoincidentFoci,
    DegenerateGeometry,
    InsufficientData,
    InvalidHyperbola,
    LengthMismatch,
    NoConvergenceWarning,
)
from .model import SPEED_OF_LIGHT, GnbDeployment, Position2D, euclidean_distance


@dataclass(frozen=True)
class RstdRecord:
    gnb_id: int
    rstd_s: float
    corrected_rstd_s: float

    def __post_init__(self):
        if self.gnb_id == 1:
            raise ValueError("RSTD records are for non-reference gNBs only")


@dataclass(frozen=True)
class HyperbolaParams:
    """Branch of ``d(p, focus_j) - d(p, focus_ref) = 2a``.

    ``a`` is signed: positive when the UE is nearer the reference gNB.
    """

    a: float
    b: float
    theta: float
    center: Position2D
    d: float
    focus_ref: Position2D
    focus_j: Position2D


@dataclass(frozen=True)
class PositionEstimate:
    position: Position2D
    residual_norm: float
    iterations: int
    converged: bool


def correct_rstd(measured: float, delta_hat_j: float) -> float:
    return measured - delta_hat_j


def make_rstd_record(gnb_id: int, measured: float, delta_hat_j: float) -> RstdRecord:
    return RstdRecord(gnb_id, measured, correct_rstd(measured, delta_hat_j))


def hyperbola_from_rstd(gnb_ref: Position2D, gnb_j: Position2D, corrected_rstd_s: float) -> HyperbolaParams:
    dx = gnb_j.x - gnb_ref.x
    dy = gnb_j.y - gnb_ref.y
    d = math.hypot(dx, dy) / 2
    if d == 0:
        raise CoincidentFoci("reference and non-reference gNB coincide")
    a = SPEED_OF_LIGHT / 2 * corrected_rstd_s
    if a * a >= d * d:
        raise InvalidHyperbola(f"|a| = {abs(a):.3f} m is not below d = {d:.3f} m")
    # atan2 keeps the local +x axis pointing from the reference gNB to gNB j
    theta = math.atan2(dy, dx)
    center = Position2D((gnb_j.x + gnb_ref.x) / 2, (gnb_j.y + gnb_ref.y) / 2)
    return HyperbolaParams(a, math.sqrt(d * d - a * a), theta, center, d, gnb_ref, gnb_j)


def hyperbola_points(params: HyperbolaParams, t_range: tuple[float, float] = (-2.0, 2.0), n: int = 101) -> list[Position2D]:
    """Sample the branch at ``n`` evenly spaced parameters ``t``.

    Local coordinates are ``(-a cosh t, b sinh t)``, rotated by ``theta``
    about ``center``; for ``a > 0`` this is the branch on the reference side.
    """
    if n < 2:
        raise ValueError("need at least 2 points")
    if params.a * params.a >= params.d * params.d:
        raise InvalidHyperbola("invalid hyperbola parameters")
    t = np.linspace(t_range[0], t_range[1], n)
    u = -params.a * np.cosh(t)
    v = params.b * np.sinh(t)
    c, s = math.cos(params.theta), math.sin(params.theta)
    xs = c * u - s * v + params.center.x
    ys = s * u + c * v + params.center.y
    return [Position2D(x, y) for x, y in zip(xs, ys)]


def _range_diffs(anchors: np.ndarray, p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Model ``d(anchor_j, p) - d(anchor_ref, p)`` for j >= 1 and its Jacobian."""
    diff = p - anchors
    dist = np.linalg.norm(diff, axis=-1)
    model = dist[1:] - dist[0]
    unit = diff / np.where(dist == 0, 1.0, dist)[:, None]
    jac = unit[1:] - unit[0]
    return model, jac


def _search_box(anchors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lo = anchors.min(axis=0)
    hi = anchors.max(axis=0)
    span = hi - lo
    return lo - 0.25 * span, hi + 0.25 * span


def _grid_candidates(anchors: np.ndarray, range_diffs: np.ndarray, k: int = 8) -> np.ndarray:
    """The ``k`` lowest-cost points of the coarse grid, best first."""
    lo, hi = _search_box(anchors)
    pitch = np.hypot(*(hi - lo)) / 20
    xs = np.arange(lo[0], hi[0] + pitch / 2, pitch)
    ys = np.arange(lo[1], hi[1] + pitch / 2, pitch)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    dist = np.linalg.norm(pts[:, None, :] - anchors[None, :, :], axis=-1)
    cost = np.sum((range_diffs[None, :] - (dist[:, 1:] - dist[:, :1])) ** 2, axis=1)
    return pts[np.argsort(cost, kind="stable")[:k]]


def _gauss_newton(anchors, rd, p, max_iter, tol):
    model, jac = _range_diffs(anchors, p)
    r = rd - model
    cost = float(r @ r)
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        step, *_ = np.linalg.lstsq(jac, r, rcond=None)
        lam = 1.0
        while True:
            cand = p + lam * step
            m_c, j_c = _range_diffs(anchors, cand)
            r_c = rd - m_c
            c_c = float(r_c @ r_c)
            if c_c <= cost or lam < 1e-10:
                break
            lam *= 0.5
        moved = lam * float(np.linalg.norm(step))
        if c_c <= cost:
            p, jac, r, cost = cand, j_c, r_c, c_c
        if moved < tol:
            converged = True
            break
    return p, math.sqrt(cost), it, converged


def solve_tdoa(
    anchors,
    range_diffs,
    initial_guess=None,
    max_iter: int = 100,
    tol: float = 1e-6,
) -> tuple[np.ndarray, float, int, bool]:
    """Damped Gauss-Newton on range-difference residuals.

    ``anchors`` is ``(n, 2)`` with the reference first; ``range_diffs`` holds
    ``c * rstd'`` for anchors ``1..n-1``. Returns
    ``(position, residual_norm, iterations, converged)``.
    """
    anchors = np.asarray(anchors, dtype=float)
    rd = np.asarray(range_diffs, dtype=float)
    if initial_guess is not None:
        return _gauss_newton(anchors, rd, np.asarray(initial_guess, dtype=float).copy(), max_iter, tol)

    # Two hyperbolas can cross twice with zero residual. Among near-equal
    # residuals prefer a solution inside the gNB hull, then inside the box.
    lo, hi = _search_box(anchors)
    hull = _convex_hull(anchors)
    sols = []
    for start in _grid_candidates(anchors, rd):
        sol = _gauss_newton(anchors, rd, start, max_iter, tol)
        in_hull = _inside_hull(hull, sol[0])
        in_box = bool(np.all(sol[0] >= lo) and np.all(sol[0] <= hi))
        sols.append((not in_hull, not in_box, sol))
        if in_hull:
            break
    best_res = min(s[2][1] for s in sols)
    tied = [s for s in sols if s[2][1] <= best_res + 1e-3]
    return min(tied, key=lambda s: (s[0], s[1], s[2][1]))[2]


def _convex_hull(points: np.ndarray) -> np.ndarray:
    """Counter-clockwise hull vertices (Andrew's monotone chain)."""
    pts = sorted(map(tuple, points))
    if len(pts) < 3:
        return np.array(pts)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def _inside_hull(hull: np.ndarray, p: np.ndarray) -> bool:
    if len(hull) < 3:
        return False
    a = hull
    b = np.roll(hull, -1, axis=0)
    cross = (b[:, 0] - a[:, 0]) * (p[1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (p[0] - a[:, 0])
    return bool(np.all(cross >= 0))


def _collinear(points: np.ndarray) -> bool:
    centred = points - points.mean(axis=0)
    s = np.linalg.svd(centred, compute_uv=False)
    return s[1] <= 1e-9 * max(s[0], 1.0)


def estimate_position(
    deployment: GnbDeployment,
    corrected_rstds: Sequence[RstdRecord],
    initial_guess: Position2D | None = None,
    max_iter: int = 100,
    tol: float = 1e-6,
) -> PositionEstimate:
    """Least-squares intersection of the RSTD hyperbolas.

    Minimises ``sum_j (c * rstd'_j - (d(gnb_j, p) - d(gnb_1, p)))^2``. Without
    an initial guess the best point of a coarse grid over the gNB bounding
    box (inflated by 50 %, pitch 1/20 of its diagonal) seeds the iteration.
    """
    if deployment.n_gnbs < 3:
        raise InsufficientData("need at least 3 gNBs")
    recs = sorted(corrected_rstds, key=lambda r: r.gnb_id)
    if len(recs) < 2:
        raise InsufficientData(f"need RSTDs from at least 2 non-reference gNBs, got {len(recs)}")
    ids = [1] + [r.gnb_id for r in recs]
    anchors = np.array([[deployment.position(j).x, deployment.position(j).y] for j in ids])
    rd = SPEED_OF_LIGHT * np.array([r.corrected_rstd_s for r in recs])
    guess = None if initial_guess is None else initial_guess.as_array()

    p, res, it, converged = solve_tdoa(anchors, rd, guess, max_iter=max_iter, tol=tol)
    if _collinear(anchors):
        _, jac = _range_diffs(anchors, p)
        if np.linalg.matrix_rank(jac.T @ jac) < 2:
            raise DegenerateGeometry("collinear gNBs with a rank-deficient normal matrix at the solution")
    if not converged:
        warnings.warn(f"TDOA solver stopped after {it} iterations", NoConvergenceWarning, stacklevel=2)
    return PositionEstimate(Position2D(float(p[0]), float(p[1])), res, it, converged)


def rmse(estimates: Sequence[Position2D], truths: Sequence[Position2D]) -> float:
    if len(estimates) != len(truths):
        raise LengthMismatch(f"{len(estimates)} estimates vs {len(truths)} truths")
    if not estimates:
        raise LengthMismatch("rmse of an empty list")
    sq = [euclidean_distance(e, t) ** 2 for e, t in zip(estimates, truths)]
    return math.sqrt(sum(sq) / len(sq))
