"""
Time-1 Skorokhod map of the orthant for linear input paths.

S(x, theta) is the value at t=1 of the constrained version of x + theta*t.
The constrained path is piecewise linear; it is built segment by segment,
solving an LCP on the current set of active faces at every new contact.
"""
from typing import List, NamedTuple, Sequence, Tuple
import logging

import numpy as np

from rbm_stationary.exceptions import (
    AdmissibilityViolated,
    LcpError,
    OutsideDomain,
)
from rbm_stationary.lcp import solve_lcp
from rbm_stationary.models.config import SkorokhodConfig
from rbm_stationary.numerics import Matrix, Vector

__all__ = [
    "ReflectionBreakdown",
    "Segment",
    "SkorokhodConfig",
    "active_set",
    "reflect",
    "reflect_path_check",
]

logger = logging.getLogger(__name__)

SNAP_TOL = 1e-14
# two faces reached within this relative time are joined in one event
EVENT_RTOL = 1e-12


class Segment(NamedTuple):
    duration: float
    start: Vector
    velocity: Vector
    push_rate: Vector


class ReflectionBreakdown(NamedTuple):
    endpoint: Vector
    face_push: Vector
    segments: Tuple[Segment, ...]
    truncated: bool
    z_end: Vector


def active_set(x: Vector, tol: float) -> Tuple[int, ...]:
    x = np.asarray(x, dtype=float)
    if np.any(x < -tol):
        raise OutsideDomain(f"Point {x.tolist()} lies outside the orthant (tolerance {tol})")
    return tuple(int(j) for j in np.flatnonzero(x <= tol))


def reflect(x: Vector, theta: Vector, R: Matrix, cfg: SkorokhodConfig) -> ReflectionBreakdown:
    x = np.asarray(x, dtype=float)
    theta = np.asarray(theta, dtype=float)
    R = np.asarray(R, dtype=float)
    m = x.shape[0]
    tol = cfg.active_tol
    active = active_set(x, tol)
    z_end = x + theta
    zeros = np.zeros(m)

    if not active and np.all(z_end > 0.0):
        # the straight segment stays in the open orthant
        segment = Segment(1.0, x.copy(), theta.copy(), zeros)
        return ReflectionBreakdown(z_end, zeros.copy(), (segment,), False, z_end)

    point = x.copy()
    point[list(active)] = 0.0
    face_push = np.zeros(m)
    segments: List[Segment] = []
    remaining = 1.0

    for _ in range(cfg.events_for(m)):
        J = np.flatnonzero(point <= tol)
        point[J] = 0.0
        push_rate = np.zeros(m)
        velocity = theta.copy()
        if J.size:
            try:
                solution = solve_lcp(R[np.ix_(J, J)], theta[J])
            except LcpError as e:
                raise AdmissibilityViolated(f"LCP on faces {J.tolist()} failed: {e}") from e
            push_rate[J] = solution.u
            velocity = theta + R[:, J] @ solution.u
            velocity[J] = solution.v

        # coordinates leaving a face cannot come back within a segment
        falling = np.flatnonzero((point > tol) & (velocity < 0.0))
        if falling.size:
            hit_times = point[falling] / -velocity[falling]
            tau = float(np.min(hit_times))
        else:
            tau = np.inf

        if tau >= remaining:
            segments.append(Segment(remaining, point.copy(), velocity, push_rate))
            face_push += remaining * push_rate
            point = point + remaining * velocity
            remaining = 0.0
            break

        segments.append(Segment(tau, point.copy(), velocity, push_rate))
        face_push += tau * push_rate
        point = point + tau * velocity
        point[falling[hit_times <= tau * (1.0 + EVENT_RTOL)]] = 0.0
        remaining -= tau
    else:
        logger.debug(f"Chattering: {len(segments)} segments covered {1.0 - remaining:.6g} of the step")
        return ReflectionBreakdown(zeros, face_push, tuple(segments), True, z_end)

    endpoint = np.where(np.abs(point) <= SNAP_TOL, 0.0, point)
    endpoint = np.maximum(endpoint, 0.0)
    return ReflectionBreakdown(endpoint, face_push, tuple(segments), False, z_end)


def reflect_path_check(x: Vector, theta: Vector, R: Matrix, cfg: SkorokhodConfig,
                       times: Sequence[float]) -> List[Vector]:
    """
    Evaluates the constrained path at the given times in [0, 1]. Time 1
    reproduces reflect(...).endpoint; on truncated steps times beyond the
    covered time return the origin.
    """
    breakdown = reflect(x, theta, R, cfg)
    starts = np.cumsum([0.0] + [segment.duration for segment in breakdown.segments])
    points = []
    for t in times:
        if not 0.0 <= t <= 1.0:
            raise ValueError(f"Path time {t} outside [0, 1]")
        if t == 1.0 or t >= starts[-1]:
            points.append(breakdown.endpoint.copy())
            continue
        index = int(np.searchsorted(starts, t, side="right")) - 1
        segment = breakdown.segments[index]
        point = segment.start + (t - starts[index]) * segment.velocity
        points.append(np.maximum(np.where(np.abs(point) <= SNAP_TOL, 0.0, point), 0.0))
    return points
