"""The limit evolution: vertical plateau dynamics with collisions.

Plateau heights obey a system of ``k + 1`` ordinary differential
equations driven by the reciprocals of the gaps between neighboring
heights.  Gaps vanish like a square root in finite time; when the
smallest gap drops to ``eps_collide`` the collision time is refined by
bisection, all qualifying adjacent plateaus merge into their
length-weighted average (iterated, so cascades and simultaneous
collisions collapse in one event), and the evolution restarts on the
reduced system.  The run ends when a horizon is reached or a single
plateau remains.

Integration is adaptive RK4 with step-doubling error control, a step
ceiling of ``0.1 * (min gap)^2`` near collisions, and forced landings on
the global sampling grid.  Every accepted step is stored together with
its derivative, and states between nodes are cubic Hermite interpolants;
sampling-grid times are always exact nodes.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .errors import ZeroGapError
from .grid import PlateauFunction
from ._timegrid import time_grid

__all__ = [
    "LimitOptions",
    "LimitSegment",
    "CollisionEvent",
    "LimitTrajectory",
    "plateau_rhs",
    "integrate_limit",
    "evaluate_limit",
    "limit_lifespan",
]

_EPS = np.finfo(np.float64).eps

# collisions closer in time than this window (scaled by 1 + |t|) are one
# event: a simultaneous multi-plateau collision is dynamically unstable, so
# roundoff resolves it into a micro-cascade that exact arithmetic would not
_COALESCE_WINDOW = 1e-7


@dataclass(frozen=True)
class LimitOptions:
    rtol: float = 1e-10
    eps_collide: float = 1e-8
    sample_dt: float = 1e-3

    def __post_init__(self):
        if self.rtol <= 0.0 or self.eps_collide <= 0.0 or self.sample_dt <= 0.0:
            raise ValueError("rtol, eps_collide and sample_dt must be positive")


@dataclass(frozen=True)
class LimitSegment:
    """One smooth stretch of the evolution between collisions."""

    t_start: float
    t_end: float
    jumps: np.ndarray
    times: np.ndarray      # accepted-step nodes, sampling grid included
    heights: np.ndarray    # shape (nodes, k + 1)
    derivs: np.ndarray     # height time-derivatives at the nodes


@dataclass(frozen=True)
class CollisionEvent:
    time: float
    merged_groups: tuple[tuple[int, ...], ...]  # pre-collision plateau indices
    new_heights: tuple[float, ...]


@dataclass(frozen=True)
class LimitTrajectory:
    initial: PlateauFunction
    segments: tuple[LimitSegment, ...]
    collisions: tuple[CollisionEvent, ...]
    final_constant: float
    completed: bool
    t_end: float


def _rhs(a: np.ndarray, lens: np.ndarray) -> np.ndarray:
    r = 1.0 / np.diff(a)
    out = np.empty_like(a)
    out[0] = r[0] / lens[0]
    out[-1] = -r[-1] / lens[-1]
    if a.shape[0] > 2:
        out[1:-1] = np.diff(r) / lens[1:-1]
    return out


def plateau_rhs(p: PlateauFunction) -> np.ndarray:
    """Time derivatives of the ``k + 1`` plateau heights.

    The length-weighted sum of the returned rates is zero (the mean is
    conserved).  Raises :class:`ZeroGapError` when two neighboring
    heights coincide; collisions are the integrator's job.
    """
    if p.k < 1:
        raise ValueError("the plateau system needs at least one jump")
    if np.any(np.diff(p.heights) == 0.0):
        raise ZeroGapError("adjacent plateau heights coincide")
    return _rhs(p.heights.astype(np.float64), p.lengths)


def _rk4(a: np.ndarray, lens: np.ndarray, dt: float) -> np.ndarray:
    k1 = _rhs(a, lens)
    k2 = _rhs(a + 0.5 * dt * k1, lens)
    k3 = _rhs(a + 0.5 * dt * k2, lens)
    k4 = _rhs(a + dt * k3, lens)
    return a + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _valid(a: np.ndarray, signs: np.ndarray) -> bool:
    if not np.all(np.isfinite(a)):
        return False
    g = np.diff(a)
    return bool(np.all(np.sign(g) == signs))


class _Collision(Exception):
    """Internal control flow: a collision was located at (time, state)."""

    def __init__(self, t: float, a: np.ndarray):
        self.t = t
        self.a = a


def _bisect_collision(a_prev: np.ndarray, lens: np.ndarray, dt_acc: float,
                      eps: float, signs: np.ndarray) -> tuple[float, np.ndarray]:
    """Earliest partial-step size at which the smallest gap reaches ``eps``."""

    def past(state: np.ndarray) -> bool:
        if not _valid(state, signs):
            return True
        return float(np.abs(np.diff(state)).min()) <= eps

    lo, hi = 0.0, dt_acc
    best = _rk4(a_prev, lens, dt_acc)
    for _ in range(80):
        if hi - lo <= max(1e-16, 4.0 * _EPS * (abs(lo) + 1.0)):
            break
        mid = 0.5 * (lo + hi)
        state = _rk4(a_prev, lens, mid)
        if past(state):
            hi, best = mid, state
        else:
            lo = mid
    if not _valid(best, signs):
        state_lo = _rk4(a_prev, lens, lo) if lo > 0.0 else a_prev.copy()
        if _valid(state_lo, signs):
            return hi, state_lo
    return hi, best


def _merge(a: np.ndarray, lens: np.ndarray, eps: float):
    """Group plateaus across sub-threshold gaps and average them.

    The first pass uses ``max(eps, 2 * min gap)`` so a state stalled just
    above ``eps`` by time-resolution limits still merges; cascades then
    iterate at ``eps`` until all remaining gaps clear it.  Returns the
    partition of original plateau indices, merged heights and lengths.
    """
    parts: list[list[int]] = [[i] for i in range(a.shape[0])]
    heights = list(map(float, a))
    lengths = list(map(float, lens))
    gaps = np.abs(np.diff(heights))
    thresh = max(eps, 2.0 * float(gaps.min()))
    while True:
        merged_any = False
        j = 0
        while j < len(heights) - 1:
            if abs(heights[j + 1] - heights[j]) <= thresh:
                w0, w1 = lengths[j], lengths[j + 1]
                heights[j] = (w0 * heights[j] + w1 * heights[j + 1]) / (w0 + w1)
                lengths[j] = w0 + w1
                parts[j] = parts[j] + parts[j + 1]
                del heights[j + 1], lengths[j + 1], parts[j + 1]
                merged_any = True
            else:
                j += 1
        if not merged_any:
            break
        thresh = eps
    return parts, np.asarray(heights), np.asarray(lengths)


def _integrate_segment(t0: float, a0: np.ndarray, lens: np.ndarray,
                       t_max: float, grid: np.ndarray, opts: LimitOptions):
    """Integrate one smooth segment.

    Returns ``(times, heights, derivs, collision)`` where ``collision``
    is ``None`` when ``t_max`` was reached, else the ``(t, state)`` pair
    located at the collision.
    """
    signs = np.sign(np.diff(a0))
    if np.any(signs == 0.0):
        raise ZeroGapError("segment starts with a zero plateau gap")
    ts = [t0]
    rows = [a0.copy()]
    ders = [_rhs(a0, lens)]
    t = t0
    a = a0.copy()
    collision = None
    dt = opts.sample_dt

    def min_gap(x: np.ndarray) -> float:
        return float(np.abs(np.diff(x)).min())

    while t < t_max:
        floor = 32.0 * _EPS * max(1.0, abs(t))
        gi = bisect_right(grid, t + floor)
        forced = float(grid[gi]) if gi < grid.shape[0] else t_max
        forced = min(forced, t_max)
        cap = min(0.1 * min_gap(a) ** 2, forced - t)
        if cap < floor:
            if forced - t < floor and 0.1 * min_gap(a) ** 2 >= floor:
                t = forced  # absorb a grid point closer than time resolution
                continue
            collision = (t, a)
            break
        dt_try = min(dt, cap)
        full = _rk4(a, lens, dt_try)
        half = _rk4(_rk4(a, lens, 0.5 * dt_try), lens, 0.5 * dt_try)
        if not (_valid(full, signs) and _valid(half, signs)):
            dt = 0.5 * dt_try
            if dt < floor:
                collision = (t, a)
                break
            continue
        err = float(np.abs(full - half).max())
        tol = opts.rtol * (1.0 + float(np.abs(a).max()))
        if err > tol:
            dt = dt_try * max(0.2, 0.9 * (tol / err) ** 0.2)
            if dt < floor:
                collision = (t, a)
                break
            continue
        t_new = forced if dt_try == forced - t else t + dt_try
        a_prev = a
        a = half
        if min_gap(a) <= opts.eps_collide:
            s_star, a_star = _bisect_collision(a_prev, lens, dt_try,
                                               opts.eps_collide, signs)
            collision = (t + s_star, a_star)
            break
        ts.append(t_new)
        rows.append(a.copy())
        ders.append(_rhs(a, lens))
        t = t_new
        grow = 5.0 if err == 0.0 else min(5.0, 0.9 * (tol / err) ** 0.2)
        dt = dt_try * max(grow, 1.0)

    if collision is not None:
        tc, ac = collision
        if not ts or tc > ts[-1]:
            ts.append(tc)
            rows.append(ac.copy())
            ders.append(np.zeros_like(ac))  # rhs is singular at the collision
    return (np.asarray(ts), np.vstack(rows), np.vstack(ders), collision)


def integrate_limit(p0: PlateauFunction, T: float,
                    opts: LimitOptions | None = None) -> LimitTrajectory:
    """Evolve ``p0`` up to time ``T`` or until a single plateau remains."""
    if opts is None:
        opts = LimitOptions()
    if not (T > 0.0):
        raise ValueError(f"T must be positive, got {T}")

    grid = time_grid(T, opts.sample_dt)
    segments: list[LimitSegment] = []
    collisions: list[CollisionEvent] = []

    if p0.k == 0:
        c = float(p0.heights[0])
        times = np.array([0.0, T])
        heights = np.full((2, 1), c)
        segments.append(LimitSegment(0.0, T, p0.jumps.copy(), times, heights,
                                     np.zeros_like(heights)))
        return LimitTrajectory(p0, tuple(segments), (), c, True, T)

    t = 0.0
    jumps = np.asarray(p0.jumps, dtype=np.float64).copy()
    heights = np.asarray(p0.heights, dtype=np.float64).copy()
    completed = False
    last_parts: list[list[int]] | None = None  # partition behind collisions[-1]
    while t < T and jumps.shape[0] > 0:
        lens = np.diff(np.concatenate(([0.0], jumps, [1.0])))
        ts, rows, ders, collision = _integrate_segment(t, heights, lens, T, grid, opts)
        segments.append(LimitSegment(t, float(ts[-1]), jumps.copy(), ts, rows, ders))
        if collision is None:
            t = T
            break
        tc, ac = collision
        parts, new_heights, _ = _merge(ac, lens, opts.eps_collide)
        # jump j sits between plateaus j and j+1; it disappears when both
        # merged into one group (groups are contiguous index runs)
        removed = {a for g in parts for a in g[:-1]}
        event_parts = parts
        event_time = float(tc)
        if collisions and tc - collisions[-1].time <= \
                _COALESCE_WINDOW * (1.0 + abs(tc)):
            # continuation of a simultaneous collision resolved as a
            # micro-cascade: compose partitions so the groups refer to the
            # plateau indices before the whole event
            assert last_parts is not None
            event_parts = [[i for r in g for i in last_parts[r]] for g in parts]
            event_time = collisions[-1].time
            collisions.pop()
        groups = tuple(tuple(g) for g in event_parts if len(g) > 1)
        group_heights = tuple(float(new_heights[i])
                              for i, g in enumerate(event_parts) if len(g) > 1)
        collisions.append(CollisionEvent(time=event_time, merged_groups=groups,
                                         new_heights=group_heights))
        last_parts = event_parts
        jumps = jumps[[j for j in range(jumps.shape[0]) if j not in removed]]
        heights = new_heights
        t = float(tc)
        if jumps.shape[0] == 0:
            completed = True
            break

    final_constant = float(heights[0]) if completed else p0.mean()
    return LimitTrajectory(p0, tuple(segments), tuple(collisions),
                           final_constant, completed, t if completed else T)


def _hermite(seg: LimitSegment, t: float) -> np.ndarray:
    idx = int(np.searchsorted(seg.times, t, side="right")) - 1
    idx = min(max(idx, 0), seg.times.shape[0] - 2)
    t0, t1 = seg.times[idx], seg.times[idx + 1]
    h = t1 - t0
    if h <= 0.0:
        return seg.heights[idx].copy()
    x = (t - t0) / h
    if x <= 0.0:
        return seg.heights[idx].copy()
    if x >= 1.0:
        return seg.heights[idx + 1].copy()
    a0, a1 = seg.heights[idx], seg.heights[idx + 1]
    d0, d1 = seg.derivs[idx], seg.derivs[idx + 1]
    x2, x3 = x * x, x * x * x
    out = ((2 * x3 - 3 * x2 + 1) * a0 + (x3 - 2 * x2 + x) * h * d0
           + (-2 * x3 + 3 * x2) * a1 + (x3 - x2) * h * d1)
    # collision-adjacent safeguard: interpolation must not close a gap
    segsigns = np.sign(np.diff(a0))
    if np.any(np.sign(np.diff(out)) != segsigns):
        out = (a0 if x < 0.5 else a1).copy()
    return out


def evaluate_limit(traj: LimitTrajectory, t: float) -> PlateauFunction:
    """The piecewise-constant state at time ``t``.

    At a collision time the post-merge state is returned (the two sides
    agree up to the collision threshold).  Past the computed horizon the
    final constant is returned for completed runs.
    """
    if t < 0.0:
        raise ValueError(f"t must be nonnegative, got {t}")
    if t > traj.t_end:
        if traj.completed:
            return PlateauFunction(np.empty(0), np.array([traj.final_constant]))
        if t - traj.t_end <= 1e-10 * (1.0 + traj.t_end):
            t = traj.t_end
        else:
            raise ValueError(f"t={t} is beyond the computed horizon {traj.t_end}")
    starts = [s.t_start for s in traj.segments]
    idx = bisect_right(starts, t) - 1
    idx = max(idx, 0)
    seg = traj.segments[idx]
    vals = _hermite(seg, min(t, seg.t_end))
    return PlateauFunction(seg.jumps.copy(), vals)


def limit_lifespan(p0: PlateauFunction,
                   opts: LimitOptions | None = None) -> float:
    """Time of the first collision starting from ``p0``.

    The search horizon is the a-priori lifespan bound
    ``max|heights| * sum|jump heights|`` (the total jump mass decreases
    at rate at least ``1/max|u0|``).
    """
    if p0.k < 1:
        raise ValueError("lifespan requires at least one jump")
    bound = float(np.abs(p0.heights).max() * np.abs(p0.jump_heights()).sum())
    traj = integrate_limit(p0, 1.05 * bound + 0.1, opts)
    if not traj.collisions:
        raise RuntimeError(
            "no collision found within the a-priori lifespan bound; "
            "this contradicts the finite-lifespan estimate"
        )
    return traj.collisions[0].time
