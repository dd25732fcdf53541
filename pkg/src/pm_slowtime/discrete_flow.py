"""Time integration of the rescaled semidiscrete flow.

The flow is ``u' = -grad`` of the renormalized energy, integrated with
fixed-step explicit RK4.  The linearization of the right-hand side around
a flat state is ``n^3`` times the three-point second-difference stencil,
whose spectrum fills ``[-4 n^3, 0]``; explicit RK4 is stable on the real
axis up to ``|z| < 2.785``, so the step is ``dt = theta / n^3`` with
``theta <= 0.69`` (default 0.6).  Within each sampling interval the step
is shrunk slightly so that samples land on exact step boundaries, which
keeps runs bit-reproducible.

Cells that start supercritical are watched at every step; when one
crosses back to ``|u(x+1/n) - u(x)| <= 1/n`` (ties count as subcritical)
the crossing time is refined by bisection on partial RK4 steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .energy import _gradient_values, pm_energy
from .errors import InvariantViolationError, NumericsError
from .grid import GridFunction, supercritical_cells
from ._timegrid import time_grid

__all__ = [
    "IntegratorOptions",
    "ExtinctionEvent",
    "Monitors",
    "DiscreteTrajectory",
    "rhs",
    "integrate_discrete",
    "first_extinction",
]

# new supercritical cells are provably impossible; exceeding this margin
# above the critical quotient flags an integrator accuracy bug
_CREATION_TOL = 1e-7

_THETA_MAX = 0.69  # RK4 real-axis stability: theta * 4 < 2.785


@dataclass(frozen=True)
class IntegratorOptions:
    theta: float = 0.6
    sample_dt: float = 0.01
    bisect_tol: float = 2.0 ** -20

    def __post_init__(self):
        if not (0.0 < self.theta <= _THETA_MAX):
            raise ValueError(
                f"theta must lie in (0, {_THETA_MAX}] for a stable explicit step, "
                f"got {self.theta}"
            )
        if self.sample_dt <= 0.0:
            raise ValueError(f"sample_dt must be positive, got {self.sample_dt}")
        if not (0.0 < self.bisect_tol < 1.0):
            raise ValueError(f"bisect_tol must lie in (0, 1), got {self.bisect_tol}")


@dataclass(frozen=True)
class ExtinctionEvent:
    """A watched supercritical cell dropping to the subcritical range."""

    time: float
    cell: int
    remaining_supercritical: frozenset[int]


@dataclass(frozen=True)
class Monitors:
    """Per-sample monitored quantities (arrays over sample times)."""

    k_energy: np.ndarray
    pm_energy: np.ndarray
    linf: np.ndarray
    tv: np.ndarray
    mean: np.ndarray
    slope: np.ndarray
    sq: np.ndarray
    jump_heights: np.ndarray  # shape (samples, tracked jumps)


@dataclass(frozen=True)
class DiscreteTrajectory:
    n: int
    k0: int
    tracked_cells: tuple[int, ...]
    sample_times: np.ndarray
    states: np.ndarray  # shape (samples, n)
    monitors: Monitors
    extinction_events: tuple[ExtinctionEvent, ...]
    options: IntegratorOptions

    def state(self, j: int) -> GridFunction:
        return GridFunction(self.n, self.states[j])

    def sample_index(self, t: float) -> int:
        """Index of the sample time closest to ``t``."""
        return int(np.argmin(np.abs(self.sample_times - t)))


def rhs(u: GridFunction) -> GridFunction:
    """Flow right-hand side: the negated energy gradient."""
    return GridFunction(u.n, -_gradient_values(u.values, u.n))


@njit(cache=True, nogil=True)
def _rhs_into(u, n, out):
    m = u.shape[0]
    nn = float(n) * float(n)
    prev = 0.0
    for i in range(m - 1):
        q = n * (u[i + 1] - u[i])
        h = q / (1.0 + q * q)
        out[i] = nn * (h - prev)
        prev = h
    out[m - 1] = -nn * prev


@njit(cache=True, nogil=True)
def _rk4_single(u, n, dt):
    m = u.shape[0]
    k1 = np.empty(m)
    k2 = np.empty(m)
    k3 = np.empty(m)
    k4 = np.empty(m)
    tmp = np.empty(m)
    out = np.empty(m)
    _rhs_into(u, n, k1)
    for i in range(m):
        tmp[i] = u[i] + 0.5 * dt * k1[i]
    _rhs_into(tmp, n, k2)
    for i in range(m):
        tmp[i] = u[i] + 0.5 * dt * k2[i]
    _rhs_into(tmp, n, k3)
    for i in range(m):
        tmp[i] = u[i] + dt * k3[i]
    _rhs_into(tmp, n, k4)
    for i in range(m):
        out[i] = u[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    return out


@njit(cache=True, nogil=True)
def _advance(u, u_prev, n, dt, max_steps, watch):
    """March RK4 steps in place; stop after a watched cell turns subcritical.

    Returns ``(steps_done, crossed)``; on a crossing, ``u`` holds the
    post-step state and ``u_prev`` the state at the start of that step.
    """
    m = u.shape[0]
    k1 = np.empty(m)
    k2 = np.empty(m)
    k3 = np.empty(m)
    k4 = np.empty(m)
    tmp = np.empty(m)
    for s in range(max_steps):
        for i in range(m):
            u_prev[i] = u[i]
        _rhs_into(u, n, k1)
        for i in range(m):
            tmp[i] = u[i] + 0.5 * dt * k1[i]
        _rhs_into(tmp, n, k2)
        for i in range(m):
            tmp[i] = u[i] + 0.5 * dt * k2[i]
        _rhs_into(tmp, n, k3)
        for i in range(m):
            tmp[i] = u[i] + dt * k3[i]
        _rhs_into(tmp, n, k4)
        for i in range(m):
            u[i] = u[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        for j in range(watch.shape[0]):
            w = watch[j]
            if abs(n * (u[w + 1] - u[w])) <= 1.0:
                return s + 1, True
    return max_steps, False


def _subcritical_watch(values: np.ndarray, n: int, watch: np.ndarray) -> list[int]:
    """0-based diff indices from ``watch`` that are subcritical in ``values``."""
    return [int(w) for w in watch if abs(n * (values[w + 1] - values[w])) <= 1.0]


def _bisect_crossing(u_prev: np.ndarray, n: int, dt: float, watch: np.ndarray,
                     iters: int) -> tuple[float, list[int]]:
    """Earliest partial-step size in ``(0, dt]`` at which a watched cell crosses."""
    lo, hi = 0.0, dt
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        state = _rk4_single(u_prev, n, mid)
        if _subcritical_watch(state, n, watch):
            hi = mid
        else:
            lo = mid
    state = _rk4_single(u_prev, n, hi)
    crossed = _subcritical_watch(state, n, watch)
    if not crossed:
        # the crossing sits in (hi, dt]; fall back to the full step
        crossed = _subcritical_watch(_rk4_single(u_prev, n, dt), n, watch)
        hi = dt
    return hi, crossed


def integrate_discrete(u0: GridFunction, T: float,
                       opts: IntegratorOptions | None = None) -> DiscreteTrajectory:
    """Integrate the flow from ``u0`` over ``[0, T]`` with monitoring.

    The supercritical cells of ``u0`` are tracked; each extinction is
    recorded with its bisection-refined crossing time.  Monitored
    quantities are recorded at every sample time; the renormalization
    count of the monitored energy stays fixed at the initial number of
    tracked cells so that monotonicity is meaningful across extinctions.
    """
    if opts is None:
        opts = IntegratorOptions()
    if not (T > 0.0):
        raise ValueError(f"T must be positive, got {T}")
    n = u0.n
    tracked = tuple(sorted(supercritical_cells(u0)))
    k0 = len(tracked)
    bisect_iters = max(1, math.ceil(-math.log2(opts.bisect_tol)))

    ts = time_grid(T, opts.sample_dt)
    m = ts.shape[0]
    states = np.empty((m, n))
    states[0] = u0.values
    events: list[ExtinctionEvent] = []
    active = list(tracked)

    u = u0.values.copy()
    u_prev = np.empty_like(u)
    n3 = float(n) ** 3
    for j in range(m - 1):
        ta, tb = float(ts[j]), float(ts[j + 1])
        span = tb - ta
        steps = max(1, math.ceil(span * n3 / opts.theta))
        dt = span / steps
        done = 0
        while done < steps:
            watch = np.array([c - 1 for c in active], dtype=np.int64)
            did, crossed = _advance(u, u_prev, n, dt, steps - done, watch)
            done += did
            if not crossed:
                break
            t_step = ta + (done - 1) * dt
            s_star, crossed_idx = _bisect_crossing(u_prev, n, dt, watch, bisect_iters)
            for w in sorted(crossed_idx):
                cell = w + 1
                active.remove(cell)
                events.append(ExtinctionEvent(
                    time=t_step + s_star,
                    cell=cell,
                    remaining_supercritical=frozenset(active),
                ))
        if not np.all(np.isfinite(u)):
            raise NumericsError(
                f"non-finite state at t={tb}; last stable sample at t={ta}",
                last_stable_time=ta,
            )
        _check_no_creation(u, n, active, tb)
        states[j + 1] = u

    monitors = _compute_monitors(states, ts, n, k0, tracked, events)
    return DiscreteTrajectory(
        n=n, k0=k0, tracked_cells=tracked, sample_times=ts, states=states,
        monitors=monitors, extinction_events=tuple(events), options=opts,
    )


def _check_no_creation(u: np.ndarray, n: int, active: list[int], t: float) -> None:
    if n == 1:
        return
    q = np.abs(n * np.diff(u))
    for c in active:
        q[c - 1] = 0.0
    worst = float(q.max()) if q.size else 0.0
    if worst > 1.0 + _CREATION_TOL:
        raise InvariantViolationError(
            f"a non-tracked cell became supercritical (quotient {worst:.6g}) "
            f"at t={t}; supercritical regions cannot grow, so this indicates "
            f"insufficient integrator accuracy"
        )


def _compute_monitors(states: np.ndarray, ts: np.ndarray, n: int, k0: int,
                      tracked: tuple[int, ...],
                      events: list[ExtinctionEvent]) -> Monitors:
    m = states.shape[0]
    logn = math.log(n)
    if n > 1:
        fd = n * np.diff(states, axis=1)
        pm = np.log1p(fd * fd).sum(axis=1) / (2.0 * n)
        tv = np.abs(fd).sum(axis=1) / n
        h = fd / (1.0 + fd * fd)
        grad = -float(n) ** 2 * np.diff(np.pad(h, ((0, 0), (1, 1))), axis=1)
        slope = np.sqrt(np.mean(grad * grad, axis=1))
    else:
        fd = np.zeros((m, 0))
        pm = np.zeros(m)
        tv = np.zeros(m)
        slope = np.zeros(m)
    ke = n * pm - k0 * logn
    linf = np.abs(states).max(axis=1)
    mean = states.mean(axis=1)

    sq = np.empty(m)
    for j in range(m):
        t = ts[j]
        alive = [c for c in tracked
                 if not any(e.cell == c and e.time <= t for e in events)]
        if n == 1:
            sq[j] = 0.0
            continue
        q = np.abs(fd[j]).copy()
        for c in alive:
            q[c - 1] = 0.0
        sq[j] = float(q.max()) if q.size else 0.0

    if k0:
        cells = np.array(tracked, dtype=np.int64)
        jh = states[:, cells] - states[:, cells - 1]
    else:
        jh = np.zeros((m, 0))

    return Monitors(k_energy=ke, pm_energy=pm, linf=linf, tv=tv, mean=mean,
                    slope=slope, sq=sq, jump_heights=jh)


def first_extinction(traj: DiscreteTrajectory) -> float | None:
    """Time of the first extinction event, or ``None`` if none occurred."""
    if not traj.extinction_events:
        return None
    return min(e.time for e in traj.extinction_events)
