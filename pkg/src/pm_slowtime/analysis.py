"""Numerical certification: inequality audits, residuals, and convergence probes.

Every audit produces an :class:`AuditReport` carrying both sides of the
inequality, the signed slack, and the tolerance that decided the verdict.
The probes (Gamma gap, slope comparison, global convergence study, well
preparation) return tabular records; they report trends and leave
assertions to their callers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .discrete_flow import (DiscreteTrajectory, IntegratorOptions,
                            first_extinction, integrate_discrete)
from .energy import discrete_slope, k_energy, limit_energy, limit_slope
from .errors import NotPiecewiseSubcriticalError
from .grid import (GridFunction, PlateauFunction, discrete_jump_height,
                   jump_cell, sample_plateau, subcritical_quotient,
                   supercritical_cells)
from .limit_flow import (LimitOptions, LimitTrajectory, evaluate_limit,
                         integrate_limit)

__all__ = [
    "AuditReport",
    "ConvergenceTable",
    "GammaProbeResult",
    "SlopeProbeResult",
    "WellPrepResult",
    "energy_balance_residual",
    "limit_energy_balance",
    "holder_audit",
    "fundamental_estimates_audit",
    "jump_estimate_audit",
    "monotonicity_audit",
    "limit_invariants_audit",
    "gamma_probe",
    "slope_probe",
    "convergence_study",
    "well_preparation_probe",
    "random_subcritical_state",
    "random_plateau_pair",
    "with_extra_jump",
    "l2_distance_grid_plateau",
    "l2_distance_plateaus",
    "sup_distance_off_jump_cells",
]


@dataclass(frozen=True)
class AuditReport:
    """Outcome of one inequality (or identity) check.

    For inequalities the orientation is always ``lhs <= rhs`` and
    ``slack = rhs - lhs``; the check passes iff ``slack >= -tol``.  For
    identity checks ``slack`` is the signed residual and the check passes
    iff ``|slack| <= tol``.
    """

    name: str
    lhs: float
    rhs: float
    slack: float
    tol: float
    passed: bool
    context: dict = field(default_factory=dict)


def _default_tol(lhs: float, rhs: float) -> float:
    return 1e-9 * max(1.0, abs(lhs), abs(rhs))


def _inequality(name: str, lhs: float, rhs: float, context: dict,
                tol: float | None = None) -> AuditReport:
    tol = _default_tol(lhs, rhs) if tol is None else tol
    slack = rhs - lhs
    return AuditReport(name=name, lhs=float(lhs), rhs=float(rhs),
                       slack=float(slack), tol=float(tol),
                       passed=bool(slack >= -tol), context=context)


# ---------------------------------------------------------------------------
# exact comparisons between grid states and plateau states


def l2_distance_grid_plateau(u: GridFunction, p: PlateauFunction) -> float:
    """Exact ``L^2(0,1)`` distance between a grid and a plateau function.

    The squared difference is integrated cell by cell; the at most one
    plateau breakpoint inside a cell splits that cell's contribution.
    """
    n = u.n
    mids = (np.arange(n) + 0.5) / n
    pv = p.heights[np.searchsorted(p.jumps, mids, side="right")]
    err2 = float(np.sum((u.values - pv) ** 2)) / n
    for i, d in enumerate(p.jumps):
        c = jump_cell(d, n)
        xl, xr = (c - 1) / n, c / n
        val = u.values[c - 1]
        base = (val - pv[c - 1]) ** 2 / n
        split = ((val - p.heights[i]) ** 2 * (d - xl)
                 + (val - p.heights[i + 1]) ** 2 * (xr - d))
        err2 += float(split - base)
    return math.sqrt(max(err2, 0.0))


def sup_distance_off_jump_cells(u: GridFunction, p: PlateauFunction) -> float:
    """Max cell-wise distance, excluding the cells containing jumps of ``p``."""
    n = u.n
    mids = (np.arange(n) + 0.5) / n
    pv = p.heights[np.searchsorted(p.jumps, mids, side="right")]
    diff = np.abs(u.values - pv)
    for d in p.jumps:
        diff[jump_cell(d, n) - 1] = 0.0
    return float(diff.max())


def l2_distance_plateaus(p: PlateauFunction, q: PlateauFunction) -> float:
    """Exact ``L^2(0,1)`` distance between two plateau functions."""
    edges = np.unique(np.concatenate(([0.0], p.jumps, q.jumps, [1.0])))
    mids = 0.5 * (edges[:-1] + edges[1:])
    pv = p.heights[np.searchsorted(p.jumps, mids, side="right")]
    qv = q.heights[np.searchsorted(q.jumps, mids, side="right")]
    return math.sqrt(float(np.sum(np.diff(edges) * (pv - qv) ** 2)))


# ---------------------------------------------------------------------------
# audits


def energy_balance_residual(traj: DiscreteTrajectory, s: float, t: float) -> AuditReport:
    """Energy drop versus the integrated squared gradient norm.

    Along the flow the squared speed and the squared slope coincide, so
    the balance reduces to ``G(s) - G(t) = \\int_s^t slope^2``.  The right
    side is trapezoid quadrature on the samples; the tolerance is a
    second-difference estimate of the trapezoid error.
    """
    ts = traj.sample_times
    if not (ts[0] - 1e-12 <= s <= t <= ts[-1] + 1e-12):
        raise ValueError(f"[{s}, {t}] is outside the sampled range "
                         f"[{ts[0]}, {ts[-1]}]")
    i = traj.sample_index(s)
    j = traj.sample_index(t)
    lhs = float(traj.monitors.k_energy[i] - traj.monitors.k_energy[j])
    f = traj.monitors.slope[i:j + 1] ** 2
    tt = ts[i:j + 1]
    rhs = float(np.trapz(f, tt)) if j > i else 0.0
    if j - i >= 2:
        h = float(np.max(np.diff(tt)))
        quad = h / 12.0 * float(np.abs(np.diff(f, 2)).sum())
    else:
        quad = 0.0
    tol = 4.0 * quad + 1e-12 * max(1.0, abs(lhs))
    slack = rhs - lhs
    return AuditReport(name="energy-balance", lhs=lhs, rhs=rhs, slack=float(slack),
                       tol=float(tol), passed=bool(abs(slack) <= tol),
                       context={"n": traj.n, "s": float(ts[i]), "t": float(ts[j]),
                                "sample_dt": float(traj.options.sample_dt)})


def _worst_pair(states: np.ndarray, times: np.ndarray, C: float):
    """Worst (distance - C |dt|^(1/4)) over all pairs of rows.

    ``states`` rows must be scaled so that the euclidean row distance is
    the ``L^2(0,1)`` distance.
    """
    gram = states @ states.T
    sq = np.diag(gram)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * gram, 0.0)
    dist = np.sqrt(d2)
    dt = np.abs(times[:, None] - times[None, :])
    bound = C * dt ** 0.25
    deficit = dist - bound
    np.fill_diagonal(deficit, -np.inf)  # a pair needs two distinct times
    idx = np.unravel_index(np.argmax(deficit), deficit.shape)
    return float(dist[idx]), float(bound[idx]), (int(idx[0]), int(idx[1]))


def holder_audit(traj, k: int, G0: float) -> AuditReport:
    """Uniform 1/4-Hoelder bound over all sample pairs up to extinction.

    ``C = (3k)^(3/4) exp(G0 / (2k))`` where ``G0`` is the renormalized
    energy of the initial state.  For a discrete trajectory the samples
    are restricted to times before the first extinction; for a limit
    trajectory the first segment (collision endpoint included) is used.
    """
    if k <= 0:
        raise ValueError("the Hoelder bound needs k >= 1")
    C = (3.0 * k) ** 0.75 * math.exp(G0 / (2.0 * k))
    if isinstance(traj, DiscreteTrajectory):
        t_h = first_extinction(traj)
        mask = np.ones(traj.sample_times.shape[0], dtype=bool) if t_h is None \
            else traj.sample_times <= t_h
        states = traj.states[mask] / math.sqrt(traj.n)
        times = traj.sample_times[mask]
        ctx = {"kind": "discrete", "n": traj.n, "t_max": float(times[-1])}
    elif isinstance(traj, LimitTrajectory):
        seg = traj.segments[0]
        w = np.sqrt(np.diff(np.concatenate(([0.0], seg.jumps, [1.0]))))
        states = seg.heights * w[None, :]
        times = seg.times
        ctx = {"kind": "limit", "t_max": float(times[-1])}
    else:
        raise TypeError(f"unsupported trajectory type {type(traj)!r}")
    lhs, rhs, (i, j) = _worst_pair(states, times, C)
    ctx.update({"k": k, "holder_constant": C,
                "worst_pair": (float(times[i]), float(times[j]))})
    return _inequality("holder-quarter", lhs, rhs, ctx)


def fundamental_estimates_audit(u: GridFunction, jumps: Sequence[float],
                                k: int) -> list[AuditReport]:
    """The five pointwise estimates tying energy, slope, jumps, and SQ.

    ``u`` must be piecewise subcritical w.r.t. ``jumps`` and ``k`` must
    equal the number of jumps.
    """
    d = np.sort(np.asarray(list(jumps), dtype=np.float64))
    if k != d.shape[0]:
        raise ValueError(f"k={k} must equal the number of jumps {d.shape[0]}")
    if k == 0:
        raise ValueError("the estimates require at least one jump")
    sq = subcritical_quotient(u, d)  # validates the subcriticality precondition
    n = u.n
    jn = np.array([discrete_jump_height(u, x) for x in d])
    min_j = float(np.abs(jn).min())
    g = float(k_energy(u, k).value)
    slope = discrete_slope(u)
    ctx = {"n": n, "k": k, "sq": sq, "min_jump": min_j}

    reports = [
        _inequality("energy-vs-min-jump", k * math.log(min_j), g, dict(ctx)),
        _inequality(
            "energy-upper-bound", g,
            0.5 * n * math.log1p(sq * sq)
            + 0.5 * float(np.log(n ** -2.0 + jn * jn).sum()),
            dict(ctx)),
        _inequality("slope-vs-subcritical", n * sq, slope, dict(ctx)),
        _inequality("slope-vs-min-jump", 1.0 / min_j, slope, dict(ctx)),
    ]
    phi = jn / (n ** -2.0 + jn * jn)
    phi_pad = np.concatenate(([0.0], phi, [0.0]))
    d_pad = np.concatenate(([0.0], d, [1.0]))
    lhs5 = float(np.sum(np.diff(phi_pad) ** 2 / (np.diff(d_pad) + 1.0 / n)))
    reports.append(_inequality("slope-vs-jump-profile", lhs5, slope * slope,
                               dict(ctx)))
    return reports


def jump_estimate_audit(v: GridFunction, w: GridFunction,
                        jumps: Sequence[float]) -> list[AuditReport]:
    """Uniform and jump-height control by the ``L^2`` distance.

    Both functions must be piecewise subcritical with all supercritical
    cells among the cells of ``jumps``, and ``n >= 3 / K0`` where ``K0``
    is the smallest interval of the partition induced by ``jumps``.
    """
    if v.n != w.n:
        raise ValueError(f"grid sizes differ: {v.n} != {w.n}")
    n = v.n
    d = np.sort(np.asarray(list(jumps), dtype=np.float64))
    k0 = float(np.diff(np.concatenate(([0.0], d, [1.0]))).min())
    if n < 3.0 / k0:
        raise ValueError(f"n={n} is below 3/K0={3.0 / k0:.6g}")
    cells = frozenset(jump_cell(x, n) for x in d)
    for name, u in (("v", v), ("w", w)):
        extra = supercritical_cells(u) - cells
        if extra:
            raise NotPiecewiseSubcriticalError(
                f"{name} has supercritical cells {sorted(extra)} outside the jump cells")
    diff = v.values - w.values
    l2 = math.sqrt(float(np.mean(diff * diff)))
    linf = float(np.abs(diff).max())
    ctx = {"n": n, "K0": k0, "l2": l2}
    reports = [_inequality("uniform-vs-l2", min(k0, linf), 3.0 * l2 ** (2.0 / 3.0),
                           dict(ctx))]
    for x in d:
        dj = abs(discrete_jump_height(v, x) - discrete_jump_height(w, x))
        c = dict(ctx)
        c["d"] = float(x)
        reports.append(_inequality("jump-height-vs-l2", min(k0, dj),
                                   6.0 * l2 ** (2.0 / 3.0), c))
    return reports


def monotonicity_audit(traj: DiscreteTrajectory) -> list[AuditReport]:
    """Provable monotone quantities along a discrete run, at the samples.

    Renormalized energy, every ``L^p`` norm (p = 1, 2, inf) and the total
    variation are nonincreasing; the mean is conserved; supercritical
    cells can only disappear.  Violations beyond tolerance point at the
    integrator, not the dynamics.
    """
    mon = traj.monitors
    ts = traj.sample_times
    span = float(ts[-1] - ts[0])
    ctx = {"n": traj.n, "t_end": float(ts[-1])}
    l1 = np.abs(traj.states).mean(axis=1)
    l2 = np.sqrt((traj.states ** 2).mean(axis=1))

    def nonincreasing(name: str, series: np.ndarray) -> AuditReport:
        worst = float(np.diff(series).max()) if series.shape[0] > 1 else 0.0
        tol = 1e-9 * max(1.0, float(np.abs(series).max()))
        return AuditReport(name=name, lhs=worst, rhs=0.0, slack=-worst, tol=tol,
                           passed=bool(worst <= tol), context=dict(ctx))

    reports = [
        nonincreasing("k-energy-nonincreasing", mon.k_energy),
        nonincreasing("linf-nonincreasing", mon.linf),
        nonincreasing("l2-nonincreasing", l2),
        nonincreasing("l1-nonincreasing", l1),
        nonincreasing("tv-nonincreasing", mon.tv),
    ]
    drift = float(np.abs(mon.mean - mon.mean[0]).max())
    tol = 1e-9 * max(1.0, span) * max(1.0, abs(float(mon.mean[0])))
    reports.append(AuditReport(name="mean-conserved", lhs=drift, rhs=0.0,
                               slack=-drift, tol=tol, passed=bool(drift <= tol),
                               context=dict(ctx)))
    if traj.n > 1:
        fd = traj.n * np.diff(traj.states, axis=1)
        mask = np.abs(fd) > 1.0
        created = int(np.sum(mask[1:] & ~mask[:-1]))
    else:
        created = 0
    reports.append(AuditReport(name="supercritical-monotone", lhs=float(created),
                               rhs=0.0, slack=-float(created), tol=0.5,
                               passed=created == 0, context=dict(ctx)))
    return reports


def limit_invariants_audit(traj: LimitTrajectory) -> list[AuditReport]:
    """Mean conservation, sup bound, collision continuity, gap signs."""
    p0 = traj.initial
    mean0 = p0.mean()
    linf0 = float(np.abs(p0.heights).max())
    ctx = {"t_end": traj.t_end, "collisions": len(traj.collisions)}

    worst_mean = 0.0
    worst_linf = 0.0
    sign_flips = 0
    for seg in traj.segments:
        lens = np.diff(np.concatenate(([0.0], seg.jumps, [1.0])))
        means = seg.heights @ lens
        worst_mean = max(worst_mean, float(np.abs(means - mean0).max()))
        worst_linf = max(worst_linf, float(np.abs(seg.heights).max()))
        if seg.jumps.shape[0]:
            signs = np.sign(np.diff(seg.heights[0]))
            flips = np.sign(np.diff(seg.heights, axis=1)) != signs[None, :]
            sign_flips += int(flips.sum())

    worst_jump = 0.0
    for c in traj.collisions:
        seg = min((s for s in traj.segments if s.t_end >= c.time - 1e-15),
                  key=lambda s: s.t_end)
        pre = PlateauFunction(seg.jumps, seg.heights[-1])
        post = evaluate_limit(traj, c.time)
        worst_jump = max(worst_jump, l2_distance_plateaus(pre, post))

    tol_mean = 1e-9 * max(1.0, abs(mean0))
    reports = [
        AuditReport("mean-conserved", worst_mean, 0.0, -worst_mean, tol_mean,
                    bool(worst_mean <= tol_mean), dict(ctx)),
        _inequality("linf-bounded", worst_linf, linf0, dict(ctx)),
        AuditReport("continuity-at-collisions", worst_jump, 0.0, -worst_jump,
                    1e-6, bool(worst_jump <= 1e-6), dict(ctx)),
        AuditReport("gap-signs-constant", float(sign_flips), 0.0,
                    -float(sign_flips), 0.5, sign_flips == 0, dict(ctx)),
    ]
    return reports


def limit_energy_balance(traj: LimitTrajectory, s: float, t: float) -> AuditReport:
    """Energy drop versus half speed plus half slope, squared, integrated.

    Both ``s`` and ``t`` must lie inside one segment, away from the
    collision where the integrand is singular.  Speeds come from the
    stored node derivatives, slopes from the slope formula at the nodes;
    integrals are trapezoid quadrature with a second-difference error
    estimate.
    """
    if not (0.0 <= s < t <= traj.t_end):
        raise ValueError(f"need 0 <= s < t <= {traj.t_end}, got [{s}, {t}]")
    seg = None
    for cand in traj.segments:
        if cand.t_start <= s and t <= cand.t_end:
            seg = cand
            break
    if seg is None:
        raise ValueError(f"[{s}, {t}] does not fit inside a single segment")
    lens = np.diff(np.concatenate(([0.0], seg.jumps, [1.0])))
    i = int(np.searchsorted(seg.times, s, side="left"))
    j = int(np.searchsorted(seg.times, t, side="right")) - 1
    if j - i < 2:
        raise ValueError("too few nodes between s and t")
    tt = seg.times[i:j + 1]
    rows = seg.heights[i:j + 1]
    ders = seg.derivs[i:j + 1]
    g = np.array([limit_energy(PlateauFunction(seg.jumps, r)) for r in rows])
    speed2 = (ders ** 2) @ lens
    slope2 = np.array([limit_slope(PlateauFunction(seg.jumps, r)) ** 2
                       for r in rows])
    f = 0.5 * speed2 + 0.5 * slope2
    lhs = float(g[0] - g[-1])
    rhs = float(np.trapz(f, tt))
    h = float(np.max(np.diff(tt)))
    quad = h / 12.0 * float(np.abs(np.diff(f, 2)).sum())
    tol = 4.0 * quad + 1e-10 * max(1.0, abs(lhs))
    slack = rhs - lhs
    return AuditReport("limit-energy-balance", lhs, rhs, float(slack), float(tol),
                       bool(abs(slack) <= tol),
                       {"s": float(tt[0]), "t": float(tt[-1]),
                        "nodes": int(tt.shape[0])})


# ---------------------------------------------------------------------------
# probes


@dataclass(frozen=True)
class GammaProbeResult:
    n_values: tuple[int, ...]
    energies: tuple[float, ...]
    gaps: tuple[float, ...]
    limit_value: float
    k: int


def gamma_probe(p: PlateauFunction, n_values: Sequence[int],
                k: int | None = None) -> GammaProbeResult:
    """Renormalized energies of grid samplings against the limit energy."""
    k = p.k if k is None else k
    limit = limit_energy(p)
    energies = []
    for n in n_values:
        energies.append(float(k_energy(sample_plateau(p, n), k).value))
    gaps = tuple(e - limit for e in energies)
    return GammaProbeResult(tuple(int(n) for n in n_values), tuple(energies),
                            gaps, limit, k)


@dataclass(frozen=True)
class SlopeProbeResult:
    n_values: tuple[int, ...]
    discrete_slopes: tuple[float, ...]
    profile_bounds: tuple[float, ...]  # refined jump-profile lower bound
    limit_value: float
    liminf_ok: bool  # largest-n discrete slope clears (limit - tol)


def slope_probe(p: PlateauFunction, n_values: Sequence[int],
                tol: float = 1e-3) -> SlopeProbeResult:
    """Discrete slopes of grid samplings against the limit slope.

    The certified relation is the lower-bound direction: discrete slopes
    dominate ``limit - tol`` for large ``n``.  The refined jump-profile
    bound is reported alongside; it converges to the limit slope.
    """
    limit = limit_slope(p)
    slopes = []
    bounds = []
    for n in n_values:
        u = sample_plateau(p, n)
        slopes.append(discrete_slope(u))
        if p.k:
            rep = fundamental_estimates_audit(u, p.jumps, p.k)
            bounds.append(math.sqrt(max(rep[4].lhs, 0.0)))
        else:
            bounds.append(0.0)
    ok = slopes[-1] >= limit - tol * max(1.0, limit) if slopes else True
    return SlopeProbeResult(tuple(int(n) for n in n_values), tuple(slopes),
                            tuple(bounds), limit, bool(ok))


@dataclass(frozen=True)
class ConvergenceTable:
    n_values: tuple[int, ...]
    sup_l2_error: tuple[float, ...]
    sup_unif_error: tuple[float, ...]
    tsing_error: tuple[float, ...]
    t_end: float
    sample_dt: float


def convergence_study(p0: PlateauFunction, n_values: Sequence[int],
                      T: float | None = None, sample_dt: float = 0.005,
                      theta: float = 0.6, limit_rtol: float = 1e-10,
                      threads: int = 1) -> ConvergenceTable:
    """Discrete-versus-limit errors over a grid-refinement ladder.

    For each ``n`` the discrete flow starts from the grid sampling of
    ``p0`` and is compared with the limit evolution on the shared sample
    grid: sup-in-time exact ``L^2`` distance, sup over the cells away
    from the current limit discontinuities, and the gap between the first
    discrete extinction and the first limit collision.  When ``T`` is
    omitted the horizon is set just past the last limit collision.  The
    ladder entries are independent; ``threads > 1`` runs them in a thread
    pool (the stepping kernels release the GIL).
    """
    lopts = LimitOptions(rtol=limit_rtol, sample_dt=sample_dt)
    if T is None:
        bound = float(np.abs(p0.heights).max()
                      * np.abs(p0.jump_heights()).sum()) if p0.k else 1.0
        ltraj = integrate_limit(p0, 1.05 * bound + 0.1, lopts)
        if not ltraj.completed:
            raise RuntimeError("limit evolution did not reach the constant state "
                               "within the a-priori lifespan bound")
        T = (ltraj.collisions[-1].time if ltraj.collisions else 0.0) + 0.1
    ltraj = integrate_limit(p0, T, lopts)
    tsing = ltraj.collisions[0].time if ltraj.collisions else None

    def run_one(n: int) -> tuple[float, float, float]:
        u0n = sample_plateau(p0, int(n))
        dtraj = integrate_discrete(u0n, T, IntegratorOptions(theta=theta,
                                                             sample_dt=sample_dt))
        worst_l2 = 0.0
        worst_unif = 0.0
        for j, t in enumerate(dtraj.sample_times):
            pt = evaluate_limit(ltraj, float(t))
            uj = GridFunction(dtraj.n, dtraj.states[j])
            worst_l2 = max(worst_l2, l2_distance_grid_plateau(uj, pt))
            worst_unif = max(worst_unif, sup_distance_off_jump_cells(uj, pt))
        te = first_extinction(dtraj)
        err_t = math.inf if (tsing is None or te is None) else abs(te - tsing)
        return worst_l2, worst_unif, err_t

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_one, [int(n) for n in n_values]))
    else:
        results = [run_one(int(n)) for n in n_values]
    sup_l2, sup_unif, tsing_err = (list(col) for col in zip(*results))
    return ConvergenceTable(tuple(int(n) for n in n_values), tuple(sup_l2),
                            tuple(sup_unif), tuple(tsing_err), float(T),
                            float(sample_dt))


@dataclass(frozen=True)
class WellPrepResult:
    n_values: tuple[int, ...]
    s_n: tuple[float, ...]
    extra_extinct: tuple[bool, ...]
    energy_gap: tuple[float, ...]
    max_deviation: tuple[float, ...]
    limit_value: float
    k_prime: int


def with_extra_jump(p: PlateauFunction, position: float,
                    height_scale: float = 2.0) -> Callable[[int], GridFunction]:
    """Family of grid samplings of ``p`` with one extra vanishing jump.

    At grid size ``n`` the returned function adds a step of height
    ``height_scale / n`` at the cell boundary assigned to ``position``,
    which is barely supercritical for ``height_scale > 1`` and vanishes
    as ``n`` grows.
    """

    def make(n: int) -> GridFunction:
        base = sample_plateau(p, n)
        c = jump_cell(position, n)
        base_cells = {jump_cell(d, n) for d in p.jumps}
        if c in base_cells or c >= n:
            raise ValueError(
                f"extra jump at {position} collides with an existing jump cell at n={n}")
        v = base.values.copy()
        v[c:] += height_scale / n
        return GridFunction(n, v)

    return make


def well_preparation_probe(u0n_family: Callable[[int], GridFunction],
                           p_limit: PlateauFunction, k_prime: int,
                           n_values: Sequence[int],
                           theta: float = 0.6) -> WellPrepResult:
    """Relaxation to a well-prepared state in time ``S_n = n^(-1/2)``.

    For each ``n`` the flow runs to ``S_n``; the probe records whether
    every extra supercritical cell (those not assigned to jumps of
    ``p_limit``) went extinct, the gap between the renormalized energy at
    ``S_n`` and the limit energy, and the largest deviation from
    ``p_limit`` on ``[0, S_n]``.
    """
    limit = limit_energy(p_limit)
    sn_list, extinct, gaps, devs = [], [], [], []
    for n in n_values:
        n = int(n)
        u0n = u0n_family(n)
        s_n = n ** -0.5
        traj = integrate_discrete(u0n, s_n,
                                  IntegratorOptions(theta=theta, sample_dt=s_n / 64.0))
        base_cells = {jump_cell(d, n) for d in p_limit.jumps}
        extra = set(traj.tracked_cells) - base_cells
        gone = {e.cell for e in traj.extinction_events}
        extinct.append(extra <= gone)
        final = GridFunction(n, traj.states[-1])
        gaps.append(abs(float(k_energy(final, k_prime).value) - limit))
        dev = max(l2_distance_grid_plateau(GridFunction(n, traj.states[j]), p_limit)
                  for j in range(traj.sample_times.shape[0]))
        devs.append(dev)
        sn_list.append(s_n)
    return WellPrepResult(tuple(int(n) for n in n_values), tuple(sn_list),
                          tuple(extinct), tuple(gaps), tuple(devs), limit, k_prime)


# ---------------------------------------------------------------------------
# randomized state generators (deterministic under a seeded Generator)


def _spaced_cells(rng: np.random.Generator, n: int, k: int, margin: int) -> list[int]:
    for _ in range(1000):
        cells = np.sort(rng.integers(margin + 1, n - margin, size=k))
        if k == 1 or int(np.diff(cells).min()) >= margin:
            return [int(c) for c in cells]
    raise RuntimeError(f"could not place {k} separated jumps on {n} cells")


def random_subcritical_state(rng: np.random.Generator, n: int | None = None,
                             k: int | None = None, wiggle: float = 0.9,
                             margin: int = 4):
    """A random piecewise-subcritical state and its jump locations.

    Jump cells are separated by at least ``margin`` cells; jump heights
    are at least ``2.5/n`` in modulus so the jumps are safely
    supercritical, while all other increments stay below ``wiggle / n``.
    Returns ``(GridFunction, jumps)``.
    """
    if n is None:
        n = int(rng.integers(24, 129))
    if k is None:
        k = int(rng.integers(1, 4))
    cells = _spaced_cells(rng, n, k, margin)
    jumps = [(c - 0.5) / n for c in cells]
    incr = rng.uniform(-wiggle / n, wiggle / n, size=n - 1)
    for c in cells:
        mag = rng.uniform(max(2.5 / n, 0.02), 1.2)
        incr[c - 1] = rng.choice((-1.0, 1.0)) * mag
    h0 = rng.uniform(-1.0, 1.0)
    values = h0 + np.concatenate(([0.0], np.cumsum(incr)))
    return GridFunction(n, values), jumps


def random_plateau_pair(rng: np.random.Generator, n: int | None = None,
                        k: int | None = None):
    """Two states subcritical w.r.t. the same jump set (jumps may vanish).

    Either state may carry a sub-threshold increment at some jump cells,
    exercising strict subsets of the common jump set.  Returns
    ``(v, w, jumps)``.
    """
    if n is None:
        n = int(rng.integers(24, 129))
    if k is None:
        k = int(rng.integers(1, 4))
    cells = _spaced_cells(rng, n, k, margin=4)
    jumps = [(c - 0.5) / n for c in cells]

    def make() -> GridFunction:
        incr = rng.uniform(-0.9 / n, 0.9 / n, size=n - 1)
        for c in cells:
            if rng.uniform() < 0.2:
                incr[c - 1] = rng.uniform(-0.5 / n, 0.5 / n)
            else:
                incr[c - 1] = rng.choice((-1.0, 1.0)) * rng.uniform(2.5 / n, 1.2)
        h0 = rng.uniform(-1.0, 1.0)
        return GridFunction(n, h0 + np.concatenate(([0.0], np.cumsum(incr))))

    return make(), make(), jumps
