"""CSV and JSON emission for runs and probes.

Floats are printed with ``repr`` (shortest round-trip form), so identical
runs produce byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .analysis import (AuditReport, ConvergenceTable, GammaProbeResult,
                       SlopeProbeResult, WellPrepResult)
from .discrete_flow import DiscreteTrajectory
from .limit_flow import LimitTrajectory, evaluate_limit

__all__ = [
    "fmt",
    "write_csv",
    "write_json",
    "discrete_trajectory_csv",
    "limit_trajectory_csv",
    "collisions_json",
    "extinctions_json",
    "audits_csv",
    "convergence_csv",
    "gamma_csv",
    "slope_csv",
    "wellprep_csv",
]


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(x) for x in row))
    path.write_text("\n".join(lines) + "\n")


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def discrete_trajectory_csv(traj: DiscreteTrajectory, path: Path,
                            include_state: bool = False) -> None:
    k0 = traj.k0
    header = ["t", "pm_energy", "k_energy", "slope", "linf", "tv", "mean", "sq"]
    header += [f"J_{i + 1}" for i in range(k0)]
    if include_state:
        header += [f"v_{i + 1}" for i in range(traj.n)]
    mon = traj.monitors
    rows = []
    for j, t in enumerate(traj.sample_times):
        row = [t, mon.pm_energy[j], mon.k_energy[j], mon.slope[j], mon.linf[j],
               mon.tv[j], mon.mean[j], mon.sq[j]]
        row += list(mon.jump_heights[j])
        if include_state:
            row += list(traj.states[j])
        rows.append(row)
    write_csv(path, header, rows)


def extinctions_json(traj: DiscreteTrajectory, path: Path) -> None:
    write_json(path, [
        {"time": e.time, "cell": e.cell,
         "remaining_supercritical": sorted(e.remaining_supercritical)}
        for e in traj.extinction_events
    ])


def limit_trajectory_csv(traj: LimitTrajectory, path: Path) -> None:
    """Rows ``t, k(t), a_0..a_k`` padded with empty fields after collisions."""
    times = set()
    for seg in traj.segments:
        times.update(float(t) for t in seg.times)
    k_max = max(seg.heights.shape[1] for seg in traj.segments)
    header = ["t", "k"] + [f"a_{i}" for i in range(k_max)]
    lines = [",".join(header)]
    for t in sorted(times):
        p = evaluate_limit(traj, t)
        cells = [fmt(t), str(p.k)] + [fmt(h) for h in p.heights]
        cells += [""] * (k_max - p.k - 1)
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")


def collisions_json(traj: LimitTrajectory, path: Path) -> None:
    write_json(path, [
        {"time": c.time, "merged_groups": [list(g) for g in c.merged_groups],
         "new_heights": list(c.new_heights)}
        for c in traj.collisions
    ])


def audits_csv(reports: Sequence[AuditReport], path: Path) -> None:
    header = ["name", "lhs", "rhs", "slack", "tol", "passed", "context"]
    rows = [[r.name, r.lhs, r.rhs, r.slack, r.tol, r.passed,
             json.dumps(r.context, sort_keys=True).replace(",", ";")]
            for r in reports]
    write_csv(path, header, rows)


def convergence_csv(table: ConvergenceTable, path: Path) -> None:
    write_csv(path, ["n", "sup_l2_error", "sup_unif_error", "tsing_error"],
              zip(table.n_values, table.sup_l2_error, table.sup_unif_error,
                  table.tsing_error))


def gamma_csv(res: GammaProbeResult, path: Path) -> None:
    write_csv(path, ["n", "k_energy", "gap_to_limit", "limit_energy", "k"],
              [(n, e, g, res.limit_value, res.k)
               for n, e, g in zip(res.n_values, res.energies, res.gaps)])


def slope_csv(res: SlopeProbeResult, path: Path) -> None:
    write_csv(path, ["n", "discrete_slope", "profile_lower_bound", "limit_slope"],
              [(n, s, b, res.limit_value)
               for n, s, b in zip(res.n_values, res.discrete_slopes,
                                  res.profile_bounds)])


def wellprep_csv(res: WellPrepResult, path: Path) -> None:
    write_csv(path, ["n", "s_n", "extra_extinct", "energy_gap", "max_deviation"],
              zip(res.n_values, res.s_n, res.extra_extinct, res.energy_gap,
                  res.max_deviation))
