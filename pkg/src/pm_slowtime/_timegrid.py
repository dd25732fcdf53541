"""Shared construction of sampling time grids.

Both integrators build their sample times with this helper, so a discrete
run and a limit run over the same horizon compare states at bit-identical
times.
"""

from __future__ import annotations

import math

import numpy as np


def time_grid(T: float, sample_dt: float) -> np.ndarray:
    """Times ``0, sample_dt, 2 sample_dt, ...`` up to and including ``T``."""
    if not (T > 0.0 and sample_dt > 0.0):
        raise ValueError("T and sample_dt must be positive")
    q = int(math.floor(T / sample_dt * (1.0 + 1e-12)))
    ts = np.arange(q + 1, dtype=np.float64) * sample_dt
    if ts[-1] > T:
        ts[-1] = T
    if T - ts[-1] > 1e-12 * max(1.0, T):
        ts = np.append(ts, T)
    else:
        ts[-1] = T
    return ts
