"""Discrete and limit energies, the renormalized-energy gradient, and slopes.

The discrete energy of a grid function integrates ``log(1 + q^2)/2`` over
the forward difference quotients ``q``.  Renormalizing by ``k log n``
(the k-energy) leaves the gradient unchanged but gives a finite limit on
piecewise constant functions with ``k`` jumps, where the limit energy is
the sum of ``log |jump height|``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConventionWarning
from .grid import GridFunction, PlateauFunction, _forward_quotients

__all__ = [
    "EnergyValue",
    "pm_energy",
    "k_energy",
    "k_energy_gradient",
    "discrete_slope",
    "limit_energy",
    "limit_slope",
]


@dataclass(frozen=True)
class EnergyValue:
    """A (possibly renormalized) energy sample.

    ``value`` is ``n * pm_energy - k log n`` for discrete energies;
    ``n = 0`` marks a limit energy.
    """

    value: float
    k: int
    n: int


def pm_energy(u: GridFunction) -> float:
    """Unrescaled discrete energy ``(1/2) \\int log(1 + q(x)^2) dx``."""
    fd = _forward_quotients(u.values, u.n)
    return float(np.log1p(fd * fd).sum() / (2.0 * u.n))


def k_energy(u: GridFunction, k: int) -> EnergyValue:
    """Renormalized energy ``n * pm_energy(u) - k log n``."""
    if k < 0:
        raise ValueError(f"renormalization count k must be >= 0, got {k}")
    return EnergyValue(value=u.n * pm_energy(u) - k * math.log(u.n), k=k, n=u.n)


def _gradient_values(values: np.ndarray, n: int) -> np.ndarray:
    """L^2-gradient of the k-energy as a cell-value array.

    With ``h = q / (1 + q^2)`` applied to the forward quotients (zero in
    the phantom cells on both sides, which encodes the no-flux boundary),
    the gradient is ``-n^2 (h_i - h_{i-1})``.
    """
    fd = _forward_quotients(values, n)
    h = fd / (1.0 + fd * fd)
    out = np.empty(n)
    out[0] = h[0]
    out[1:] = np.diff(h)
    out *= -float(n) * float(n)
    return out


def k_energy_gradient(u: GridFunction) -> GridFunction:
    """Gradient of the k-energy in ``L^2(0,1)``; independent of ``k``.

    Zero exactly on constants; its cell values always sum to zero, so the
    induced flow conserves the mean.
    """
    return GridFunction(u.n, _gradient_values(u.values, u.n))


def discrete_slope(u: GridFunction) -> float:
    """``L^2`` norm of the k-energy gradient."""
    g = _gradient_values(u.values, u.n)
    return float(np.sqrt(np.mean(g * g)))


def limit_energy(p: PlateauFunction) -> float:
    """Sum of ``log |jump height|`` over the jumps of ``p`` (0 for k=0)."""
    if p.k == 0:
        return 0.0
    return float(np.log(np.abs(p.jump_heights())).sum())


def limit_slope(p: PlateauFunction) -> float:
    """Metric slope of the limit energy at ``p`` w.r.t. the ``L^2`` metric.

    For ``k = 0`` there is no definition; 0 is returned by convention and
    a :class:`ConventionWarning` is issued.
    """
    k = p.k
    if k == 0:
        warnings.warn(
            "slope of a constant plateau function is undefined; returning 0 by convention",
            ConventionWarning,
            stacklevel=2,
        )
        return 0.0
    d = p.jumps
    inv_j = 1.0 / p.jump_heights()
    total = inv_j[0] ** 2 / d[0] + inv_j[-1] ** 2 / (1.0 - d[-1])
    if k > 1:
        total += float(np.sum(np.diff(inv_j) ** 2 / np.diff(d)))
    return float(np.sqrt(total))
