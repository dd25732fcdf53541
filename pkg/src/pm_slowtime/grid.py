"""Grid functions, plateau functions, and discrete difference operators.

A grid function is constant on each of the ``n`` cells ``((i-1)/n, i/n)``
of the unit interval (cells are 1-based throughout).  Discrete derivatives
use the constant extension ``u(x) = u(0)`` for ``x <= 0`` and
``u(x) = u(1)`` for ``x >= 1``, so the forward difference vanishes in the
last cell and the backward difference vanishes in the first.

A plateau function is piecewise constant with finitely many interior jump
points; neighboring plateau values must differ.  Values at grid points are
never evaluated directly: every spatial location is reduced to a 1-based
cell index first, which keeps the left-cell convention for jumps sitting
exactly on a grid point bit-exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import JumpCollisionError, NotPiecewiseSubcriticalError

__all__ = [
    "GridFunction",
    "PlateauFunction",
    "Norms",
    "forward_diff",
    "backward_diff",
    "jump_cell",
    "discrete_jump_height",
    "supercritical_cells",
    "subcritical_quotient",
    "sample_plateau",
    "norms",
    "l2_inner",
]


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GridFunction:
    """A function constant on each of the ``n`` uniform cells of ``[0, 1]``.

    Attributes
    ----------
    n : int
        Number of cells, ``n >= 1``.
    values : ndarray of shape (n,)
        Value on cell ``i`` (1-based) is ``values[i-1]``.
    """

    n: int
    values: np.ndarray

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.shape[0] != self.n:
            raise ValueError(
                f"values must be a 1-d array of length n={self.n}, got shape {v.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")
        object.__setattr__(self, "values", _freeze(v))

    @classmethod
    def constant(cls, n: int, c: float) -> "GridFunction":
        return cls(n, np.full(n, float(c)))

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "values": self.values.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "GridFunction":
        obj = json.loads(text)
        return cls(int(obj["n"]), np.asarray(obj["values"], dtype=np.float64))


@dataclass(frozen=True, eq=False)
class PlateauFunction:
    """A piecewise constant function with jumps at interior points.

    ``jumps`` holds the ``k`` strictly increasing jump locations in
    ``(0, 1)``; ``heights`` holds the ``k + 1`` plateau values, where
    ``heights[i]`` is the value on ``(jumps[i-1], jumps[i])`` with the
    convention ``jumps[-1] = 0`` and ``jumps[k] = 1``.  Neighboring
    heights must differ (otherwise the jump does not exist and must be
    dropped from ``jumps``).
    """

    jumps: np.ndarray
    heights: np.ndarray

    def __post_init__(self):
        j = np.asarray(self.jumps, dtype=np.float64).reshape(-1)
        h = np.asarray(self.heights, dtype=np.float64).reshape(-1)
        if h.shape[0] != j.shape[0] + 1:
            raise ValueError(
                f"heights must have one more entry than jumps, "
                f"got {h.shape[0]} heights for {j.shape[0]} jumps"
            )
        if not (np.all(np.isfinite(j)) and np.all(np.isfinite(h))):
            raise ValueError("jumps and heights must be finite")
        if j.size and not (0.0 < j[0] and j[-1] < 1.0 and np.all(np.diff(j) > 0)):
            raise ValueError("jumps must be strictly increasing inside (0, 1)")
        if np.any(np.diff(h) == 0.0):
            raise ValueError("neighboring plateau heights must differ")
        object.__setattr__(self, "jumps", _freeze(j))
        object.__setattr__(self, "heights", _freeze(h))

    @property
    def k(self) -> int:
        """Number of jump points."""
        return int(self.jumps.shape[0])

    @property
    def lengths(self) -> np.ndarray:
        """Lengths of the ``k + 1`` plateaus."""
        return np.diff(np.concatenate(([0.0], self.jumps, [1.0])))

    def jump_heights(self) -> np.ndarray:
        """Signed jump heights across each jump point."""
        return np.diff(self.heights)

    def mean(self) -> float:
        """Length-weighted mean, i.e. the integral over ``[0, 1]``."""
        return float(np.dot(self.lengths, self.heights))

    def value_at(self, x: float) -> float:
        """Value at ``x`` with right-continuity at jump points."""
        # searchsorted(side="right") puts x == jump into the right plateau
        return float(self.heights[int(np.searchsorted(self.jumps, x, side="right"))])

    def to_json(self) -> str:
        return json.dumps({"jumps": self.jumps.tolist(), "heights": self.heights.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "PlateauFunction":
        obj = json.loads(text)
        return cls(np.asarray(obj["jumps"], dtype=np.float64),
                   np.asarray(obj["heights"], dtype=np.float64))


@dataclass(frozen=True)
class Norms:
    l2: float
    linf: float
    tv: float
    mean: float


def l2_inner(u: GridFunction, w: GridFunction) -> float:
    """L^2(0,1) inner product of two grid functions on the same grid."""
    if u.n != w.n:
        raise ValueError(f"grid sizes differ: {u.n} != {w.n}")
    return float(np.dot(u.values, w.values) / u.n)


def _forward_quotients(values: np.ndarray, n: int) -> np.ndarray:
    """Forward difference quotients, one per cell; the last entry is 0."""
    fd = np.zeros(n)
    if n > 1:
        fd[:-1] = n * np.diff(values)
    return fd


def forward_diff(u: GridFunction) -> GridFunction:
    """Forward difference quotient ``n (u(x + 1/n) - u(x))`` per cell.

    The right extension ``u(x) = u(1)`` makes the last cell 0.
    """
    return GridFunction(u.n, _forward_quotients(u.values, u.n))


def backward_diff(u: GridFunction) -> GridFunction:
    """Backward difference quotient ``n (u(x) - u(x - 1/n))`` per cell.

    The left extension ``u(x) = u(0)`` makes the first cell 0.
    """
    bd = np.zeros(u.n)
    if u.n > 1:
        bd[1:] = u.n * np.diff(u.values)
    return GridFunction(u.n, bd)


def jump_cell(d: float, n: int) -> int:
    """1-based index of the grid cell assigned to the jump point ``d``.

    Returns ``ceil(n d)``; for ``d`` exactly of the form ``i/n`` this is
    the cell on the left of ``d``.
    """
    if not (0.0 < d < 1.0):
        raise ValueError(f"jump point must lie in (0, 1), got {d}")
    c = math.ceil(n * d)
    return min(max(c, 1), n)


def discrete_jump_height(u: GridFunction, d: float) -> float:
    """Difference of cell values across the cell containing ``d``.

    With ``c = jump_cell(d, n)`` this is ``u(cell c+1) - u(cell c)``; for
    ``c = n`` the right extension gives 0.
    """
    c = jump_cell(d, u.n)
    if c >= u.n:
        return 0.0
    return float(u.values[c] - u.values[c - 1])


def supercritical_cells(u: GridFunction) -> frozenset[int]:
    """Cells where the forward difference quotient exceeds 1 in modulus.

    Equivalently the cells with ``n |u(x + 1/n) - u(x)| > 1``; ties count
    as subcritical.  The last cell is never supercritical.
    """
    if u.n == 1:
        return frozenset()
    mask = np.abs(u.n * np.diff(u.values)) > 1.0
    return frozenset(int(i) + 1 for i in np.nonzero(mask)[0])


def subcritical_quotient(u: GridFunction, jumps) -> float:
    """Largest difference quotient in modulus away from the jump cells.

    ``jumps`` is the set of jump locations; ``u`` must be piecewise
    subcritical with respect to it, i.e. its supercritical cells must be
    exactly the cells assigned to ``jumps``.
    """
    cells = frozenset(jump_cell(d, u.n) for d in jumps)
    actual = supercritical_cells(u)
    if actual != cells:
        raise NotPiecewiseSubcriticalError(
            f"supercritical cells {sorted(actual)} do not match "
            f"jump cells {sorted(cells)}"
        )
    fd = _forward_quotients(u.values, u.n)
    mask = np.ones(u.n, dtype=bool)
    for c in cells:
        mask[c - 1] = False
    off = np.abs(fd[mask])
    return float(off.max()) if off.size else 0.0


def sample_plateau(p: PlateauFunction, n: int) -> GridFunction:
    """Grid sampling of a plateau function: cell ``i`` takes ``p((i-1)/n)``.

    The value at a jump point is the right-hand one, so every jump of
    ``p`` moves to the grid point on the left of its cell.  Discrete jump
    heights equal the continuous ones exactly.  Raises
    :class:`JumpCollisionError` when two jumps share a cell (``n`` too
    small for this plateau geometry).
    """
    if n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    cells = [jump_cell(d, n) for d in p.jumps]
    if len(set(cells)) != len(cells):
        raise JumpCollisionError(
            f"jumps {p.jumps.tolist()} do not fall into distinct cells at n={n}"
        )
    x = np.arange(n) / n
    idx = np.searchsorted(p.jumps, x, side="right")
    return GridFunction(n, p.heights[idx])


def norms(u: GridFunction) -> Norms:
    """L^2, L^inf, total variation (of u itself) and mean of ``u``."""
    v = u.values
    tv = float(np.abs(np.diff(v)).sum()) if u.n > 1 else 0.0
    return Norms(
        l2=float(np.sqrt(np.mean(v * v))),
        linf=float(np.abs(v).max()),
        tv=tv,
        mean=float(np.mean(v)),
    )
