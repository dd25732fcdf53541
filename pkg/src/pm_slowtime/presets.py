"""Named initial data used by the CLI and the verification suite."""

from __future__ import annotations

import numpy as np

from .grid import PlateauFunction

__all__ = ["PRESETS", "get_preset"]

PRESETS: dict[str, PlateauFunction] = {
    # one symmetric jump: heights follow -/+ sqrt(1 - 2t), collision at 0.5
    "sym2": PlateauFunction(np.array([0.5]), np.array([-1.0, 1.0])),
    # two symmetric jumps: both gaps sqrt(1 - 6t), triple collision at 1/6
    "sym3": PlateauFunction(np.array([1.0 / 3.0, 2.0 / 3.0]),
                            np.array([-1.0, 0.0, 1.0])),
    # asymmetric staircase, mean 0.15
    "stair3": PlateauFunction(np.array([0.25, 0.6]),
                              np.array([0.0, 1.0, -0.5])),
}


def get_preset(name: str) -> PlateauFunction:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(
            f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}"
        ) from None
