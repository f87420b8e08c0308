"""One-call solve of the standing and rolling layers."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .eikonal import DistanceField, Grid, Structure, build_grid, classify, enlarge_ties, solve as solve_distance
from .netgraph import Network
from .rolling import RollingField, TransmissionSpec, compute

__all__ = ["Solution", "solve", "resample", "cells_for", "GRID_MODES"]

GRID_MODES = ("ceil", "odd", "quarter")


@dataclass
class Solution:
    network: Network
    grid: Grid                  # uniform grid before tie enlargement
    raw_field: DistanceField    # scheme solution on the uniform grid
    structure: Structure        # enlarged field with slopes and partition
    rolling: RollingField

    @property
    def field(self) -> DistanceField:
        return self.structure.dfield

    @property
    def h(self) -> float:
        return self.grid.h


def solve(network: Network, spec: TransmissionSpec | None = None, tol: float | None = None) -> Solution:
    grid = build_grid(network)
    raw = solve_distance(network, grid)
    _, enlarged = enlarge_ties(grid, raw, tol)
    structure = classify(enlarged)
    return Solution(network, grid, raw, structure, compute(structure, spec))


def cells_for(length: float, h: float, mode: str = "ceil") -> int:
    """Number of grid cells on an edge for a target step ``h``.

    ``odd`` forces an odd count (the midpoint and quarter points are never
    nodes); ``quarter`` forces a multiple of 4 (they always are).
    """
    if not h > 0:
        raise ValueError("target step must be positive")
    cells = max(1, math.ceil(length / h - 1e-9))
    if mode == "odd":
        cells += 1 - cells % 2
    elif mode == "quarter":
        cells = 4 * math.ceil(cells / 4)
    elif mode != "ceil":
        raise ValueError(f"unknown grid mode {mode!r}; choose from {GRID_MODES}")
    return cells


def resample(network: Network, h: float, mode: str = "ceil") -> Network:
    """Replace every edge's resolution so that its step is at most ``h``."""
    return network.with_resolution([cells_for(e.length, h, mode) - 1 for e in network.edges])
