"""Rolling layer: edgewise source accumulation plus vertex transmission.

On edge ``j`` the value at node ``t_m`` is the trapezoidal integral of the
source between ``t_m`` and its projection onto ``S_j u T_j``; when the
projection is the downhill-target vertex ``x_i`` the edge also receives
``K_ij g(x_i) + C_ij * (sum of rolling values arriving at x_i)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._config import base_tol
from .eikonal import Structure
from .netgraph import Network

__all__ = [
    "TransmissionSpec",
    "RollingField",
    "FluxRow",
    "compute",
    "flux_report",
    "boundary_outflow",
]


@dataclass
class TransmissionSpec:
    """Split coefficients at transition vertices.

    ``coefficients[i][j]`` = C_ij, ``vertex_sources[i]`` = g(x_i),
    ``source_split[i][j]`` = K_ij. Missing vertices get the uniform split
    ``1 / N_i^-`` over the downhill edges.
    """

    coefficients: dict[int, dict[int, float]] = field(default_factory=dict)
    vertex_sources: dict[int, float] = field(default_factory=dict)
    source_split: dict[int, dict[int, float]] = field(default_factory=dict)

    @classmethod
    def from_netfile(cls, netfile) -> "TransmissionSpec":
        return cls(
            {i: dict(r) for i, r in netfile.coefficients.items()},
            dict(netfile.vertex_sources),
            {i: dict(r) for i, r in netfile.source_split.items()},
        )

    def resolve(self, structure: Structure) -> tuple[dict, dict, dict]:
        """Full C, K tables over Inc_i^- for every transition vertex, and g."""
        net = structure.network
        C, K = {}, {}
        g = {i: float(v) for i, v in self.vertex_sources.items()}
        for i in net.transition:
            out = structure.inc_minus[i]
            for name, given, table in (("C", self.coefficients, C), ("K", self.source_split, K)):
                if i in given:
                    row = given[i]
                    if set(row) != set(out):
                        raise ValueError(
                            f"{name} coefficients at vertex {net.vertices[i].label} cover edges "
                            f"{sorted(net.edges[j].label for j in row)}, but the downhill edges are "
                            f"{sorted(net.edges[j].label for j in out)}"
                        )
                    if any(c <= 0 for c in row.values()) or abs(sum(row.values()) - 1) > 1e-12:
                        raise ValueError(
                            f"{name} coefficients at vertex {net.vertices[i].label} must be positive "
                            "and sum to 1"
                        )
                    table[i] = {j: float(c) for j, c in row.items()}
                elif out:
                    table[i] = {j: 1.0 / len(out) for j in out}
                else:
                    table[i] = {}
        for i, gi in g.items():
            if gi < 0:
                raise ValueError("vertex sources must be non-negative")
            if gi > 0 and net.vertices[i].is_boundary:
                raise ValueError(f"vertex source at boundary vertex {net.vertices[i].label}")
            if gi > 0 and not structure.inc_minus[i]:
                raise ValueError(
                    f"vertex source at {net.vertices[i].label}, which has no downhill edge"
                )
        return C, K, g


@dataclass
class RollingField:
    """Rolling-layer values stored per edge (multivalued at vertices).

    ``values[j][m]`` is ``v_j`` at node ``m`` of edge ``j``; ``inflow[i]`` is
    the mass arriving at transition vertex ``i`` along Inc_i^+.
    """

    structure: Structure
    values: list[np.ndarray]
    inflow: dict[int, float]
    coefficients: dict[int, dict[int, float]]
    source_split: dict[int, dict[int, float]]
    vertex_sources: dict[int, float]
    order: list[int]

    def at_vertex(self, i: int) -> dict[int, float]:
        """Edgewise values at vertex ``i``: ``{edge index: v_j(x_i)}``."""
        net = self.structure.network
        return {j: float(self.values[j][0 if side == 0 else -1]) for j, side in net.incidence[i]}

    def interpolate(self, j: int, s) -> np.ndarray:
        return np.interp(s, self.structure.grid.params[j], self.values[j])

    def max_abs(self) -> float:
        return max(float(np.abs(v).max()) for v in self.values)


def _edge_accumulation(structure: Structure, j: int) -> tuple[np.ndarray, np.ndarray]:
    grid = structure.grid
    e = structure.network.edges[j]
    t = grid.params[j]
    f = np.asarray(e.source(t), dtype=float)
    cum = np.concatenate(([0.0], np.cumsum(0.5 * np.diff(t) * (f[:-1] + f[1:]))))
    proj = structure.projection_indices(j)
    return np.abs(cum[proj] - cum), proj


def compute(structure: Structure, spec: TransmissionSpec | None = None) -> RollingField:
    """Rolling layer on the enlarged grid, processed class by class.

    Edges whose downhill target still waits on an unfinished incoming edge
    are deferred within the sweep; a full pass without progress means the
    slopes contain a cycle, which a valid distance field never produces.
    """
    spec = spec or TransmissionSpec()
    C, K, g = spec.resolve(structure)
    net: Network = structure.network
    values: list[np.ndarray | None] = [None] * net.n_edges
    inflow: dict[int, float] = {}
    order: list[int] = []

    pending = [j for cls in structure.partition for j in cls]
    while pending:
        progressed = False
        waiting = []
        for j in pending:
            acc, proj = _edge_accumulation(structure, j)
            if structure.singular[j]:
                values[j] = acc
            else:
                (i,) = structure.targets[j]
                if i not in inflow:
                    feeders = structure.inc_plus[i]
                    if any(values[k] is None for k in feeders):
                        waiting.append(j)
                        continue
                    inflow[i] = sum(
                        float(values[k][0 if net.edges[k].start == i else -1]) for k in feeders
                    )
                extra = K.get(i, {}).get(j, 0.0) * g.get(i, 0.0) + C[i][j] * inflow[i]
                values[j] = acc + extra
            order.append(j)
            progressed = True
        if not progressed:
            raise AssertionError(
                f"no processing order for edges {[net.edges[j].label for j in waiting]}"
            )
        pending = waiting

    for i in net.transition:
        if i not in inflow:
            inflow[i] = sum(
                float(values[k][0 if net.edges[k].start == i else -1]) for k in structure.inc_plus[i]
            )
    return RollingField(structure, values, inflow, C, K, g, order)


@dataclass(frozen=True)
class FluxRow:
    vertex: int
    inflow: float
    outflow: float
    source: float
    residual: float
    signed_sum: float


def flux_report(rolling: RollingField) -> list[FluxRow]:
    """Mass balance at each transition vertex: inflow + g - outflow."""
    st = rolling.structure
    net = st.network
    rows = []
    for i in net.transition:
        vals = rolling.at_vertex(i)
        inflow = sum(vals[j] for j in st.inc_plus[i])
        outflow = sum(vals[j] for j in st.inc_minus[i])
        gi = rolling.vertex_sources.get(i, 0.0)
        signed = sum(st.sigma[(i, j)] * vals[j] for j in vals)
        rows.append(FluxRow(i, inflow, outflow, gi, inflow + gi - outflow, signed))
    return rows


def flux_tolerance(rolling: RollingField) -> float:
    return base_tol() * (1.0 + rolling.max_abs())


def boundary_outflow(rolling: RollingField) -> float:
    """Total rolling mass leaving the network through boundary vertices."""
    net = rolling.structure.network
    total = 0.0
    for i in net.boundary:
        total += sum(rolling.at_vertex(i).values())
    return total
