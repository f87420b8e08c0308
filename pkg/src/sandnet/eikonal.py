"""Discrete distance to the boundary on a network grid.

The grid places ``M_j`` equally spaced interior nodes on edge ``j`` plus the
two endpoint vertices, which are shared by every incident edge. The upwind
scheme

    max_{y ~ x} (u(x) - u(y)) / Dist(x, y) = 1 / eta(x),   u = 0 on the boundary,

is solved exactly by accepting nodes in increasing order of ``u`` (fast
marching). At a vertex node, ``1/eta`` is taken on the edge that carries the
segment to the neighbour, so every arc ``x -> y`` costs
``|t_x - t_y| * eta_inv_j(t_x)``.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._config import base_tol
from .netgraph import Network

__all__ = [
    "Grid",
    "DistanceField",
    "Structure",
    "build_grid",
    "solve",
    "enlarge_ties",
    "classify",
    "project",
    "solve_network",
    "tie_tolerance",
]


@dataclass
class Grid:
    """Per-edge node parameters (arclength) and the shared global numbering.

    ``params[j]`` runs from 0 to ``length_j``; ``nodes[j][m]`` is the global id
    of node ``m`` on edge ``j``. Vertex ``i`` has global id ``i``.
    """

    network: Network
    params: list[np.ndarray]
    nodes: list[np.ndarray]
    inv_eta: list[np.ndarray]
    n_nodes: int
    _adjacency: Optional[list] = field(default=None, repr=False, compare=False)

    @property
    def h(self) -> float:
        return max(float(np.diff(t).max()) for t in self.params)

    def steps(self, j: int) -> np.ndarray:
        return np.diff(self.params[j])

    def location(self) -> list[tuple[int, int]]:
        """``(edge, local index)`` of every global node; vertices get ``(-1, i)``."""
        loc: list[tuple[int, int]] = [(-1, i) for i in range(self.network.n_vertices)]
        loc += [(-1, -1)] * (self.n_nodes - self.network.n_vertices)
        for j, ids in enumerate(self.nodes):
            for m in range(1, len(ids) - 1):
                loc[ids[m]] = (j, m)
        return loc

    def adjacency(self) -> list[list[tuple[int, int, int, int]]]:
        """For each global node: ``(neighbour, edge, own local index, neighbour local index)``."""
        if self._adjacency is None:
            adj: list[list[tuple[int, int, int, int]]] = [[] for _ in range(self.n_nodes)]
            for j, ids in enumerate(self.nodes):
                for m in range(len(ids) - 1):
                    a, b = int(ids[m]), int(ids[m + 1])
                    adj[a].append((b, j, m, m + 1))
                    adj[b].append((a, j, m + 1, m))
            self._adjacency = adj
        return self._adjacency

    def arcs(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Directed arcs ``(tail, head, cost)`` with cost ``Dist * eta_inv(tail)``."""
        tails, heads, costs = [], [], []
        for j, ids in enumerate(self.nodes):
            step = np.diff(self.params[j])
            inv = self.inv_eta[j]
            tails += [ids[:-1], ids[1:]]
            heads += [ids[1:], ids[:-1]]
            costs += [step * inv[:-1], step * inv[1:]]
        return np.concatenate(tails), np.concatenate(heads), np.concatenate(costs)


def build_grid(network: Network) -> Grid:
    """Uniform partition of each edge with ``n_nodes`` interior points."""
    nv = network.n_vertices
    params, nodes, inv = [], [], []
    next_id = nv
    for e in network.edges:
        if e.n_nodes < 1:
            raise ValueError(f"edge {e.label}: needs at least one interior node")
        t = np.linspace(0.0, e.length, e.n_nodes + 2)
        t[-1] = e.length
        ids = np.empty(len(t), dtype=np.int64)
        ids[0], ids[-1] = e.start, e.end
        ids[1:-1] = np.arange(next_id, next_id + e.n_nodes)
        next_id += e.n_nodes
        params.append(t)
        nodes.append(ids)
        inv.append(np.asarray(e.inv_eta(t), dtype=float))
    return Grid(network, params, nodes, inv, next_id)


@dataclass
class DistanceField:
    """Solution of the discrete eikonal problem on a grid.

    ``parent[x]`` is the neighbour realizing the minimum at ``x`` (-1 on the
    boundary). ``inserted`` lists global ids of tie midpoints.
    """

    grid: Grid
    delta: np.ndarray
    parent: np.ndarray
    inserted: tuple[int, ...] = ()

    def on_edge(self, j: int) -> np.ndarray:
        return self.delta[self.grid.nodes[j]]

    def at_vertex(self, i: int) -> float:
        return float(self.delta[i])

    def interpolate(self, j: int, s) -> np.ndarray:
        """Piecewise-linear interpolant on edge ``j`` at arclength ``s``."""
        return np.interp(s, self.grid.params[j], self.on_edge(j))


def solve(network: Network, grid: Grid) -> DistanceField:
    """Fast-marching solve of the upwind scheme (Dijkstra-like causal sweep)."""
    n = grid.n_nodes
    delta = np.full(n, np.inf)
    parent = np.full(n, -1, dtype=np.int64)
    done = np.zeros(n, dtype=bool)
    heap: list[tuple[float, int]] = []
    for i in network.boundary:
        delta[i] = 0.0
        heap.append((0.0, i))
    heapq.heapify(heap)
    adj = grid.adjacency()
    params, inv = grid.params, grid.inv_eta
    accepted = 0
    while heap:
        value, x = heapq.heappop(heap)
        if done[x]:
            continue
        done[x] = True
        accepted += 1
        for y, j, mx, my in adj[x]:
            if done[y]:
                continue
            cand = value + abs(params[j][my] - params[j][mx]) * inv[j][my]
            if cand < delta[y]:
                delta[y] = cand
                parent[y] = x
                heapq.heappush(heap, (cand, y))
    if accepted != n:
        raise RuntimeError(
            f"fast marching accepted {accepted} of {n} nodes; network is disconnected"
        )
    return DistanceField(grid, delta, parent)


def tie_tolerance(delta: np.ndarray, rel: float | None = None) -> float:
    rel = base_tol() if rel is None else rel
    return rel * (1.0 + float(np.max(np.abs(delta))))


def enlarge_ties(grid: Grid, dfield: DistanceField, tol: float | None = None) -> tuple[Grid, DistanceField]:
    """Insert a midpoint between every pair of adjacent nodes with equal distance.

    The midpoint of a tie ``(x, y)`` on edge ``j`` with step ``h`` gets
    ``delta(x) + h / 2 * eta_inv_j(mid)``.
    """
    tol = tie_tolerance(dfield.delta) if tol is None else tol
    network = grid.network
    params, nodes, inv = [], [], []
    delta = list(dfield.delta)
    parent = list(dfield.parent)
    inserted = list(dfield.inserted)
    next_id = grid.n_nodes
    for j, e in enumerate(network.edges):
        t, ids, iv = grid.params[j], grid.nodes[j], grid.inv_eta[j]
        vals = dfield.delta[ids]
        ties = np.flatnonzero(np.abs(np.diff(vals)) <= tol)
        if len(ties) == 0:
            params.append(t)
            nodes.append(ids)
            inv.append(iv)
            continue
        mids = 0.5 * (t[ties] + t[ties + 1])
        mid_inv = np.asarray(e.inv_eta(mids), dtype=float)
        new_t, new_ids, new_inv = [], [], []
        k = 0
        for m in range(len(t)):
            new_t.append(t[m])
            new_ids.append(int(ids[m]))
            new_inv.append(iv[m])
            if k < len(ties) and ties[k] == m:
                h = t[m + 1] - t[m]
                new_t.append(mids[k])
                new_ids.append(next_id)
                new_inv.append(mid_inv[k])
                delta.append(vals[m] + 0.5 * h * mid_inv[k])
                parent.append(int(ids[m]))
                inserted.append(next_id)
                next_id += 1
                k += 1
        params.append(np.array(new_t))
        nodes.append(np.array(new_ids, dtype=np.int64))
        inv.append(np.array(new_inv))
    new_grid = Grid(network, params, nodes, inv, next_id)
    return new_grid, DistanceField(
        new_grid, np.array(delta), np.array(parent, dtype=np.int64), tuple(inserted)
    )


@dataclass
class Structure:
    """Slopes, singular sets, projection targets and the edge partition of a field.

    ``slopes[j][m]`` is the sign of the forward difference on segment ``m``;
    ``singular[j]`` lists local indices of interior sign changes; ``sigma``
    maps ``(vertex, edge)`` to the slope leaving the vertex along the edge;
    ``targets[j]`` lists the vertices ``i`` with ``j`` in ``inc_minus[i]``.
    """

    dfield: DistanceField
    slopes: list[np.ndarray]
    singular: list[list[int]]
    sigma: dict[tuple[int, int], int]
    inc_plus: list[list[int]]
    inc_minus: list[list[int]]
    targets: list[list[int]]
    vertex_maxima: list[int]
    e0_prime: list[int]
    e0_second: list[int]
    partition: list[list[int]]

    @property
    def grid(self) -> Grid:
        return self.dfield.grid

    @property
    def network(self) -> Network:
        return self.dfield.grid.network

    def singular_params(self, j: int) -> list[float]:
        return [float(self.grid.params[j][m]) for m in self.singular[j]]

    def target_params(self, j: int) -> list[float]:
        e = self.network.edges[j]
        return [e.param_at(i) for i in self.targets[j]]

    def sigma_set(self, j: int) -> set[int]:
        """Local indices of the projection set Sigma_j = S_j u T_j."""
        last = len(self.grid.params[j]) - 1
        e = self.network.edges[j]
        out = set(self.singular[j])
        for i in self.targets[j]:
            out.add(0 if i == e.start else last)
        return out

    def singular_set(self) -> list[tuple[str, int, float]]:
        """Interior singular points ``("edge", j, s)`` and maxima ``("vertex", i, 0)``."""
        pts: list[tuple[str, int, float]] = []
        for j in range(self.network.n_edges):
            pts += [("edge", j, s) for s in self.singular_params(j)]
        pts += [("vertex", i, 0.0) for i in self.vertex_maxima]
        return pts

    def edge_class(self) -> dict[int, int]:
        return {j: k for k, cls in enumerate(self.partition) for j in cls}

    def projection_indices(self, j: int) -> np.ndarray:
        """Local index of the projection of every node of edge ``j`` onto Sigma_j."""
        count = len(self.grid.params[j])
        if self.singular[j]:
            s = self.singular[j][0]
            return np.full(count, s, dtype=np.int64)
        e = self.network.edges[j]
        (i,) = self.targets[j]
        return np.full(count, 0 if i == e.start else count - 1, dtype=np.int64)


def classify(dfield: DistanceField) -> Structure:
    """Slopes, singular sets S_j, targets T_j, Inc_i^{+/-} and the edge partition.

    Requires a tie-free field (see :func:`enlarge_ties`).
    """
    grid = dfield.grid
    network = grid.network
    slopes, singular = [], []
    sigma: dict[tuple[int, int], int] = {}
    inc_plus: list[list[int]] = [[] for _ in network.vertices]
    inc_minus: list[list[int]] = [[] for _ in network.vertices]
    for j, e in enumerate(network.edges):
        vals = dfield.on_edge(j)
        sg = np.sign(np.diff(vals)).astype(np.int8)
        if (sg == 0).any():
            m = int(np.flatnonzero(sg == 0)[0])
            raise ValueError(
                f"edge {e.label}: zero slope between nodes {m} and {m + 1}; enlarge ties first"
            )
        slopes.append(sg)
        singular.append([int(m) for m in np.flatnonzero(sg[1:] != sg[:-1]) + 1])
        sigma[(e.start, j)] = int(sg[0])
        sigma[(e.end, j)] = int(-sg[-1])
        for i in (e.start, e.end):
            (inc_plus if sigma[(i, j)] > 0 else inc_minus)[i].append(j)

    targets = [
        [i for i in (e.start, e.end) if sigma[(i, j)] < 0]
        for j, e in enumerate(network.edges)
    ]
    transition = set(network.transition)
    vertex_maxima = [i for i in network.transition if not inc_plus[i]]

    e0_prime = [j for j in range(network.n_edges) if singular[j]]
    maxset = set(vertex_maxima)
    e0_second = [
        j
        for j, e in enumerate(network.edges)
        if not singular[j] and (e.start in maxset or e.end in maxset)
    ]
    assigned = set(e0_prime) | set(e0_second)
    partition = [sorted(assigned)]
    frontier = partition[0]
    while frontier:
        touched = set()
        for k in frontier:
            e = network.edges[k]
            for i in (e.start, e.end):
                if i in transition:
                    touched.update(j for j, _ in network.incidence[i])
        nxt = sorted(touched - assigned)
        if not nxt:
            break
        assigned.update(nxt)
        partition.append(nxt)
        frontier = nxt
    rest = sorted(set(range(network.n_edges)) - assigned)
    if rest:
        partition.append(rest)
    return Structure(
        dfield, slopes, singular, sigma, inc_plus, inc_minus, targets,
        vertex_maxima, e0_prime, e0_second, partition,
    )


def project(structure: Structure, j: int, m: int) -> tuple[int, float, int]:
    """Walk from node ``m`` of edge ``j`` uphill until the projection set.

    Returns ``(tau, P, index)``: the number of steps, the arclength of the
    reached node and its local index.
    """
    params = structure.grid.params[j]
    stops = structure.sigma_set(j)
    slopes = structure.slopes[j]
    last = len(params) - 1
    k = m
    steps = 0
    while k not in stops:
        direction = slopes[k] if k < last else slopes[last - 1]
        k += int(direction)
        steps += 1
        if not 0 <= k <= last:
            raise RuntimeError(f"projection walk left edge {j}")
    return steps, float(params[k]), k


def solve_network(network: Network, tol: float | None = None) -> Structure:
    """Grid, solve, tie enlargement and classification in one call."""
    grid = build_grid(network)
    dfield = solve(network, grid)
    _, enlarged = enlarge_ties(grid, dfield, tol)
    return classify(enlarged)
