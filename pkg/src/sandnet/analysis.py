"""Uniqueness diagnostics, error metrics and convergence studies."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from .eikonal import Structure
from .netgraph import Network
from .pipeline import Solution, resample, solve
from .rolling import TransmissionSpec

__all__ = [
    "compute_uf",
    "source_nodes",
    "UniquenessReport",
    "uniqueness_check",
    "ExactSolution",
    "TEST1_EXACT",
    "exact_solution_for",
    "ErrorRow",
    "ErrorTable",
    "errors_against",
    "convergence_study",
    "fit_order",
    "mass_balance",
    "network_source_integral",
    "PiecewiseLinear",
    "random_test_functions",
    "weak_form_residual",
]


# ---------------------------------------------------------------------------
# u^f and uniqueness


def source_nodes(structure: Structure) -> np.ndarray:
    """Boolean mask over global nodes where the source is positive.

    A vertex node counts when the source is positive at that end of any
    incident edge.
    """
    grid = structure.grid
    mask = np.zeros(grid.n_nodes, dtype=bool)
    for j, e in enumerate(structure.network.edges):
        fv = np.asarray(e.source(grid.params[j]), dtype=float)
        mask[grid.nodes[j][fv > 0]] = True
    return mask


def compute_uf(structure: Structure) -> np.ndarray:
    """Minimal standing layer matching the distance on the source support.

    ``u(x) = max over source nodes y of [delta(y) - D_h(y -> x)]_+`` where
    ``D_h`` is the grid path length with the same arc costs as the scheme.
    Computed as one Dijkstra run from a virtual node linked to every source
    node with cost ``offset - delta(y)``.
    """
    grid = structure.grid
    delta = structure.dfield.delta
    src = np.flatnonzero(source_nodes(structure))
    n = grid.n_nodes
    if len(src) == 0:
        return np.zeros(n)
    tails, heads, costs = grid.arcs()
    offset = float(delta.max()) + 1.0
    root = n
    tails = np.concatenate([tails, np.full(len(src), root)])
    heads = np.concatenate([heads, src])
    costs = np.concatenate([costs, offset - delta[src]])
    graph = coo_matrix((costs, (tails, heads)), shape=(n + 1, n + 1)).tocsr()
    dist = dijkstra(graph, directed=True, indices=root)[:n]
    return np.maximum(0.0, offset - dist)


@dataclass
class SingularPoint:
    kind: str          # "edge" or "vertex"
    index: int         # edge or vertex index
    param: float       # arclength on the edge (0 for vertices)
    covered: bool      # source positive within one grid cell

    def describe(self, network: Network) -> str:
        if self.kind == "edge":
            e = network.edges[self.index]
            return f"edge {e.label} at s={self.param:.6g} (t={self.param / e.length:.6g})"
        return f"vertex {network.vertices[self.index].label}"


@dataclass
class UniquenessReport:
    singular_points: list[SingularPoint]
    unique: bool
    uf: np.ndarray
    nonunique_nodes: np.ndarray
    zero_edges: list[int] = field(default_factory=list)

    @property
    def failing(self) -> list[SingularPoint]:
        return [p for p in self.singular_points if not p.covered]


def _covered(structure: Structure, kind: str, index: int, local: int | None) -> bool:
    grid = structure.grid
    net = structure.network
    if kind == "edge":
        e = net.edges[index]
        t = grid.params[index]
        lo, hi = max(local - 1, 0), min(local + 1, len(t) - 1)
        window = np.linspace(t[lo], t[hi], 9)
        return bool(np.any(np.asarray(e.source(window)) > 0))
    for j, side in net.incidence[index]:
        e = net.edges[j]
        t = grid.params[j]
        window = np.linspace(t[0], t[1], 5) if side == 0 else np.linspace(t[-2], t[-1], 5)
        if np.any(np.asarray(e.source(window)) > 0):
            return True
    return False


def uniqueness_check(solution_or_structure, tol: float = 1e-12) -> UniquenessReport:
    """Is every singular point of the distance inside the source support?

    ``unique`` is True iff each interior singular node and each vertex
    maximum has a positive source value within one adjacent grid cell.
    """
    if isinstance(solution_or_structure, Solution):
        structure = solution_or_structure.structure
        rolling = solution_or_structure.rolling
    else:
        structure, rolling = solution_or_structure, None
    points = []
    for j in range(structure.network.n_edges):
        for m in structure.singular[j]:
            s = float(structure.grid.params[j][m])
            points.append(SingularPoint("edge", j, s, _covered(structure, "edge", j, m)))
    for i in structure.vertex_maxima:
        points.append(SingularPoint("vertex", i, 0.0, _covered(structure, "vertex", i, None)))
    uf = compute_uf(structure)
    delta = structure.dfield.delta
    gap = np.flatnonzero(uf < delta - tol * (1 + float(delta.max())))
    zero_edges = []
    if rolling is not None:
        zero_edges = [j for j, v in enumerate(rolling.values) if float(np.abs(v).max()) == 0.0]
    return UniquenessReport(points, all(p.covered for p in points), uf, gap, zero_edges)


# ---------------------------------------------------------------------------
# Exact solutions and error metrics


@dataclass(frozen=True)
class ExactSolution:
    """Closed forms ``d(j, s)`` and ``v(j, s)`` in edge index and arclength."""

    name: str
    d: Callable[[int, np.ndarray], np.ndarray]
    v: Callable[[int, np.ndarray], np.ndarray]


def _test1_d(j: int, s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if j in (0, 1):
        return 0.5 - s
    return np.where(s < 0.25, 0.5 + s, 1.0 - s)


def _test1_v(j: int, s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if j in (0, 1):
        return s - s**2 + 7.0 / 64.0
    return (0.5 * s**2 - s + 7.0 / 32.0) * np.where(s < 0.25, 1.0, -1.0)


TEST1_EXACT = ExactSolution("test1", _test1_d, _test1_v)


def exact_solution_for(network: Network) -> Optional[ExactSolution]:
    """Registered closed form matching ``network`` (ignoring resolution)."""
    from .netfile import test1

    ref = test1().network
    if network.n_edges != ref.n_edges or network.n_vertices != ref.n_vertices:
        return None
    if network.vertices != ref.vertices:
        return None
    for a, b in zip(network.edges, ref.edges):
        if (a.start, a.end, a.length, a.f, a.eta_inv) != (b.start, b.end, b.length, b.f, b.eta_inv):
            return None
    return TEST1_EXACT


@dataclass(frozen=True)
class ErrorRow:
    h: float
    linf_d: float
    l1_d: float
    linf_v: float
    l1_v: float

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.h, self.linf_d, self.l1_d, self.linf_v, self.l1_v)


COLUMNS = ("linf_d", "l1_d", "linf_v", "l1_v")


@dataclass
class ErrorTable:
    rows: list[ErrorRow]
    orders: dict[str, float]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])


def errors_against(
    solution: Solution,
    exact: ExactSolution | None = None,
    reference: Solution | None = None,
    samples_per_edge: int = 10_000,
    at_nodes: bool = False,
) -> ErrorRow:
    """L-infinity and L1 errors of the interpolated solution.

    Compare with ``exact`` closed forms or a finer ``reference`` solution on
    the same network. Errors are sampled on ``samples_per_edge`` uniform
    points per edge, or on the solution's own grid nodes when ``at_nodes``.
    """
    if (exact is None) == (reference is None):
        raise ValueError("give exactly one of exact= or reference=")
    net = solution.network
    if reference is not None:
        ref_net = reference.network
        if ref_net.n_edges != net.n_edges or any(
            (a.start, a.end, a.length) != (b.start, b.end, b.length)
            for a, b in zip(ref_net.edges, net.edges)
        ):
            raise ValueError("reference solution is on a different network")
    st, rf = solution.structure, solution.rolling
    linf_d = linf_v = l1_d = l1_v = 0.0
    for j, e in enumerate(net.edges):
        s = st.grid.params[j] if at_nodes else np.linspace(0.0, e.length, samples_per_edge)
        dh = st.dfield.interpolate(j, s)
        vh = rf.interpolate(j, s)
        if exact is not None:
            d_ref, v_ref = exact.d(j, s), exact.v(j, s)
        else:
            d_ref = reference.structure.dfield.interpolate(j, s)
            v_ref = reference.rolling.interpolate(j, s)
        ed, ev = np.abs(dh - d_ref), np.abs(vh - v_ref)
        linf_d, linf_v = max(linf_d, float(ed.max())), max(linf_v, float(ev.max()))
        l1_d += float(np.trapezoid(ed, s))
        l1_v += float(np.trapezoid(ev, s))
    return ErrorRow(solution.h, linf_d, l1_d, linf_v, l1_v)


def fit_order(h: Sequence[float], err: Sequence[float]) -> float:
    """Least-squares slope of log(err) against log(h)."""
    h, err = np.asarray(h, dtype=float), np.asarray(err, dtype=float)
    keep = err > 0
    if keep.sum() < 2:
        return float("nan")
    slope, _ = np.polyfit(np.log(h[keep]), np.log(err[keep]), 1)
    return float(slope)


def convergence_study(
    network: Network,
    h_list: Sequence[float],
    exact: ExactSolution | None = None,
    grid: str = "odd",
    samples_per_edge: int = 10_000,
    spec: TransmissionSpec | None = None,
    refine: int = 10,
) -> ErrorTable:
    """Errors for each step in ``h_list`` and fitted orders.

    Without ``exact`` a reference solution on a grid ``refine`` times finer
    than ``min(h_list)`` stands in for the true solution.
    """
    h_list = sorted({float(h) for h in h_list}, reverse=True)
    if len(h_list) < 2:
        raise ValueError("need >= 2 steps for a convergence study")
    reference = None
    if exact is None:
        reference = solve(resample(network, min(h_list) / refine, "ceil"), spec)
    rows = []
    for h in h_list:
        sol = solve(resample(network, h, grid), spec)
        rows.append(errors_against(sol, exact=exact, reference=reference,
                                   samples_per_edge=samples_per_edge))
    hs = [r.h for r in rows]
    orders = {c: fit_order(hs, [getattr(r, c) for r in rows]) for c in COLUMNS}
    return ErrorTable(rows, orders)


# ---------------------------------------------------------------------------
# Conservation and weak form


def network_source_integral(network: Network) -> float:
    """Integral of the source over the network by adaptive quadrature."""
    total = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for e in network.edges:
            val, _ = integrate.quad(lambda s: float(e.source(s)), 0.0, e.length,
                                    limit=400, epsabs=1e-13, epsrel=1e-12)
            total += val
    return total


def mass_balance(solution: Solution) -> tuple[float, float]:
    """``(boundary outflow, integral of f + sum of vertex sources)``."""
    from .rolling import boundary_outflow

    poured = network_source_integral(solution.network)
    poured += sum(solution.rolling.vertex_sources.values())
    return boundary_outflow(solution.rolling), poured


@dataclass(frozen=True)
class PiecewiseLinear:
    """Continuous piecewise-linear function on a network.

    ``knots[j]`` / ``values[j]`` give breakpoints (arclength, including both
    ends) and values on edge ``j``; endpoint values agree at shared vertices.
    """

    knots: tuple[np.ndarray, ...]
    values: tuple[np.ndarray, ...]

    def on_edge(self, j: int, s) -> np.ndarray:
        return np.interp(s, self.knots[j], self.values[j])


def random_test_functions(network: Network, count: int, seed: int = 0, max_breaks: int = 3) -> list[PiecewiseLinear]:
    """Random piecewise-linear functions vanishing on boundary vertices."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        at_vertex = np.where([v.is_boundary for v in network.vertices], 0.0,
                             rng.uniform(-1, 1, network.n_vertices))
        knots, values = [], []
        for e in network.edges:
            k = int(rng.integers(0, max_breaks + 1))
            inner = np.sort(rng.uniform(0, e.length, k))
            knots.append(np.concatenate(([0.0], inner, [e.length])))
            values.append(np.concatenate(([at_vertex[e.start]], rng.uniform(-1, 1, k),
                                          [at_vertex[e.end]])))
        out.append(PiecewiseLinear(tuple(knots), tuple(values)))
    return out


_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(4)


def weak_form_residual(solution: Solution, psi: PiecewiseLinear) -> float:
    """``sum_j int v eta d' psi' - int f psi`` for the interpolated solution."""
    st, rf = solution.structure, solution.rolling
    lhs = rhs = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for j, e in enumerate(solution.network.edges):
            t = st.grid.params[j]
            dvals = st.dfield.on_edge(j)
            cuts = np.union1d(t, psi.knots[j])
            a, b = cuts[:-1], cuts[1:]
            keep = b > a
            a, b = a[keep], b[keep]
            mid = 0.5 * (a + b)
            cell = np.clip(np.searchsorted(t, mid) - 1, 0, len(t) - 2)
            dprime = (dvals[cell + 1] - dvals[cell]) / (t[cell + 1] - t[cell])
            kk = np.clip(np.searchsorted(psi.knots[j], mid) - 1, 0, len(psi.knots[j]) - 2)
            pk, pv = psi.knots[j], psi.values[j]
            psiprime = (pv[kk + 1] - pv[kk]) / (pk[kk + 1] - pk[kk])
            half = 0.5 * (b - a)
            nodes = mid[:, None] + half[:, None] * _GAUSS_X[None, :]
            integrand = rf.interpolate(j, nodes) / np.asarray(e.inv_eta(nodes))
            lhs += float(np.sum(half * (integrand @ _GAUSS_W) * dprime * psiprime))

            def fpsi(s, e=e, j=j):
                return float(e.source(s)) * float(psi.on_edge(j, s))

            val, _ = integrate.quad(fpsi, 0.0, e.length, points=psi.knots[j][1:-1] if len(psi.knots[j]) > 2 else None,
                                    limit=400, epsabs=1e-13, epsrel=1e-12)
            rhs += val
    return lhs - rhs
