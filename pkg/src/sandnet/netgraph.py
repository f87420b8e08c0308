"""Network data model, validation and the vertex-level weighted metric."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from .exprcalc import Expr, ExprEvalError, parse

__all__ = [
    "Kind",
    "Vertex",
    "Edge",
    "Network",
    "ValidationReport",
    "Violation",
    "validate",
    "edge_weight",
    "vertex_distance_matrix",
    "DEFAULT_SAMPLES",
]

DEFAULT_SAMPLES = 1000


class Kind(str, Enum):
    BOUNDARY = "b"
    TRANSITION = "t"


def _as_expr(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, float)):
        return parse(repr(float(value)))
    return parse(str(value))


@dataclass(frozen=True)
class Vertex:
    x: float
    y: float
    kind: Kind
    label: int

    @property
    def is_boundary(self) -> bool:
        return self.kind is Kind.BOUNDARY


@dataclass(frozen=True)
class Edge:
    """An edge parametrized from ``start`` (s=0) to ``end`` (s=length).

    ``f`` and ``eta_inv`` are formulas in the normalized parameter
    ``t = s / length``; use :meth:`source` and :meth:`inv_eta` to evaluate
    them in arclength.
    """

    start: int
    end: int
    length: float
    f: Expr
    eta_inv: Expr
    n_nodes: int
    label: int

    def source(self, s):
        return self.f(np.asarray(s, dtype=float) / self.length)

    def inv_eta(self, s):
        return self.eta_inv(np.asarray(s, dtype=float) / self.length)

    def other(self, vertex: int) -> int:
        return self.end if vertex == self.start else self.start

    def param_at(self, vertex: int) -> float:
        """Arclength parameter of ``vertex`` on this edge."""
        return 0.0 if vertex == self.start else self.length


@dataclass(frozen=True)
class Network:
    vertices: tuple[Vertex, ...]
    edges: tuple[Edge, ...]
    incidence: tuple[tuple[tuple[int, int], ...], ...] = field(
        init=False, repr=False, compare=False
    )

    def __post_init__(self):
        inc: list[list[tuple[int, int]]] = [[] for _ in self.vertices]
        for j, e in enumerate(self.edges):
            for side, v in ((0, e.start), (1, e.end)):
                if 0 <= v < len(inc):
                    inc[v].append((j, side))
        object.__setattr__(self, "incidence", tuple(tuple(x) for x in inc))

    @classmethod
    def build(cls, vertices, edges) -> "Network":
        """Convenience constructor.

        ``vertices``: iterable of ``(x, y, kind)`` with kind ``"b"``/``"t"``;
        ``edges``: iterable of dicts with keys ``start``, ``end`` and optional
        ``length`` (Euclidean by default), ``f`` (0), ``eta_inv`` (1),
        ``n_nodes`` (99). Labels are the positions (vertices) or 1-based
        positions (edges) unless given.
        """
        vs = []
        for i, item in enumerate(vertices):
            x, y, kind = item[:3]
            label = item[3] if len(item) > 3 else i
            vs.append(Vertex(float(x), float(y), Kind(kind), int(label)))
        es = []
        for j, spec in enumerate(edges):
            a, b = int(spec["start"]), int(spec["end"])
            length = spec.get("length")
            if length is None and not (0 <= a < len(vs) and 0 <= b < len(vs)):
                length = math.nan   # left for validate() to report
            elif length is None:
                length = math.hypot(vs[b].x - vs[a].x, vs[b].y - vs[a].y)
            es.append(
                Edge(
                    start=a,
                    end=b,
                    length=float(length),
                    f=_as_expr(spec.get("f", 0.0)),
                    eta_inv=_as_expr(spec.get("eta_inv", 1.0)),
                    n_nodes=int(spec.get("n_nodes", 99)),
                    label=int(spec.get("label", j + 1)),
                )
            )
        return cls(tuple(vs), tuple(es))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def boundary(self) -> list[int]:
        return [i for i, v in enumerate(self.vertices) if v.is_boundary]

    @property
    def transition(self) -> list[int]:
        return [i for i, v in enumerate(self.vertices) if not v.is_boundary]

    def degree(self, i: int) -> int:
        return len(self.incidence[i])

    def with_resolution(self, n_nodes) -> "Network":
        """Copy with new interior node counts (an int or one per edge)."""
        counts = (
            [int(n_nodes)] * self.n_edges
            if np.ndim(n_nodes) == 0
            else [int(n) for n in n_nodes]
        )
        edges = tuple(
            Edge(e.start, e.end, e.length, e.f, e.eta_inv, n, e.label)
            for e, n in zip(self.edges, counts)
        )
        return Network(self.vertices, edges)

    def edge_index(self, label: int) -> int:
        for j, e in enumerate(self.edges):
            if e.label == label:
                return j
        raise KeyError(f"no edge labelled {label}")

    def vertex_index(self, label: int) -> int:
        for i, v in enumerate(self.vertices):
            if v.label == label:
                return i
        raise KeyError(f"no vertex labelled {label}")


@dataclass(frozen=True)
class Violation:
    code: str
    message: str

    def __str__(self) -> str:
        return f"[{self.code}] {self.message}"


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, code: str, message: str) -> None:
        self.violations.append(Violation(code, message))

    def codes(self) -> set[str]:
        return {v.code for v in self.violations}

    def __bool__(self) -> bool:
        return self.ok

    def __str__(self) -> str:
        if self.ok:
            return "valid"
        return "\n".join(str(v) for v in self.violations)


def validate(network: Network, samples: int = DEFAULT_SAMPLES) -> ValidationReport:
    """Check the standing assumptions on a network; never raises."""
    report = ValidationReport()
    nv = network.n_vertices
    if nv == 0:
        report.add("empty", "network has no vertices")
        return report
    if not network.boundary:
        report.add("no-boundary", "no boundary vertex")

    seen_pairs: dict[frozenset, int] = {}
    for e in network.edges:
        where = f"edge {e.label}"
        if not (0 <= e.start < nv and 0 <= e.end < nv):
            report.add("bad-endpoint", f"{where}: endpoint out of range")
            continue
        if e.start == e.end:
            report.add("self-loop", f"{where}: start == end")
        pair = frozenset((e.start, e.end))
        if pair in seen_pairs:
            report.add(
                "duplicate-edge",
                f"{where}: duplicates edge {seen_pairs[pair]} between the same vertices",
            )
        seen_pairs.setdefault(pair, e.label)
        if not (math.isfinite(e.length) and e.length > 0):
            report.add("length", f"{where}: length must be positive, got {e.length!r}")
        if e.n_nodes < 1:
            report.add("resolution", f"{where}: needs at least one interior node")
        ts = np.linspace(0.0, 1.0, samples)
        try:
            inv = e.eta_inv(ts)
            if inv.min() <= 0.0:
                k = int(np.argmin(inv))
                report.add(
                    "eta",
                    f"{where}: eta^-1 not strictly positive (eta_inv({ts[k]:.6g}) = {inv[k]:.6g})",
                )
        except ExprEvalError as exc:
            report.add("eta", f"{where}: eta^-1 cannot be evaluated: {exc}")
        try:
            fv = e.f(ts)
            if fv.min() < 0.0:
                k = int(np.argmin(fv))
                report.add(
                    "source", f"{where}: source negative (f({ts[k]:.6g}) = {fv[k]:.6g})"
                )
        except ExprEvalError as exc:
            report.add("source", f"{where}: source cannot be evaluated: {exc}")

    for i, v in enumerate(network.vertices):
        if network.degree(i) == 0:
            report.add("isolated", f"vertex {v.label} has no incident edge")
        elif network.degree(i) == 1 and not v.is_boundary:
            report.add("degree-one", f"vertex {v.label} has degree 1 but is not boundary")

    if "bad-endpoint" not in report.codes() and nv > 1:
        rows = [e.start for e in network.edges]
        cols = [e.end for e in network.edges]
        adj = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(nv, nv))
        ncomp, _ = connected_components(adj, directed=False)
        if ncomp > 1:
            report.add("disconnected", f"network has {ncomp} connected components")
    return report


def edge_weight(edge: Edge, n_nodes: int | None = None) -> float:
    """Integral of ``1/eta`` along the edge (composite trapezoid).

    The rule uses the edge's own grid (``n_nodes`` interior nodes unless
    overridden).
    """
    m = edge.n_nodes if n_nodes is None else n_nodes
    s = np.linspace(0.0, edge.length, m + 2)
    return float(np.trapezoid(edge.inv_eta(s), s))


def vertex_distance_matrix(network: Network) -> np.ndarray:
    """All-pairs weighted shortest-path distances between vertices."""
    nv = network.n_vertices
    w = np.full((nv, nv), np.inf)
    for e in network.edges:
        c = edge_weight(e)
        w[e.start, e.end] = min(w[e.start, e.end], c)
        w[e.end, e.start] = w[e.start, e.end]
    np.fill_diagonal(w, 0.0)
    dense = np.where(np.isfinite(w), w, 0.0)
    return shortest_path(csr_matrix(dense), method="D", directed=False)
