"""Reader, writer and generators for the ``.net`` text format.

Layout (one record per line, ``//`` starts a comment)::

    #SPNET
    #v <id> <x> <y> <b|t>
    #e <id> <start> <end> <n> <f(t)> <eta_inv(t)>

Optional extension records::

    #l <edge> <length>            explicit edge length (default: Euclidean)
    #c <vertex> <edge> <value>    transmission coefficient C_ij
    #g <vertex> <value>           vertex source g(x_i)
    #k <vertex> <edge> <value>    vertex-source split K_ij

``n`` is the number of interior grid nodes of the edge.
"""
from __future__ import annotations

import io
import logging
import math
import os
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Union

from .exprcalc import ExprSyntaxError, parse, to_string
from .netgraph import Edge, Kind, Network, Vertex, validate

__all__ = [
    "NetFile",
    "NetFileError",
    "HeaderError",
    "FormatError",
    "ReferenceError_",
    "NetValidationError",
    "read",
    "reads",
    "write",
    "writes",
    "generate",
    "test1",
    "test2",
    "test3",
    "star",
    "sierpinski",
    "random_network",
]

log = logging.getLogger(__name__)

HEADER = "#SPNET"
SUM_TOL = 1e-12


class NetFileError(ValueError):
    """Base class of ``.net`` reading errors."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class HeaderError(NetFileError):
    pass


class FormatError(NetFileError):
    pass


class ReferenceError_(NetFileError):
    """Reference to an undeclared vertex or edge id."""


class NetValidationError(NetFileError):
    def __init__(self, report):
        self.report = report
        super().__init__(f"network failed validation:\n{report}")


@dataclass
class NetFile:
    """A network plus optional vertex transmission data.

    ``coefficients`` maps internal vertex index -> {internal edge index: C_ij};
    ``vertex_sources`` maps vertex index -> g(x_i); ``source_split`` holds K_ij
    with the same layout as ``coefficients``.
    """

    network: Network
    coefficients: dict[int, dict[int, float]] = field(default_factory=dict)
    vertex_sources: dict[int, float] = field(default_factory=dict)
    source_split: dict[int, dict[int, float]] = field(default_factory=dict)

    def check(self) -> list[str]:
        problems = []
        net = self.network
        for name, table in (("C", self.coefficients), ("K", self.source_split)):
            for i, row in table.items():
                label = net.vertices[i].label
                if any(c <= 0 for c in row.values()):
                    problems.append(f"{name} coefficients at vertex {label} must be positive")
                if abs(sum(row.values()) - 1.0) > SUM_TOL:
                    problems.append(
                        f"{name} coefficients at vertex {label} sum to {sum(row.values())!r}, not 1"
                    )
                incident = {j for j, _ in net.incidence[i]}
                if not set(row) <= incident:
                    problems.append(f"{name} coefficients at vertex {label} name non-incident edges")
        for i, g in self.vertex_sources.items():
            label = net.vertices[i].label
            if g < 0:
                problems.append(f"vertex source at {label} is negative")
            if net.vertices[i].is_boundary:
                problems.append(f"vertex source at boundary vertex {label}")
        return problems


# ---------------------------------------------------------------------------
# Reading


def _split_expressions(tokens: list[str], lineno: int) -> tuple[str, str]:
    if len(tokens) == 2:
        return tokens[0], tokens[1]
    candidates = []
    for k in range(1, len(tokens)):
        left, right = " ".join(tokens[:k]), " ".join(tokens[k:])
        try:
            parse(left)
            parse(right)
        except ExprSyntaxError:
            continue
        candidates.append((left, right))
    if len(candidates) != 1:
        what = "cannot split" if not candidates else "ambiguous split of"
        raise FormatError(f"{what} f(t) / eta_inv(t) fields; avoid spaces in formulas", lineno)
    return candidates[0]


def _num(text: str, lineno: int, what: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise FormatError(f"{what}: not a number: {text!r}", lineno) from None
    if not math.isfinite(value):
        raise FormatError(f"{what}: not finite: {text!r}", lineno)
    return value


def _int(text: str, lineno: int, what: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise FormatError(f"{what}: not an integer: {text!r}", lineno) from None


def reads(text: str, strict: bool = False, check: bool = True) -> NetFile:
    """Parse ``.net`` text. See :func:`read`."""
    lines = text.splitlines()
    if not lines or lines[0].split("//", 1)[0].strip() != HEADER:
        raise HeaderError(f"missing {HEADER} header", 1)

    vertex_rows: list[tuple[int, int, float, float, str]] = []
    edge_rows: list[tuple[int, int, int, int, int, str, str]] = []
    lengths: list[tuple[int, int, float]] = []
    coeffs: list[tuple[int, int, int, float]] = []
    gs: list[tuple[int, int, float]] = []
    ks: list[tuple[int, int, int, float]] = []

    for lineno, raw in enumerate(lines[1:], start=2):
        body = raw
        if "//" in body:
            if strict:
                log.warning("line %d: comment ignored in strict mode", lineno)
            body = body.split("//", 1)[0]
        body = body.strip()
        if not body:
            continue
        tokens = body.split()
        tag = tokens[0]
        if tag == "#v":
            if len(tokens) != 5:
                raise FormatError("vertex line needs: #v <id> <x> <y> <b|t>", lineno)
            kind = tokens[4]
            if kind not in ("b", "t"):
                raise FormatError(f"vertex type must be 'b' or 't', got {kind!r}", lineno)
            vertex_rows.append(
                (
                    lineno,
                    _int(tokens[1], lineno, "vertex id"),
                    _num(tokens[2], lineno, "x"),
                    _num(tokens[3], lineno, "y"),
                    kind,
                )
            )
        elif tag == "#e":
            if len(tokens) < 7:
                raise FormatError(
                    "edge line needs: #e <id> <start> <end> <n> <f(t)> <eta_inv(t)>", lineno
                )
            f_text, eta_text = _split_expressions(tokens[5:], lineno)
            edge_rows.append(
                (
                    lineno,
                    _int(tokens[1], lineno, "edge id"),
                    _int(tokens[2], lineno, "start"),
                    _int(tokens[3], lineno, "end"),
                    _int(tokens[4], lineno, "n"),
                    f_text,
                    eta_text,
                )
            )
        elif tag in ("#l", "#c", "#g", "#k"):
            if strict:
                log.warning("line %d: extension record %s ignored in strict mode", lineno, tag)
                continue
            arity = {"#l": 3, "#c": 4, "#g": 3, "#k": 4}[tag]
            if len(tokens) != arity:
                raise FormatError(f"{tag} record needs {arity - 1} fields", lineno)
            if tag == "#l":
                lengths.append((lineno, _int(tokens[1], lineno, "edge id"), _num(tokens[2], lineno, "length")))
            elif tag == "#g":
                gs.append((lineno, _int(tokens[1], lineno, "vertex id"), _num(tokens[2], lineno, "g")))
            else:
                row = (
                    lineno,
                    _int(tokens[1], lineno, "vertex id"),
                    _int(tokens[2], lineno, "edge id"),
                    _num(tokens[3], lineno, "coefficient"),
                )
                (coeffs if tag == "#c" else ks).append(row)
        else:
            raise FormatError(f"unknown record {tag!r}", lineno)

    vindex: dict[int, int] = {}
    vertices = []
    for lineno, vid, x, y, kind in vertex_rows:
        if vid in vindex:
            raise FormatError(f"duplicate vertex id {vid}", lineno)
        vindex[vid] = len(vertices)
        vertices.append(Vertex(x, y, Kind(kind), vid))

    explicit = {}
    for lineno, eid, length in lengths:
        explicit[eid] = (lineno, length)

    eindex: dict[int, int] = {}
    edges = []
    for lineno, eid, a, b, n, f_text, eta_text in edge_rows:
        if eid in eindex:
            raise FormatError(f"duplicate edge id {eid}", lineno)
        for end in (a, b):
            if end not in vindex:
                raise ReferenceError_(f"edge {eid} refers to undeclared vertex {end}", lineno)
        try:
            f_expr, eta_expr = parse(f_text), parse(eta_text)
        except ExprSyntaxError as exc:
            raise FormatError(f"bad formula: {exc}", lineno) from None
        va, vb = vertices[vindex[a]], vertices[vindex[b]]
        length = explicit.pop(eid, (None, math.hypot(vb.x - va.x, vb.y - va.y)))[1]
        eindex[eid] = len(edges)
        edges.append(Edge(vindex[a], vindex[b], length, f_expr, eta_expr, n, eid))
    for eid, (lineno, _) in explicit.items():
        raise ReferenceError_(f"#l refers to undeclared edge {eid}", lineno)

    network = Network(tuple(vertices), tuple(edges))

    def _ref(lineno, vid, eid=None):
        if vid not in vindex:
            raise ReferenceError_(f"undeclared vertex {vid}", lineno)
        if eid is not None and eid not in eindex:
            raise ReferenceError_(f"undeclared edge {eid}", lineno)
        return vindex[vid], (eindex[eid] if eid is not None else None)

    netfile = NetFile(network)
    for lineno, vid, eid, value in coeffs:
        i, j = _ref(lineno, vid, eid)
        netfile.coefficients.setdefault(i, {})[j] = value
    for lineno, vid, eid, value in ks:
        i, j = _ref(lineno, vid, eid)
        netfile.source_split.setdefault(i, {})[j] = value
    for lineno, vid, value in gs:
        i, _ = _ref(lineno, vid)
        netfile.vertex_sources[i] = value

    if check:
        report = validate(network)
        for problem in netfile.check():
            report.add("transmission", problem)
        if not report.ok:
            raise NetValidationError(report)
    return netfile


def read(source: Union[str, os.PathLike, io.IOBase, bytes], strict: bool = False, check: bool = True) -> NetFile:
    """Read a ``.net`` file from a path, a byte/text stream or raw bytes.

    ``strict`` ignores (with a warning) the comment and extension syntax.
    Raises HeaderError, FormatError, ReferenceError_ or NetValidationError.
    """
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, (str, os.PathLike)):
        text = Path(source).read_text(encoding="utf-8")
    else:
        data = source.read()
        text = data.decode("utf-8") if isinstance(data, bytes) else data
    return reads(text, strict=strict, check=check)


# ---------------------------------------------------------------------------
# Writing


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def writes(netfile: Union[NetFile, Network]) -> str:
    """Canonical text form of a network (reals with 17 significant digits)."""
    if isinstance(netfile, Network):
        netfile = NetFile(netfile)
    net = netfile.network
    out = [HEADER]
    for v in net.vertices:
        out.append(f"#v {v.label} {_fmt(v.x)} {_fmt(v.y)} {v.kind.value}")
    for e in net.edges:
        a, b = net.vertices[e.start], net.vertices[e.end]
        out.append(
            f"#e {e.label} {a.label} {b.label} {e.n_nodes} {to_string(e.f)} {to_string(e.eta_inv)}"
        )
    for e in net.edges:
        a, b = net.vertices[e.start], net.vertices[e.end]
        if e.length != math.hypot(b.x - a.x, b.y - a.y):
            out.append(f"#l {e.label} {_fmt(e.length)}")
    for tag, table in (("#c", netfile.coefficients), ("#k", netfile.source_split)):
        for i in sorted(table):
            for j in sorted(table[i]):
                out.append(
                    f"{tag} {net.vertices[i].label} {net.edges[j].label} {_fmt(table[i][j])}"
                )
    for i in sorted(netfile.vertex_sources):
        out.append(f"#g {net.vertices[i].label} {_fmt(netfile.vertex_sources[i])}")
    return "\n".join(out) + "\n"


def write(netfile: Union[NetFile, Network], target=None) -> bytes:
    """Serialize to UTF-8 bytes; also write them to ``target`` (path or stream) if given."""
    data = writes(netfile).encode("utf-8")
    if target is None:
        return data
    if isinstance(target, (str, os.PathLike)):
        Path(target).write_bytes(data)
    else:
        try:
            target.write(data)
        except TypeError:
            target.write(data.decode("utf-8"))
    return data


# ---------------------------------------------------------------------------
# Generators


def _cells(length: float, h: float) -> int:
    return max(1, math.ceil(length / h - 1e-9))


def test1(h: float = 0.01) -> NetFile:
    """Three-edge star: x0 transition, x1..x3 boundary, eta == 1.

    Edges run from x0 outward; e1, e2 have length 1/2 and e3 length 1. The
    source is 1 - 2s on e1, e2 and 1 - s on e3 (s = arclength), i.e. 1 - t in
    the normalized parameter on every edge.
    """
    verts = [(0.0, 0.0, "t"), (-0.5, 0.0, "b"), (0.0, 0.5, "b"), (1.0, 0.0, "b")]
    edges = []
    for j, length in ((1, 0.5), (2, 0.5), (3, 1.0)):
        edges.append(
            dict(start=0, end=j, length=length, f="1-t", eta_inv="1",
                 n_nodes=_cells(length, h) - 1, label=j)
        )
    return NetFile(Network.build(verts, edges))


def test2(h: float = 0.01) -> NetFile:
    """Test-1 geometry plus e4 = x2->x1 and e5 = x1->x3; only x3 is boundary.

    Source 2*chi(|t-1/4| <= 1/8) on e4, eta_inv = 1/5 on e3, 1 elsewhere.
    Lengths of e4 and e5 follow from the vertex coordinates.
    """
    verts = [(0.0, 0.0, "t"), (-0.5, 0.0, "t"), (0.0, 0.5, "t"), (1.0, 0.0, "b")]
    spec = [
        (1, 0, 1, 0.5, "0", "1"),
        (2, 0, 2, 0.5, "0", "1"),
        (3, 0, 3, 1.0, "0", "1/5"),
        (4, 2, 1, None, "2*chi(abs(t-1/4)<=1/8)", "1"),
        (5, 1, 3, None, "0", "1"),
    ]
    net = _assemble(verts, spec, h)
    return NetFile(net)


def test3(h: float = 0.01) -> NetFile:
    """Level-2 Sierpinski gasket with unit sides; corners x0, x1, x2 are boundary.

    x3, x4, x5 are the midpoints of x0x1, x1x2, x2x0. The inner triangle
    edges are e7 = x3x4, e8 = x4x5, e9 = x5x3; the source
    2*chi(|t-1/2| <= 1/8) sits on e7 and e8.
    """
    s3 = math.sqrt(3.0)
    verts = [
        (0.0, 0.0, "b"),
        (2.0, 0.0, "b"),
        (1.0, s3, "b"),
        (1.0, 0.0, "t"),
        (1.5, s3 / 2, "t"),
        (0.5, s3 / 2, "t"),
    ]
    src = "2*chi(abs(t-1/2)<=1/8)"
    spec = [
        (1, 0, 3, 1.0, "0", "1"),
        (2, 3, 1, 1.0, "0", "1"),
        (3, 1, 4, 1.0, "0", "1"),
        (4, 4, 2, 1.0, "0", "1"),
        (5, 2, 5, 1.0, "0", "1"),
        (6, 5, 0, 1.0, "0", "1"),
        (7, 3, 4, 1.0, src, "1"),
        (8, 4, 5, 1.0, src, "1"),
        (9, 5, 3, 1.0, "0", "1"),
    ]
    return NetFile(_assemble(verts, spec, h))


def _assemble(verts, spec, h) -> Network:
    edges = []
    for label, a, b, length, f, eta in spec:
        if length is None:
            length = math.hypot(verts[b][0] - verts[a][0], verts[b][1] - verts[a][1])
        edges.append(
            dict(start=a, end=b, length=length, f=f, eta_inv=eta,
                 n_nodes=_cells(length, h) - 1, label=label)
        )
    return Network.build(verts, edges)


def star(arms: int = 3, lengths: Iterable[float] | None = None, f="0", eta_inv="1", h: float = 0.01) -> NetFile:
    """Star with a transition hub (vertex 0) and ``arms`` boundary leaves."""
    if arms < 3:
        raise ValueError("a star needs at least 3 arms")
    lengths = [1.0] * arms if lengths is None else [float(x) for x in lengths]
    if len(lengths) != arms:
        raise ValueError(f"expected {arms} lengths, got {len(lengths)}")
    if any(not (x > 0) for x in lengths):
        raise ValueError("arm lengths must be positive")
    verts = [(0.0, 0.0, "t")]
    edges = []
    for k, length in enumerate(lengths):
        ang = 2 * math.pi * k / arms
        verts.append((length * math.cos(ang), length * math.sin(ang), "b"))
        edges.append(dict(start=0, end=k + 1, length=length, f=f, eta_inv=eta_inv,
                          n_nodes=_cells(length, h) - 1, label=k + 1))
    return NetFile(Network.build(verts, edges))


def sierpinski(level: int = 2, side: float = 2.0, f="0", eta_inv="1", h: float = 0.01) -> NetFile:
    """Level-``level`` Sierpinski pre-fractal; the three corners are boundary.

    Level 1 is a single triangle; level 2 has 6 vertices and 9 edges.
    """
    if level < 1:
        raise ValueError("level must be >= 1")
    s3 = math.sqrt(3.0)
    corners = [(0.0, 0.0), (side, 0.0), (side / 2, side * s3 / 2)]

    triangles = [tuple(corners)]
    for _ in range(level - 1):
        nxt = []
        for a, b, c in triangles:
            ab = ((a[0] + b[0]) / 2, (a[1] + b[1]) / 2)
            bc = ((b[0] + c[0]) / 2, (b[1] + c[1]) / 2)
            ca = ((c[0] + a[0]) / 2, (c[1] + a[1]) / 2)
            nxt += [(a, ab, ca), (ab, b, bc), (ca, bc, c)]
        triangles = nxt

    index: dict[tuple[int, int], int] = {}
    points: list[tuple[float, float]] = []

    def vid(p):
        key = (round(p[0] * 1e9), round(p[1] * 1e9))
        if key not in index:
            index[key] = len(points)
            points.append(p)
        return index[key]

    for c in corners:
        vid(c)
    pairs = []
    seen = set()
    for tri in triangles:
        ids = [vid(p) for p in tri]
        for a, b in ((ids[0], ids[1]), (ids[1], ids[2]), (ids[2], ids[0])):
            if frozenset((a, b)) not in seen:
                seen.add(frozenset((a, b)))
                pairs.append((a, b))
    verts = [(x, y, "b" if k < 3 else "t") for k, (x, y) in enumerate(points)]
    edges = []
    for label, (a, b) in enumerate(pairs, start=1):
        length = math.hypot(points[b][0] - points[a][0], points[b][1] - points[a][1])
        edges.append(dict(start=a, end=b, length=length, f=f, eta_inv=eta_inv,
                          n_nodes=_cells(length, h) - 1, label=label))
    return NetFile(Network.build(verts, edges))


def random_network(seed: int, max_vertices: int = 8, max_edges: int = 12, h: float = 0.02) -> NetFile:
    """Seeded random connected network with smooth positive eta and a mixed source."""
    rng = random.Random(seed)
    nv = rng.randint(3, max_vertices)
    while True:
        pts = [(rng.uniform(0, 2), rng.uniform(0, 2)) for _ in range(nv)]
        dmin = min(
            math.dist(p, q) for k, p in enumerate(pts) for q in pts[k + 1:]
        )
        if dmin > 0.15:
            break
    order = list(range(nv))
    rng.shuffle(order)
    pairs = []
    for k in range(1, nv):
        pairs.append((order[rng.randrange(k)], order[k]))
    existing = {frozenset(p) for p in pairs}
    target = rng.randint(nv - 1, max(nv - 1, min(max_edges, nv * (nv - 1) // 2)))
    attempts = 0
    while len(pairs) < target and attempts < 200:
        attempts += 1
        a, b = rng.sample(range(nv), 2)
        if frozenset((a, b)) not in existing:
            existing.add(frozenset((a, b)))
            pairs.append((a, b))
    degree = [0] * nv
    for a, b in pairs:
        degree[a] += 1
        degree[b] += 1
    kinds = ["b" if degree[i] == 1 or rng.random() < 0.25 else "t" for i in range(nv)]
    if "b" not in kinds:
        kinds[rng.randrange(nv)] = "b"
    verts = [(x, y, k) for (x, y), k in zip(pts, kinds)]
    edges = []
    for label, (a, b) in enumerate(pairs, start=1):
        length = math.dist(pts[a], pts[b])
        base = round(rng.uniform(0.5, 2.0), 3)
        amp = round(rng.uniform(0.0, 0.45) * base, 3)
        freq = round(rng.uniform(1.0, 6.0), 3)
        eta = f"{base}+{amp}*sin({freq}*t)"
        choice = rng.random()
        if choice < 0.3:
            f = "0"
        elif choice < 0.7:
            f = f"{round(rng.uniform(0, 2), 3)}+{round(rng.uniform(0, 1), 3)}*t"
        else:
            c = round(rng.uniform(0.2, 0.8), 3)
            f = f"chi(abs(t-{c})<=0.15)"
        edges.append(dict(start=a, end=b, length=length, f=f, eta_inv=eta,
                          n_nodes=_cells(length, h) - 1, label=label))
    return NetFile(Network.build(verts, edges))


def generate(kind: str, **params) -> NetFile:
    """Dispatch to a named generator: test1, test2, test3, star, sierpinski, random."""
    table = {
        "test1": test1,
        "test2": test2,
        "test3": test3,
        "star": star,
        "sierpinski": sierpinski,
        "random": random_network,
    }
    try:
        fn = table[kind.lower()]
    except KeyError:
        raise ValueError(f"unknown generator {kind!r}; choose from {sorted(table)}") from None
    return fn(**params)
