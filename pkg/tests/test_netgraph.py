import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import vertex_distances_by_paths
from sandnet import netfile
from sandnet.netgraph import Kind, Network, edge_weight, validate, vertex_distance_matrix


def _path(kinds=("b", "t", "b"), **edge_kw):
    verts = [(float(i), 0.0, k) for i, k in enumerate(kinds)]
    edges = [dict(start=i, end=i + 1, **edge_kw) for i in range(len(kinds) - 1)]
    return Network.build(verts, edges)


def test_build_defaults():
    net = _path()
    e = net.edges[0]
    assert e.length == 1.0
    assert e.n_nodes == 99
    assert e.label == 1
    assert float(e.source(0.5)) == 0.0
    assert float(e.inv_eta(0.5)) == 1.0
    assert net.boundary == [0, 2]
    assert net.transition == [1]
    assert net.incidence[1] == ((0, 1), (1, 0))
    assert net.degree(1) == 2


def test_formulas_use_normalized_parameter():
    net = Network.build([(0, 0, "b"), (2, 0, "b")], [dict(start=0, end=1, f="t")])
    # arclength 1 on a length-2 edge is t = 1/2
    assert float(net.edges[0].source(1.0)) == 0.5


def test_explicit_length_overrides_geometry():
    net = Network.build([(0, 0, "b"), (1, 0, "b")], [dict(start=0, end=1, length=3.0)])
    assert net.edges[0].length == 3.0


def test_with_resolution_keeps_everything_else():
    net = netfile.test1().network
    fine = net.with_resolution([9, 9, 19])
    assert [e.n_nodes for e in fine.edges] == [9, 9, 19]
    assert [(e.start, e.end, e.length, e.f) for e in fine.edges] == [
        (e.start, e.end, e.length, e.f) for e in net.edges
    ]
    assert all(e.n_nodes == 4 for e in net.with_resolution(4).edges)


def test_label_lookup():
    net = netfile.test1().network
    assert net.edge_index(3) == 2
    assert net.vertex_index(0) == 0
    with pytest.raises(KeyError):
        net.edge_index(42)


@pytest.mark.parametrize("kind", ["test1", "test2", "test3"])
def test_reference_networks_are_valid(kind):
    assert validate(netfile.generate(kind).network).ok


@pytest.mark.parametrize(
    "verts, edges, code",
    [
        ([], [], "empty"),
        ([(0, 0, "t"), (1, 0, "t"), (0, 1, "t")], [dict(start=0, end=1), dict(start=1, end=2), dict(start=2, end=0)], "no-boundary"),
        ([(0, 0, "b"), (1, 0, "b")], [dict(start=0, end=5)], "bad-endpoint"),
        ([(0, 0, "b"), (1, 0, "b")], [dict(start=0, end=1), dict(start=1, end=1, length=1.0)], "self-loop"),
        ([(0, 0, "b"), (1, 0, "b")], [dict(start=0, end=1), dict(start=1, end=0)], "duplicate-edge"),
        ([(0, 0, "b"), (0, 0, "b")], [dict(start=0, end=1)], "length"),
        ([(0, 0, "b"), (1, 0, "b")], [dict(start=0, end=1, n_nodes=0)], "resolution"),
        ([(0, 0, "b"), (1, 0, "b")], [dict(start=0, end=1, eta_inv="t")], "eta"),
        ([(0, 0, "b"), (1, 0, "b")], [dict(start=0, end=1, eta_inv="1/(t-1/2)")], "eta"),
        ([(0, 0, "b"), (1, 0, "b")], [dict(start=0, end=1, f="t-1/2")], "source"),
        ([(0, 0, "b"), (1, 0, "b"), (5, 5, "b")], [dict(start=0, end=1)], "isolated"),
        ([(0, 0, "b"), (1, 0, "t")], [dict(start=0, end=1)], "degree-one"),
        ([(0, 0, "b"), (1, 0, "b"), (5, 0, "b"), (6, 0, "b")], [dict(start=0, end=1), dict(start=2, end=3)], "disconnected"),
    ],
)
def test_validation_codes(verts, edges, code):
    report = validate(Network.build(verts, edges))
    assert not report.ok
    assert code in report.codes()
    assert f"[{code}]" in str(report)


def test_edge_weight_trapezoid():
    net = _path(kinds=("b", "b"), eta_inv="1+t", n_nodes=1)
    # nodes at t = 0, 1/2, 1: trapezoid is exact for a linear integrand
    assert edge_weight(net.edges[0]) == pytest.approx(1.5, abs=1e-15)
    assert edge_weight(net.edges[0], n_nodes=0) == pytest.approx(1.5, abs=1e-15)


def test_vertex_distance_matrix_on_sierpinski():
    net = netfile.test3().network
    dist = vertex_distance_matrix(net)
    np.testing.assert_allclose(dist, dist.T)
    # opposite corners of a unit-side Sierpinski gasket are 2 apart
    assert dist[0, 1] == pytest.approx(2.0)
    assert dist[3, 4] == pytest.approx(1.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_distances_agree_with_path_enumeration(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(3, 6))
    pts = rng.uniform(0, 4, size=(k, 2))
    kinds = ["b"] + ["t"] * (k - 1)
    pairs = [(i, i + 1) for i in range(k - 1)] + [(0, k - 1)]
    if k > 3:
        pairs.append((1, 3))
    net = Network.build([(x, y, kd) for (x, y), kd in zip(pts, kinds)], [dict(start=a, end=b) for a, b in pairs])
    dist = vertex_distance_matrix(net)
    expected = vertex_distances_by_paths(net)
    np.testing.assert_allclose(dist[0], expected, rtol=1e-12)


def test_kind_values():
    assert Kind("b") is Kind.BOUNDARY
    assert not Network.build([(0, 0, "t"), (1, 0, "b")], [dict(start=0, end=1)]).vertices[0].is_boundary
    assert math.isclose(netfile.test1().network.edges[2].length, 1.0)
