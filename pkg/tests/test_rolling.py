import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sandnet import netfile as nf
from sandnet.analysis import TEST1_EXACT
from sandnet.eikonal import solve_network
from sandnet.pipeline import solve
from sandnet.rolling import TransmissionSpec, boundary_outflow, compute, flux_report, flux_tolerance


@pytest.fixture(scope="module")
def test1():
    return solve(nf.test1().network)


def test_test1_vertex_values(test1):
    at0 = test1.rolling.at_vertex(0)
    assert at0[0] == pytest.approx(7 / 64, abs=1e-15)
    assert at0[1] == pytest.approx(7 / 64, abs=1e-15)
    assert at0[2] == pytest.approx(7 / 32, abs=1e-15)
    assert test1.rolling.inflow[0] == pytest.approx(7 / 32, abs=1e-15)


def test_test1_matches_closed_form_at_nodes(test1):
    for j in range(3):
        s = test1.structure.grid.params[j]
        np.testing.assert_allclose(test1.rolling.values[j], TEST1_EXACT.v(j, s), atol=1e-14)


def test_test1_singular_point_is_empty(test1):
    (m,) = test1.structure.singular[2]
    assert test1.rolling.values[2][m] == 0.0


def test_processing_order(test1):
    # the edge with the interior maximum first, then the edges fed by x0
    assert test1.rolling.order == [2, 0, 1]


def test_test2_frozen():
    sol = solve(nf.test2().network)
    net, rf = sol.network, sol.rolling
    peak = 0.3585330158128973
    zero = [net.edges[j].label for j, v in enumerate(rf.values) if not v.any()]
    assert zero == [1, 5]
    assert rf.at_vertex(net.vertex_index(2)) == pytest.approx({1: peak, 3: peak})
    assert rf.at_vertex(net.vertex_index(0)) == pytest.approx({0: 0.0, 1: peak, 2: peak})
    e4 = net.edge_index(4)
    # sand on e4 sits below its midpoint, so the upper half carries none
    assert np.all(rf.values[e4][sol.structure.grid.params[e4] > 0.36] == 0)
    assert boundary_outflow(rf) == pytest.approx(peak)


def test_test3_frozen():
    sol = solve(nf.test3().network)
    net, rf = sol.network, sol.rolling
    assert rf.at_vertex(0) == pytest.approx({0: 0.125, 5: 0.125})
    assert rf.at_vertex(4) == pytest.approx({2: 0.25, 3: 0.25, 6: 0.25, 7: 0.25})
    assert rf.at_vertex(3) == pytest.approx({0: 0.125, 1: 0.125, 6: 0.25, 8: 0.0})
    assert not rf.values[net.edge_index(9)].any()
    assert boundary_outflow(rf) == pytest.approx(1.0)


def test_custom_coefficients():
    base = nf.test1()
    base.coefficients[0] = {0: 0.25, 1: 0.75}
    sol = solve(base.network, TransmissionSpec.from_netfile(base))
    at0 = sol.rolling.at_vertex(0)
    assert at0[0] == pytest.approx(0.25 * 7 / 32)
    assert at0[1] == pytest.approx(0.75 * 7 / 32)
    assert max(abs(r.residual) for r in flux_report(sol.rolling)) <= flux_tolerance(sol.rolling)


def test_vertex_source_is_split():
    spec = TransmissionSpec(vertex_sources={0: 0.5}, source_split={0: {0: 0.2, 1: 0.8}})
    sol = solve(nf.test1().network, spec)
    at0 = sol.rolling.at_vertex(0)
    assert at0[0] == pytest.approx(7 / 64 + 0.1)
    assert at0[1] == pytest.approx(7 / 64 + 0.4)
    (row,) = flux_report(sol.rolling)
    assert row.source == 0.5 and abs(row.residual) < 1e-15
    assert boundary_outflow(sol.rolling) == pytest.approx(1.5)


@pytest.mark.parametrize(
    "spec, message",
    [
        (TransmissionSpec(coefficients={0: {0: 0.5, 2: 0.5}}), "downhill edges"),
        (TransmissionSpec(coefficients={0: {0: 0.5, 1: 0.6}}), "sum to 1"),
        (TransmissionSpec(coefficients={0: {0: 1.5, 1: -0.5}}), "positive"),
        (TransmissionSpec(vertex_sources={1: 1.0}), "boundary"),
        (TransmissionSpec(vertex_sources={0: -1.0}), "non-negative"),
    ],
)
def test_bad_transmission_data(spec, message):
    with pytest.raises(ValueError, match=message):
        compute(solve_network(nf.test1().network), spec)


def test_vertex_source_needs_downhill_edge():
    net = nf.test3().network
    s = solve_network(net)
    # a Sierpinski midpoint always has downhill edges; fake a vertex without any
    fake = dataclasses.replace(s, inc_minus=[[] for _ in s.inc_minus])
    with pytest.raises(ValueError, match="no downhill edge"):
        TransmissionSpec(vertex_sources={3: 1.0}).resolve(fake)


def test_cycle_is_detected():
    s = solve_network(nf.test1().network)
    looped = dataclasses.replace(s, inc_plus=[[0], [], [], []])
    with pytest.raises(AssertionError, match="no processing order"):
        compute(looped)


def test_interpolation(test1):
    rf = test1.rolling
    assert rf.interpolate(0, 0.0) == pytest.approx(7 / 64)
    assert rf.max_abs() == pytest.approx(max(float(v.max()) for v in rf.values))


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=100_000))
def test_random_rolling_invariants(seed):
    sol = solve(nf.random_network(seed).network)
    rf, s = sol.rolling, sol.structure
    assert min(float(v.min()) for v in rf.values) >= 0.0
    for j, idx in enumerate(s.singular):
        assert all(rf.values[j][m] == 0.0 for m in idx)
    tol = flux_tolerance(rf)
    for row in flux_report(rf):
        assert abs(row.residual) <= tol
        assert abs(row.signed_sum + row.source) <= tol
    assert sorted(rf.order) == list(range(sol.network.n_edges))
