import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sandnet import netfile as nf
from sandnet.analysis import (
    TEST1_EXACT,
    ErrorRow,
    compute_uf,
    convergence_study,
    errors_against,
    exact_solution_for,
    fit_order,
    mass_balance,
    network_source_integral,
    random_test_functions,
    uniqueness_check,
    weak_form_residual,
)
from sandnet.checks import positive_rolling_nodes
from sandnet.netgraph import Network
from sandnet.pipeline import cells_for, resample, solve


@pytest.fixture(scope="module")
def solved():
    return {k: solve(nf.generate(k).network) for k in ("test1", "test2", "test3")}


def test_exact_closed_forms_at_key_points():
    d, v = TEST1_EXACT.d, TEST1_EXACT.v
    assert d(0, 0.0) == 0.5 and d(2, 0.25) == 0.75 and d(2, 1.0) == 0.0
    assert v(0, 0.0) == 7 / 64 and v(2, 0.0) == 7 / 32 and v(2, 0.25) == 0.0
    assert v(0, 0.5) == pytest.approx(0.359375)
    assert v(2, 1.0) == pytest.approx(0.28125)


def test_exact_solution_lookup_ignores_resolution():
    assert exact_solution_for(nf.test1(h=0.3).network) is TEST1_EXACT
    assert exact_solution_for(nf.test2().network) is None
    assert exact_solution_for(nf.test3().network) is None


@pytest.mark.parametrize("kind, unique", [("test1", True), ("test2", False), ("test3", False)])
def test_uniqueness_verdicts(solved, kind, unique):
    assert uniqueness_check(solved[kind]).unique is unique


def test_test3_failure_is_on_e9(solved):
    sol = solved["test3"]
    report = uniqueness_check(sol)
    (bad,) = report.failing
    assert (bad.kind, sol.network.edges[bad.index].label) == ("edge", 9)
    assert bad.param == pytest.approx(0.5)
    assert [sol.network.edges[j].label for j in report.zero_edges] == [9]
    assert "edge 9 at s=0.5" in bad.describe(sol.network)
    assert len(report.nonunique_nodes) > 0


def test_uniqueness_from_structure_only(solved):
    report = uniqueness_check(solved["test1"].structure)
    assert report.unique and report.zero_edges == []


@pytest.mark.parametrize("kind", ["test1", "test2", "test3"])
def test_uf_properties(solved, kind):
    sol = solved[kind]
    uf = compute_uf(sol.structure)
    delta = sol.field.delta
    tol = 1e-12 * (1 + delta.max())
    assert uf.min() >= 0 and np.all(uf <= delta + tol)
    pos = positive_rolling_nodes(sol)
    assert np.max(np.abs(uf[pos] - delta[pos])) <= tol


def test_uf_equals_distance_for_positive_source(solved):
    sol = solved["test1"]
    np.testing.assert_allclose(compute_uf(sol.structure), sol.field.delta, atol=1e-12)


def test_uf_empty_source():
    net = Network.build([(0, 0, "b"), (1, 0, "t"), (2, 0, "b")], [dict(start=0, end=1), dict(start=1, end=2)])
    sol = solve(net)
    assert not compute_uf(sol.structure).any()


def test_errors_at_nodes_vanish_on_test1(solved):
    row = errors_against(solved["test1"], exact=TEST1_EXACT, at_nodes=True)
    assert max(row.linf_d, row.l1_d, row.linf_v, row.l1_v) <= 1e-12


def test_self_comparison_is_zero(solved):
    row = errors_against(solved["test3"], reference=solved["test3"], samples_per_edge=500)
    assert row.as_tuple()[1:] == (0.0, 0.0, 0.0, 0.0)


def test_error_arguments():
    sol = solve(nf.test1(h=0.1).network)
    with pytest.raises(ValueError, match="exactly one"):
        errors_against(sol)
    with pytest.raises(ValueError, match="different network"):
        errors_against(sol, reference=solve(nf.test3(h=0.1).network))


def test_fit_order():
    h = np.array([0.1, 0.05, 0.025, 0.0125])
    assert fit_order(h, 3 * h**2) == pytest.approx(2.0)
    assert np.isnan(fit_order(h, np.zeros(4)))


def test_cells_for_modes():
    assert cells_for(1.0, 0.1) == 10
    assert cells_for(1.0, 0.1, "odd") == 11
    assert cells_for(0.5, 0.1, "quarter") == 8
    assert cells_for(1.0, 0.3) == 4
    with pytest.raises(ValueError):
        cells_for(1.0, 0.1, "bogus")
    with pytest.raises(ValueError):
        cells_for(1.0, 0.0)
    assert [e.n_nodes for e in resample(nf.test1().network, 0.25, "odd").edges] == [2, 2, 4]


def test_convergence_needs_two_steps():
    with pytest.raises(ValueError, match="need >= 2 steps"):
        convergence_study(nf.test1().network, [0.1])
    with pytest.raises(ValueError, match="need >= 2 steps"):
        convergence_study(nf.test1().network, [0.1, 0.1])


def test_reference_study_on_test3():
    table = convergence_study(nf.test3().network, [0.1, 0.05, 0.02, 0.01], samples_per_edge=1000)
    linf_v = table.column("linf_v")
    assert np.all(np.isfinite(table.column("linf_d")))
    assert np.all(linf_v > 0) and np.all(np.diff(linf_v) < 0)
    assert table.orders["linf_v"] > 0.75


def test_doubling_node_counts_halves_error():
    net = nf.test1().network
    rows = []
    for k in range(4):
        res = net.with_resolution(np.array([4, 4, 8]) * 2**k)
        rows.append(errors_against(solve(res), exact=TEST1_EXACT, samples_per_edge=4000))
    frozen = [0.04163540885221295, 0.02202756571495801, 0.011332378549182898, 0.005737972954778181]
    np.testing.assert_allclose([r.linf_d for r in rows], frozen, rtol=1e-9)
    for coarse, fine in zip(rows, rows[1:]):
        assert fine.linf_d <= coarse.linf_d / 2 * 1.5


def test_mass_balance_smooth_and_rough(solved):
    out, poured = mass_balance(solved["test1"])
    assert poured == pytest.approx(1.0, abs=1e-12)
    assert out == pytest.approx(1.0, abs=1e-12)
    out, poured = mass_balance(solved["test2"])
    assert poured == pytest.approx(np.sqrt(0.5) / 2, abs=1e-10)
    assert abs(out - poured) <= 2 * 0.01 * 2 * 5


def test_source_integral_with_indicator():
    assert network_source_integral(nf.test3().network) == pytest.approx(1.0, abs=1e-10)


def test_random_test_functions_vanish_on_boundary():
    net = nf.test3().network
    for psi in random_test_functions(net, 5, seed=3):
        for j, e in enumerate(net.edges):
            for i, s in ((e.start, 0.0), (e.end, e.length)):
                if net.vertices[i].is_boundary:
                    assert psi.on_edge(j, s) == 0.0


def test_weak_form_residual_shrinks():
    psis = random_test_functions(nf.test1().network, 20, seed=1)
    worst = []
    for h in (1 / 20, 1 / 40, 1 / 80):
        sol = solve(resample(nf.test1().network, h))
        worst.append(max(abs(weak_form_residual(sol, p)) for p in psis))
    assert worst[0] / worst[1] >= 1.8 and worst[1] / worst[2] >= 1.8


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=100_000))
def test_errors_are_non_negative(seed):
    net = nf.random_network(seed, h=0.1).network
    coarse = solve(net)
    fine = solve(resample(net, 0.02))
    row = errors_against(coarse, reference=fine, samples_per_edge=200)
    assert isinstance(row, ErrorRow)
    assert min(row.as_tuple()) >= 0
