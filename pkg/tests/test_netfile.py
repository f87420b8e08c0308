import io
import logging
import math
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sandnet import netfile as nf
from sandnet.netgraph import validate

FIXTURES = Path(__file__).parent / "fixtures"

TEST1_TEXT = """\
#SPNET
#v 0 0 0 t
#v 1 -0.5 0 b
#v 2 0 0.5 b
#v 3 1 0 b
#e 1 0 1 49 1.0-t 1.0
#e 2 0 2 49 1.0-t 1.0
#e 3 0 3 99 1.0-t 1.0
"""


def test_test1_text_is_frozen():
    assert nf.writes(nf.test1()) == TEST1_TEXT


def test_test1_geometry():
    net = nf.test1().network
    assert [e.length for e in net.edges] == [0.5, 0.5, 1.0]
    assert [v.is_boundary for v in net.vertices] == [False, True, True, True]


def test_test2_geometry():
    net = nf.test2().network
    assert net.n_vertices == 4 and net.n_edges == 5
    assert [v.is_boundary for v in net.vertices] == [False, False, False, True]
    e4 = net.edges[net.edge_index(4)]
    assert e4.length == pytest.approx(math.sqrt(0.5))
    assert float(e4.f(0.25)) == 2.0 and float(e4.f(0.5)) == 0.0
    assert float(net.edges[net.edge_index(3)].eta_inv(0.3)) == pytest.approx(0.2)


def test_test3_is_level_two_gasket():
    net = nf.test3().network
    assert (net.n_vertices, net.n_edges) == (6, 9)
    assert sorted(e.length for e in net.edges) == pytest.approx([1.0] * 9)
    assert len(net.boundary) == 3


@pytest.mark.parametrize("level, counts", [(1, (3, 3)), (2, (6, 9)), (3, (15, 27))])
def test_sierpinski_counts(level, counts):
    net = nf.sierpinski(level).network
    assert (net.n_vertices, net.n_edges) == counts
    assert validate(net).ok


def test_star():
    net = nf.star(5, lengths=[1, 2, 3, 4, 5]).network
    assert net.n_vertices == 6 and net.degree(0) == 5
    assert [e.length for e in net.edges] == pytest.approx([1, 2, 3, 4, 5])
    with pytest.raises(ValueError):
        nf.star(2)


def test_random_networks_are_reproducible_and_valid():
    for seed in range(20):
        a, b = nf.random_network(seed), nf.random_network(seed)
        assert nf.writes(a) == nf.writes(b)
        net = a.network
        assert net.n_vertices <= 8 and net.n_edges <= 12
        assert validate(net).ok


def _all_generated():
    out = [nf.test1(), nf.test2(), nf.test3(), nf.star(4), nf.sierpinski(3)]
    out += [nf.random_network(s) for s in range(10)]
    return out


@pytest.mark.parametrize("index", range(15))
def test_round_trip_identity(index):
    original = _all_generated()[index]
    text = nf.writes(original)
    back = nf.reads(text)
    assert back.network == original.network
    assert nf.writes(back) == text


def test_write_targets(tmp_path):
    data = nf.write(nf.test1(), tmp_path / "a.net")
    assert (tmp_path / "a.net").read_bytes() == data
    buf = io.BytesIO()
    nf.write(nf.test1(), buf)
    assert buf.getvalue() == data
    sbuf = io.StringIO()
    nf.write(nf.test1(), sbuf)
    assert sbuf.getvalue().encode() == data
    assert nf.read(data).network == nf.test1().network
    assert nf.read(io.BytesIO(data)).network == nf.test1().network


def test_extensions_round_trip():
    text = (
        "#SPNET\n"
        "#v 0 0 0 b\n#v 1 1 0 t\n#v 2 2 0 b\n#v 3 1 1 b\n"
        "#e 1 1 0 9 1 1\n#e 2 1 2 9 1 1\n#e 3 1 3 9 0 1\n"
        "#l 3 2.5\n#c 1 1 0.25\n#c 1 2 0.75\n#g 1 0.5\n#k 1 1 0.5\n#k 1 2 0.5\n"
    )
    n = nf.reads(text)
    assert n.network.edges[2].length == 2.5
    assert n.coefficients == {1: {0: 0.25, 1: 0.75}}
    assert n.vertex_sources == {1: 0.5}
    assert n.source_split == {1: {0: 0.5, 1: 0.5}}
    again = nf.reads(nf.writes(n))
    assert (again.coefficients, again.vertex_sources, again.source_split) == (
        n.coefficients, n.vertex_sources, n.source_split)
    assert again.network == n.network


def test_comments_and_strict_mode(caplog):
    text = (FIXTURES / "path_extensions.net").read_text()
    loose = nf.reads(text)
    assert loose.network.edges[1].length == 2.5
    with caplog.at_level(logging.WARNING, logger="sandnet.netfile"):
        strict = nf.reads(text, strict=True)
    assert strict.network.edges[1].length == 2.0
    assert any("strict" in r.message for r in caplog.records)


def test_expression_split_with_spaces():
    n = nf.reads("#SPNET\n#v 0 0 0 b\n#v 1 1 0 b\n#e 1 0 1 9 2 * t + 1   1 / 2\n")
    e = n.network.edges[0]
    assert float(e.f(0.5)) == 2.0 and float(e.eta_inv(0.5)) == 0.5


def test_ambiguous_split_is_an_error():
    with pytest.raises(nf.FormatError, match="ambiguous"):
        nf.reads("#SPNET\n#v 0 0 0 b\n#v 1 1 0 b\n#e 1 0 1 9 t -1 -1\n")


@pytest.mark.parametrize(
    "name, error, line",
    [
        ("bad_header.net", nf.HeaderError, 1),
        ("bad_line.net", nf.FormatError, 5),
        ("bad_reference.net", nf.ReferenceError_, 6),
    ],
)
def test_malformed_fixtures(name, error, line):
    with pytest.raises(error) as info:
        nf.read(FIXTURES / name)
    assert info.value.line == line


def test_validation_failure_carries_report():
    with pytest.raises(nf.NetValidationError) as info:
        nf.read(FIXTURES / "no_boundary.net")
    assert "no-boundary" in info.value.report.codes()
    assert nf.read(FIXTURES / "no_boundary.net", check=False).network.n_edges == 1


@pytest.mark.parametrize(
    "text, error",
    [
        ("#SPNET\n#v 0 0 0 q\n", nf.FormatError),
        ("#SPNET\n#v 0 0 0\n", nf.FormatError),
        ("#SPNET\n#v 0 0 0 b\n#v 0 1 0 b\n", nf.FormatError),
        ("#SPNET\n#x 1\n", nf.FormatError),
        ("#SPNET\n#v 0 0 0 b\n#v 1 1 0 b\n#e 1 0 1 9 (t 1\n", nf.FormatError),
        ("#SPNET\n#v 0 0 0 b\n#v 1 1 0 b\n#e 1 0 1 9 1 1\n#l 7 2\n", nf.ReferenceError_),
        ("#SPNET\n#v 0 0 0 b\n#v 1 1 0 b\n#e 1 0 1 9 1 1\n#g 9 1\n", nf.ReferenceError_),
        ("#SPNET\n#v 0 0 0 b\n#v 1 1 0 b\n#e 1 0 1 9 1 1\n#c 0 1\n", nf.FormatError),
        ("", nf.HeaderError),
    ],
)
def test_malformed_text(text, error):
    with pytest.raises(error):
        nf.reads(text)


def test_transmission_checks():
    base = "#SPNET\n#v 0 0 0 b\n#v 1 1 0 t\n#v 2 2 0 b\n#e 1 1 0 9 1 1\n#e 2 1 2 9 1 1\n"
    with pytest.raises(nf.NetValidationError, match="sum to"):
        nf.reads(base + "#c 1 1 0.5\n#c 1 2 0.6\n")
    with pytest.raises(nf.NetValidationError, match="boundary"):
        nf.reads(base + "#g 0 1\n")


def test_generate_dispatch():
    assert nf.writes(nf.generate("test1")) == TEST1_TEXT
    with pytest.raises(ValueError, match="unknown generator"):
        nf.generate("torus")


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_round_trip_random_seeds(seed):
    n = nf.random_network(seed)
    assert nf.reads(nf.writes(n)).network == n.network
