"""Invariant audit of a solved network (used by ``sandnet check`` and the tests)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._config import base_tol
from .analysis import compute_uf, mass_balance
from .exprcalc import Chi, Expr, walk
from .pipeline import Solution
from .rolling import RollingField, flux_report

__all__ = [
    "CheckResult",
    "eikonal_residual",
    "check_distance",
    "check_structure",
    "check_projections",
    "check_rolling",
    "check_mass",
    "check_uf",
    "audit",
    "check_against_computed",
    "positive_rolling_nodes",
]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}" + (f"  ({self.detail})" if self.detail else "")


def eikonal_residual(solution: Solution) -> np.ndarray:
    """Per node ``min_y [delta(y) + Dist(x, y) eta_inv(x)] - delta(x)`` (0 on the boundary)."""
    field = solution.field
    grid = field.grid
    delta = field.delta
    best = np.full(grid.n_nodes, np.inf)
    for j, ids in enumerate(grid.nodes):
        t, inv = grid.params[j], grid.inv_eta[j]
        step = np.diff(t)
        fwd = delta[ids[1:]] + step * inv[:-1]      # x = ids[:-1], y = ids[1:]
        bwd = delta[ids[:-1]] + step * inv[1:]      # x = ids[1:],  y = ids[:-1]
        np.minimum.at(best, ids[:-1], fwd)
        np.minimum.at(best, ids[1:], bwd)
    res = best - delta
    res[solution.network.boundary] = 0.0
    return res


def check_distance(solution: Solution) -> list[CheckResult]:
    field = solution.field
    delta = field.delta
    tol = base_tol() * (1 + float(delta.max()))
    bnd = solution.network.boundary
    interior = np.setdiff1d(np.arange(len(delta)), bnd)
    res = np.abs(eikonal_residual(solution))
    parent = field.parent
    causal = all(delta[x] > delta[parent[x]] for x in interior)
    return [
        CheckResult("distance zero on boundary", bool(np.all(delta[bnd] == 0.0))),
        CheckResult("distance positive off boundary", bool(np.all(delta[interior] > 0.0))),
        CheckResult("discrete eikonal residual", bool(res.max() <= tol), f"max {res.max():.3g}"),
        CheckResult("monotone causality", causal),
    ]


def check_structure(solution: Solution) -> list[CheckResult]:
    st = solution.structure
    net = st.network
    out = []
    bad_count = [net.edges[j].label for j in range(net.n_edges) if len(st.singular[j]) > 1]
    out.append(CheckResult("#S_j in {0,1}", not bad_count, f"edges {bad_count}" if bad_count else ""))
    bad_pattern = []
    for j, sg in enumerate(st.slopes):
        changes = np.flatnonzero(sg[1:] != sg[:-1])
        if any(sg[c] != 1 or sg[c + 1] != -1 for c in changes):
            bad_pattern.append(net.edges[j].label)
    out.append(CheckResult("no interior local minimum", not bad_pattern,
                           f"edges {bad_pattern}" if bad_pattern else ""))
    bad_one = [
        net.edges[j].label
        for j in range(net.n_edges)
        if sorted((len(st.singular[j]), len(st.targets[j]))) != [0, 1]
    ]
    out.append(CheckResult("exactly one of S_j, T_j", not bad_one, f"edges {bad_one}" if bad_one else ""))
    bad_iii = []
    for j, e in enumerate(net.edges):
        a, b = st.sigma[(e.start, j)], st.sigma[(e.end, j)]
        ok = (len(st.singular[j]) == 0) == (a + b == 0) and (len(st.singular[j]) == 1) == (a == b == 1)
        if not ok:
            bad_iii.append(e.label)
    out.append(CheckResult("slopes vs singular points", not bad_iii, f"edges {bad_iii}" if bad_iii else ""))
    n_sing = sum(len(s) for s in st.singular)
    nplus = sum(len(x) for x in st.inc_plus)
    nminus = sum(len(x) for x in st.inc_minus)
    J = net.n_edges
    out.append(CheckResult("sum N+ - sum #S = #J", nplus - n_sing == J, f"{nplus} - {n_sing} vs {J}"))
    out.append(CheckResult("sum N- + sum #S = #J", nminus + n_sing == J, f"{nminus} + {n_sing} vs {J}"))
    total = n_sing + len(st.vertex_maxima)
    lo, hi = net.n_vertices - J, J - len(net.transition)
    out.append(CheckResult("singular-set cardinality bounds", lo <= total <= hi, f"{lo} <= {total} <= {hi}"))
    covered = sorted(j for cls in st.partition for j in cls)
    out.append(CheckResult("partition covers every edge once", covered == list(range(J))))
    return out


def check_projections(solution: Solution) -> list[CheckResult]:
    """Geodesic additivity along every projection walk.

    Interior steps add exactly ``step * eta_inv`` of the upper node. The last
    step may add less: a target vertex can take its value from another edge,
    and a singular node is reached more cheaply from its other side. That
    step is checked as an upper bound only.
    """
    st = solution.structure
    grid = st.grid
    tol = base_tol() * (1 + float(st.dfield.delta.max()))
    worst = 0.0
    ok = True
    for j in range(st.network.n_edges):
        vals = st.dfield.on_edge(j)
        t, inv = grid.params[j], grid.inv_eta[j]
        proj = st.projection_indices(j)
        for m in range(len(t)):
            p = int(proj[m])
            if p == m:
                continue
            k = np.arange(m, p, 1 if p > m else -1)
            nxt = k + (1 if p > m else -1)
            inc = vals[nxt] - vals[k]
            cost = np.abs(t[nxt] - t[k]) * inv[nxt]
            dev = np.abs(inc - cost)
            dev[-1] = max(0.0, inc[-1] - cost[-1])
            worst = max(worst, float(dev.max()))
            if np.any(inc <= 0):
                ok = False
    return [CheckResult("geodesic additivity along projections", ok and worst <= tol, f"max dev {worst:.3g}")]


def _has_indicator(expr: Expr) -> bool:
    return any(isinstance(node, Chi) for node in walk(expr))


def check_rolling(solution: Solution, rolling: RollingField | None = None) -> list[CheckResult]:
    rf = rolling or solution.rolling
    st = solution.structure
    net = st.network
    tol = base_tol() * (1 + rf.max_abs())
    neg = min(float(v.min()) for v in rf.values)
    zero_sing = max(
        [abs(float(rf.values[j][m])) for j in range(net.n_edges) for m in st.singular[j]] + [0.0]
    )
    zero_max = max(
        [abs(v) for i in st.vertex_maxima for v in rf.at_vertex(i).values()] + [0.0]
    )
    rows = flux_report(rf)
    worst = max([abs(r.residual) for r in rows] + [0.0])
    signed = max([abs(r.signed_sum + r.source) for r in rows] + [0.0])
    return [
        CheckResult("rolling layer non-negative", neg >= 0.0, f"min {neg:.3g}"),
        CheckResult("rolling layer zero on singular set", max(zero_sing, zero_max) <= tol,
                    f"max {max(zero_sing, zero_max):.3g}"),
        CheckResult("flux conservation at transition vertices", max(worst, signed) <= tol,
                    f"max residual {max(worst, signed):.3g}"),
    ]


def check_mass(solution: Solution) -> CheckResult:
    """Boundary outflow vs poured mass, with a quadrature-error allowance."""
    out, poured = mass_balance(solution)
    h = solution.h
    rough = any(_has_indicator(e.f) for e in solution.network.edges)
    if rough:
        fmax = max(float(np.max(e.source(np.linspace(0, e.length, 2001)))) for e in solution.network.edges)
        bound = 2 * h * fmax * solution.network.n_edges
    else:
        bound = 10 * h * h
    err = abs(out - poured)
    return CheckResult("global mass balance", err <= bound,
                       f"|{out:.12g} - {poured:.12g}| = {err:.3g} <= {bound:.3g}")


def positive_rolling_nodes(solution: Solution) -> np.ndarray:
    """Mask of global nodes where some edge carries a positive rolling value."""
    grid = solution.structure.grid
    mask = np.zeros(grid.n_nodes, dtype=bool)
    for j, ids in enumerate(grid.nodes):
        mask[ids[solution.rolling.values[j] > 0]] = True
    return mask


def check_uf(solution: Solution) -> list[CheckResult]:
    uf = compute_uf(solution.structure)
    delta = solution.field.delta
    tol = base_tol() * (1 + float(delta.max()))
    pos = positive_rolling_nodes(solution)
    gap = float(np.max(np.abs(uf[pos] - delta[pos]))) if pos.any() else 0.0
    return [
        CheckResult("0 <= u^f <= distance", bool(uf.min() >= 0 and np.all(uf <= delta + tol))),
        CheckResult("u^f = distance where v > 0", gap <= tol, f"max gap {gap:.3g}"),
    ]


def audit(solution: Solution, rolling: RollingField | None = None) -> list[CheckResult]:
    """Run every invariant; ``rolling`` replaces the computed rolling layer (e.g. loaded from a file)."""
    results = check_distance(solution) + check_structure(solution) + check_projections(solution)
    results += check_rolling(solution, rolling)
    if rolling is None:
        results.append(check_mass(solution))
        results += check_uf(solution)
    else:
        results.append(check_against_computed(solution, rolling))
    return results


def check_against_computed(solution: Solution, rolling: RollingField) -> CheckResult:
    """Node-by-node comparison of a supplied rolling layer with the computed one."""
    tol = base_tol() * (1 + solution.rolling.max_abs())
    dev = max(float(np.max(np.abs(a - b))) for a, b in zip(rolling.values, solution.rolling.values))
    return CheckResult("rolling layer matches recomputation", dev <= tol, f"max deviation {dev:.3g}")
