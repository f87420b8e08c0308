"""``sandnet`` command line: solve, check, converge, gen.

Exit codes: 0 success, 1 parse error, 2 validation error, 3 I/O error,
4 invariant failure, 64 usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import netfile as nf
from ._config import base_tol
from .analysis import convergence_study, exact_solution_for, uniqueness_check
from .checks import audit
from .exprcalc import ExprEvalError, ExprSyntaxError
from .netgraph import validate
from .pipeline import GRID_MODES, Solution, resample, solve
from .plotting import gnuplot_script, svg_plan
from .rolling import RollingField, TransmissionSpec, boundary_outflow, flux_report

log = logging.getLogger("sandnet")

EXIT_OK, EXIT_PARSE, EXIT_VALIDATION, EXIT_IO, EXIT_INVARIANT, EXIT_USAGE = 0, 1, 2, 3, 4, 64
DEFAULT_H_LIST = "1e-1,5e-2,2e-2,1e-2,5e-3,2e-3,1e-3"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive(text: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (np.isfinite(x) and x > 0):
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return x


def _h_list(text: str) -> list[float]:
    return [_positive(p.strip()) for p in text.split(",") if p.strip()]


# ---------------------------------------------------------------------------
# file helpers


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _atomic_write(path: Path, data: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def d_csv(solution: Solution) -> str:
    st = solution.structure
    rows = []
    for j, e in enumerate(solution.network.edges):
        s = st.grid.params[j]
        for sk, dk in zip(s, st.dfield.on_edge(j)):
            rows.append((e.label, _fmt(sk / e.length), _fmt(sk), _fmt(dk)))
    return _csv_text(["edge_id", "t", "s_arclength", "d_value"], rows)


def v_csv(solution: Solution) -> str:
    st, rf = solution.structure, solution.rolling
    rows = []
    for j, e in enumerate(solution.network.edges):
        for sk, vk in zip(st.grid.params[j], rf.values[j]):
            rows.append((e.label, _fmt(sk / e.length), _fmt(vk)))
    return _csv_text(["edge_id", "t", "v_value"], rows)


def read_v_csv(path: Path, solution: Solution) -> RollingField:
    """Rolling layer from a ``v.csv`` file laid out on the solution's grid."""
    net = solution.network
    st = solution.structure
    per_edge: dict[int, list[float]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["edge_id", "t", "v_value"]:
            raise nf.FormatError("expected header edge_id,t,v_value", 1)
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise nf.FormatError(f"expected 3 fields, got {len(row)}", lineno)
            try:
                j = net.edge_index(int(row[0]))
                per_edge.setdefault(j, []).append(float(row[2]))
            except (KeyError, ValueError) as exc:
                raise nf.FormatError(str(exc), lineno) from None
    values = []
    for j in range(net.n_edges):
        got = per_edge.get(j, [])
        want = len(st.grid.params[j])
        if len(got) != want:
            raise nf.FormatError(
                f"edge {net.edges[j].label}: {len(got)} rows, solution grid has {want}"
            )
        values.append(np.array(got))
    rf = solution.rolling
    return RollingField(st, values, rf.inflow, rf.coefficients, rf.source_split,
                        rf.vertex_sources, rf.order)


# ---------------------------------------------------------------------------
# report


def report_text(solution: Solution) -> str:
    net = solution.network
    st, rf = solution.structure, solution.rolling
    tol = base_tol() * (1 + rf.max_abs())
    elab = lambda js: "{" + ", ".join(f"e{net.edges[j].label}" for j in js) + "}"  # noqa: E731
    out = [
        f"sandnet {__version__} solution report",
        f"vertices {net.n_vertices}, edges {net.n_edges}, grid nodes {st.grid.n_nodes}, h {solution.h:.6g}",
        "",
        "singular points",
    ]
    uq = uniqueness_check(solution)
    for p in uq.singular_points:
        out.append(f"  {p.describe(net)}  source nearby: {'yes' if p.covered else 'no'}")
    if not uq.singular_points:
        out.append("  none")

    out += ["", "vertex slope sets"]
    for i, v in enumerate(net.vertices):
        if v.is_boundary:
            continue
        out.append(f"  x{v.label}: Inc+ = {elab(st.inc_plus[i])}  Inc- = {elab(st.inc_minus[i])}")

    out += ["", "flux balance at transition vertices (inflow + g - outflow)"]
    for row in flux_report(rf):
        out.append(
            f"  x{net.vertices[row.vertex].label}: in {row.inflow:.12g}  g {row.source:.12g}  "
            f"out {row.outflow:.12g}  residual {row.residual:.3g}"
        )
    out.append(f"  boundary outflow {boundary_outflow(rf):.12g}")

    out += ["", "rolling layer at vertices"]
    for i, v in enumerate(net.vertices):
        vals = rf.at_vertex(i)
        spread = max(vals.values()) - min(vals.values())
        state = "continuous" if len(vals) < 2 or spread <= tol else "multivalued"
        parts = ", ".join(f"e{net.edges[j].label}: {x:.12g}" for j, x in sorted(vals.items()))
        out.append(f"  x{v.label} ({state}): {parts}")

    zero = uq.zero_edges
    out += ["", f"edges with v = 0: {elab(zero) if zero else 'none'}"]
    verdict = "unique" if uq.unique else "non-unique"
    out += ["", f"uniqueness: {verdict}"]
    for p in uq.failing:
        out.append(f"  singular point outside the source support: {p.describe(net)}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# commands


def _load(args) -> tuple[nf.NetFile, object]:
    source = nf.read(args.input, strict=args.strict)
    network = source.network
    if args.h is not None:
        network = resample(network, args.h, args.grid)
        report = validate(network)
        if not report.ok:
            raise nf.NetValidationError(report)
    return source, network


def cmd_solve(args) -> int:
    source, network = _load(args)
    t0 = time.perf_counter()
    sol = solve(network, TransmissionSpec.from_netfile(source))
    log.info("solved in %.3f s", time.perf_counter() - t0)
    files = {"d.csv": d_csv(sol), "v.csv": v_csv(sol), "report.txt": report_text(sol)}
    if args.format == "gnuplot":
        files["plot.gp"] = gnuplot_script(sol)
    elif args.format == "svg":
        files["plot.svg"] = svg_plan(sol)
    out = Path(args.out)
    for name, text in files.items():
        _atomic_write(out / name, text)
    print(f"wrote {', '.join(sorted(files))} to {out}")
    return EXIT_OK


def cmd_check(args) -> int:
    source, network = _load(args)
    sol = solve(network, TransmissionSpec.from_netfile(source))
    rolling = read_v_csv(Path(args.v_file), sol) if args.v_file else None
    results = audit(sol, rolling)
    width = max(len(r.name) for r in results)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status}  {r.name:<{width}}  {r.detail}".rstrip())
    uq = uniqueness_check(sol)
    print(f"uniqueness verdict: {'unique' if uq.unique else 'non-unique'}")
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} invariants pass")
    return EXIT_OK if failed == 0 else EXIT_INVARIANT


def cmd_converge(args) -> int:
    source = nf.read(args.input, strict=args.strict)
    h_list = args.h_list
    if len(set(h_list)) < 2:
        raise UsageError("need >= 2 steps for a convergence study")
    exact = None
    if not args.reference:
        exact = exact_solution_for(source.network)
        if exact is None:
            raise UsageError("no closed-form solution registered for this network; use --reference")
    table = convergence_study(
        source.network,
        h_list,
        exact=exact,
        grid=args.grid,
        samples_per_edge=args.samples,
        spec=TransmissionSpec.from_netfile(source),
    )
    rows = [tuple(_fmt(x) for x in r.as_tuple()) for r in table.rows]
    text = _csv_text(["h", "Linf_d", "L1_d", "Linf_v", "L1_v"], rows)
    _atomic_write(Path(args.out) / "errors.csv", text)
    mode = "reference" if exact is None else exact.name
    print(f"errors against {mode} written to {Path(args.out) / 'errors.csv'}")
    for name, label in (("linf_d", "Linf d"), ("l1_d", "L1 d"), ("linf_v", "Linf v"), ("l1_v", "L1 v")):
        print(f"  order {label:<7} {table.orders[name]:.3f}")
    return EXIT_OK


def cmd_gen(args) -> int:
    params: dict = {"h": args.h}
    if args.kind == "star":
        params["arms"] = args.arms
        if args.lengths:
            params["lengths"] = [_positive(x) for x in args.lengths.split(",")]
    elif args.kind == "sierpinski":
        params["level"] = args.level
    elif args.kind == "random":
        params["seed"] = args.seed
    try:
        netfile = nf.generate(args.kind, **params)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    text = nf.writes(netfile)
    if args.output in (None, "-"):
        sys.stdout.write(text)
    else:
        _atomic_write(Path(args.output), text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sandnet", description="Equilibrium sandpiles on metric networks.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("input", help=".net file")
        sp.add_argument("--strict", action="store_true", help="plain format only (no comments or extensions)")
        sp.add_argument("--grid", choices=GRID_MODES, default="ceil",
                        help="cell-count rounding when --h is given (default ceil)")

    sp = sub.add_parser("solve", help="solve and write d.csv, v.csv, report.txt")
    common(sp)
    sp.add_argument("--h", type=_positive, help="target grid step (overrides the file's resolution)")
    sp.add_argument("--out", default=".", help="output directory")
    sp.add_argument("--format", choices=("csv", "gnuplot", "svg"), default="csv")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("check", help="run the invariant audit")
    common(sp)
    sp.add_argument("--h", type=_positive, help="target grid step")
    sp.add_argument("--v-file", help="audit this v.csv instead of the computed rolling layer")
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("converge", help="convergence study")
    sp.add_argument("input", help=".net file")
    sp.add_argument("--strict", action="store_true")
    sp.add_argument("--h-list", type=_h_list, default=_h_list(DEFAULT_H_LIST),
                    help=f"comma-separated steps (default {DEFAULT_H_LIST})")
    sp.add_argument("--grid", choices=GRID_MODES, default="odd",
                    help="odd misses the singular point, quarter contains it (default odd)")
    sp.add_argument("--reference", action="store_true", help="compare with a 10x finer solution")
    sp.add_argument("--samples", type=int, default=10_000, help="samples per edge")
    sp.add_argument("--out", default=".", help="output directory for errors.csv")
    sp.set_defaults(func=cmd_converge)

    sp = sub.add_parser("gen", help="write a generated .net file")
    sp.add_argument("kind", choices=("test1", "test2", "test3", "star", "sierpinski", "random"))
    sp.add_argument("--h", type=_positive, default=0.01, help="grid step (default 0.01)")
    sp.add_argument("--arms", type=int, default=3)
    sp.add_argument("--lengths", help="comma-separated arm lengths for star")
    sp.add_argument("--level", type=int, default=2)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("-o", "--output", help="output path (default stdout)")
    sp.set_defaults(func=cmd_gen)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(levelname)s: %(message)s", stream=sys.stderr)
    if getattr(args, "samples", 2) < 2:
        parser.error("--samples must be at least 2")
    try:
        base_tol()
    except ValueError as exc:
        print(f"sandnet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except nf.NetValidationError as exc:
        print(f"sandnet: validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (nf.NetFileError, ExprSyntaxError, ExprEvalError) as exc:
        print(f"sandnet: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"sandnet: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except UsageError as exc:
        print(f"sandnet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        # transmission data inconsistent with the solved slopes
        print(f"sandnet: validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
