"""Plot emission: a gnuplot script over the CSV outputs, or a plan-view SVG."""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from .pipeline import Solution

__all__ = ["gnuplot_script", "svg_plan"]


def gnuplot_script(solution: Solution, d_csv: str = "d.csv", v_csv: str = "v.csv") -> str:
    """Script plotting d and v against arclength, one curve per edge."""
    net = solution.network
    lines = [
        "# gnuplot script: run with `gnuplot -p plot.gp`",
        "set datafile separator ','",
        "set key outside right",
        "set multiplot layout 2,1",
        "set xlabel 's (arclength)'",
        "set ylabel 'd'",
    ]
    d_terms = [
        f"'{d_csv}' using ($1=={e.label} ? $3 : 1/0):4 every ::1 with lines title 'e{e.label}'"
        for e in net.edges
    ]
    lines.append("plot " + ", \\\n     ".join(d_terms))
    lines.append("set ylabel 'v'")
    lines.append("set xlabel 't (normalized)'")
    v_terms = [
        f"'{v_csv}' using ($1=={e.label} ? $2 : 1/0):3 every ::1 with lines title 'e{e.label}'"
        for e in net.edges
    ]
    lines.append("plot " + ", \\\n     ".join(v_terms))
    lines.append("unset multiplot")
    return "\n".join(lines) + "\n"


def _color(x: float) -> str:
    # blue (low) to red (high)
    x = min(max(x, 0.0), 1.0)
    r, g, b = int(255 * x), int(80 * (1 - abs(2 * x - 1))), int(255 * (1 - x))
    return f"#{r:02x}{g:02x}{b:02x}"


def _panel(solution: Solution, values, title: str, ox: float, size: float, pieces: int) -> list[str]:
    net = solution.network
    xs = np.array([v.x for v in net.vertices])
    ys = np.array([v.y for v in net.vertices])
    span = max(float(np.ptp(xs)), float(np.ptp(ys)), 1e-12)
    margin = 30.0
    scale = (size - 2 * margin) / span

    def to_px(x, y):
        return ox + margin + (x - xs.min()) * scale, size - margin - (y - ys.min()) * scale

    top = max(float(np.max(values(j, np.linspace(0, e.length, pieces + 1))))
              for j, e in enumerate(net.edges))
    top = top if top > 0 else 1.0
    out = [f'<text x="{ox + size / 2:.1f}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>']
    for j, e in enumerate(net.edges):
        a, b = net.vertices[e.start], net.vertices[e.end]
        s = np.linspace(0.0, e.length, pieces + 1)
        vals = values(j, s)
        frac = s / e.length
        px = a.x + frac * (b.x - a.x)
        py = a.y + frac * (b.y - a.y)
        for k in range(pieces):
            x1, y1 = to_px(px[k], py[k])
            x2, y2 = to_px(px[k + 1], py[k + 1])
            c = _color(0.5 * (vals[k] + vals[k + 1]) / top)
            out.append(
                f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" '
                f'stroke="{c}" stroke-width="4" stroke-linecap="round"/>'
            )
    for v in net.vertices:
        x, y = to_px(v.x, v.y)
        fill = "black" if v.is_boundary else "white"
        out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="4" fill="{fill}" stroke="black"/>')
        out.append(f'<text x="{x + 6:.2f}" y="{y - 6:.2f}" font-size="11">x{v.label}</text>')
    return out


def svg_plan(solution: Solution, size: float = 400.0, pieces: int = 40) -> str:
    """Standalone SVG: the network in plan view, edges colored by d and by v."""
    st, rf = solution.structure, solution.rolling
    body = _panel(solution, st.dfield.interpolate, "distance d", 0.0, size, pieces)
    body += _panel(solution, rf.interpolate, "rolling layer v", size, size, pieces)
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{2 * size:.0f}" height="{size:.0f}" '
        f'viewBox="0 0 {2 * size:.0f} {size:.0f}">\n'
        + "\n".join(body)
        + "\n</svg>\n"
    )
