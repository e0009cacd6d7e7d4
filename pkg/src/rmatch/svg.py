"""Minimal SVG renderers for step densities, histograms and heat maps."""
from __future__ import annotations

from typing import Sequence
from xml.sax.saxutils import escape

from .density import StepDensity
from .exactnum import format_scalar, to_float

__all__ = ["heatmap_svg", "step_plot_svg"]

W, H, PAD = 640, 400, 50


def _frame(title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{W / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{PAD}" y1="{H - PAD}" x2="{W - PAD}" y2="{H - PAD}" stroke="black"/>',
        f'<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{H - PAD}" stroke="black"/>',
    ]


def step_plot_svg(density: StepDensity | None, title: str = "",
                  histogram: tuple[Sequence[float], Sequence[float]] | None = None,
                  marks: Sequence[float] = ()) -> str:
    """Exact steps in black, optional histogram (edges, densities) in grey, dashed marks."""
    xs: list[float] = []
    ys: list[float] = [0.0]
    if density is not None:
        xs += [to_float(b) for b in density.breakpoints]
        ys += [to_float(v) for v in density.values]
    if histogram is not None:
        xs += list(histogram[0])
        ys += list(histogram[1])
    x0, x1 = min(xs), max(xs)
    y1 = max(ys) * 1.1 or 1.0

    def sx(x):
        return PAD + (x - x0) / (x1 - x0) * (W - 2 * PAD)

    def sy(y):
        return H - PAD - y / y1 * (H - 2 * PAD)

    out = _frame(title)
    if histogram is not None:
        edges, dens = histogram
        for i, d in enumerate(dens):
            out.append(f'<rect x="{sx(edges[i]):.2f}" y="{sy(d):.2f}" '
                       f'width="{sx(edges[i + 1]) - sx(edges[i]):.2f}" height="{sy(0) - sy(d):.2f}" '
                       'fill="#bbbbbb" stroke="none"/>')
    if density is not None:
        pts = []
        for a, b, v in density.cells:
            fv = to_float(v)
            pts += [f"{sx(to_float(a)):.2f},{sy(fv):.2f}", f"{sx(to_float(b)):.2f},{sy(fv):.2f}"]
        out.append(f'<polyline points="{" ".join(pts)}" fill="none" stroke="black" stroke-width="1.5"/>')
        for b in density.breakpoints:
            out.append(f'<text x="{sx(to_float(b)):.2f}" y="{H - PAD + 14}" font-size="8" '
                       f'text-anchor="middle">{escape(format_scalar(b))}</text>')
    for m in marks:
        out.append(f'<line x1="{sx(m):.2f}" y1="{PAD}" x2="{sx(m):.2f}" y2="{H - PAD}" '
                   'stroke="red" stroke-dasharray="4 3"/>')
    out.append(f'<text x="{PAD - 5}" y="{sy(y1 / 1.1):.2f}" font-size="10" text-anchor="end">'
               f'{y1 / 1.1:.3g}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def heatmap_svg(alphas: Sequence[float], ps: Sequence[float], values: dict, title: str = "",
                ceiling: float = 0.5) -> str:
    """values[(i, j)] for alpha index i and p index j; None cells are drawn hatched grey."""
    out = _frame(title)
    nx, ny = len(alphas), len(ps)
    cw = (W - 2 * PAD) / max(nx, 1)
    ch = (H - 2 * PAD) / max(ny, 1)
    finite = [v for v in values.values() if v is not None]
    lo = min(finite) if finite else 0.0
    span = (ceiling - lo) or 1.0
    for (i, j), v in sorted(values.items()):
        x = PAD + i * cw
        y = H - PAD - (j + 1) * ch
        if v is None:
            fill = "#dddddd"
        else:
            t = max(0.0, min(1.0, (v - lo) / span))
            fill = f"rgb({int(255 * t)},{int(80 + 100 * (1 - t))},{int(255 * (1 - t))})"
        stroke = ' stroke="black" stroke-width="1.5"' if v is not None and v >= ceiling else ""
        out.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{cw:.2f}" height="{ch:.2f}" fill="{fill}"{stroke}/>')
    out.append(f'<text x="{W - PAD}" y="{H - 10}" font-size="10" text-anchor="end">'
               f'outlined cells attain the ceiling {ceiling}</text>')
    if nx:
        out.append(f'<text x="{PAD}" y="{H - PAD + 14}" font-size="10">alpha={alphas[0]:.3g}</text>')
        out.append(f'<text x="{W - PAD}" y="{H - PAD + 14}" font-size="10" text-anchor="end">'
                   f'alpha={alphas[-1]:.3g}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
