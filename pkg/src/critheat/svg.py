"""Minimal log-log SVG writer: axes, decade ticks, point series and straight lines."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def loglog_svg(series, lines=(), title: str = "", xlabel: str = "", ylabel: str = "",
               width: int = 560, height: int = 400) -> str:
    """series: [(label, xs, ys)] drawn as markers; lines: [(label, slope, intercept)] in log space."""
    pts = [(x, y) for _, xs, ys in series for x, y in zip(xs, ys) if x > 0 and y > 0]
    if not pts:
        raise ValueError("nothing to plot")
    lx = [math.log10(x) for x, _ in pts]
    ly = [math.log10(y) for _, y in pts]
    x0, x1 = math.floor(min(lx) - 0.1), math.ceil(max(lx) + 0.1)
    y0, y1 = math.floor(min(ly) - 0.1), math.ceil(max(ly) + 0.1)
    ml, mr, mt, mb = 70, 20, 40, 50
    pw, ph = width - ml - mr, height - mt - mb

    def px(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def py(v):
        return mt + (y1 - v) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for e in range(x0, x1 + 1):
        out.append(f'<line x1="{_fmt(px(e))}" y1="{mt + ph}" x2="{_fmt(px(e))}" y2="{mt + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{_fmt(px(e))}" y="{mt + ph + 18}" text-anchor="middle">1e{e}</text>')
    for e in range(y0, y1 + 1):
        out.append(f'<line x1="{ml - 5}" y1="{_fmt(py(e))}" x2="{ml}" y2="{_fmt(py(e))}" stroke="black"/>')
        out.append(f'<text x="{ml - 8}" y="{_fmt(py(e) + 4)}" text-anchor="end">1e{e}</text>')
    out.append(f'<clipPath id="plot"><rect x="{ml}" y="{mt}" width="{pw}" height="{ph}"/></clipPath>')
    for i, (label, slope, icpt) in enumerate(lines):
        # intercept is for natural logs: ln y = slope ln x + icpt
        c = COLORS[i % len(COLORS)]
        ya = slope * x0 + icpt / math.log(10)
        yb = slope * x1 + icpt / math.log(10)
        out.append(f'<line x1="{_fmt(px(x0))}" y1="{_fmt(py(ya))}" x2="{_fmt(px(x1))}" y2="{_fmt(py(yb))}" '
                   f'stroke="{c}" stroke-dasharray="5,3" clip-path="url(#plot)"/>')
        out.append(f'<text x="{ml + 8}" y="{mt + ph - 10 - 16 * i}" fill="{c}">{escape(label)}</text>')
    for i, (label, xs, ys) in enumerate(series):
        c = COLORS[i % len(COLORS)]
        for x, y in zip(xs, ys):
            if x > 0 and y > 0:
                out.append(f'<circle cx="{_fmt(px(math.log10(x)))}" cy="{_fmt(py(math.log10(y)))}" r="3.5" fill="{c}"/>')
        out.append(f'<text x="{ml + 8}" y="{mt + 16 + 16 * i}" fill="{c}">{escape(label)}</text>')
    out.append(f'<text x="{ml + pw / 2}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{mt + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 16 {mt + ph / 2})">{escape(ylabel)}</text>')
    out.append(f'<text x="{ml + pw / 2}" y="24" text-anchor="middle" font-size="14">{escape(title)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
