"""Tiny dependency-free SVG line charts for x,series,y tables."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 400
MARGIN = 60
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def _nice_range(lo: float, hi: float):
    if lo == hi:
        lo, hi = lo - 1.0, hi + 1.0
    return lo, hi


def line_chart(series: dict, title: str = "", xlabel: str = "", ylabel: str = "") -> str:
    """series maps a name to a list of (x, y) points; NaN points are skipped."""
    pts = [(x, y) for s in series.values() for x, y in s if math.isfinite(y)]
    xs = [p[0] for p in pts] or [0.0]
    ys = [p[1] for p in pts] or [0.0]
    x0, x1 = _nice_range(min(xs), max(xs))
    y0, y1 = _nice_range(min(0.0, min(ys)), max(ys))
    pw, ph = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN

    def sx(x):
        return MARGIN + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return HEIGHT - MARGIN - (y - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="24" text-anchor="middle" font-size="16">{escape(title)}</text>',
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<text x="{WIDTH / 2:.1f}" y="{HEIGHT - 15}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="15" y="{HEIGHT / 2:.1f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 15 {HEIGHT / 2:.1f})">{escape(ylabel)}</text>',
    ]
    for i in range(5):
        xv = x0 + (x1 - x0) * i / 4
        yv = y0 + (y1 - y0) * i / 4
        out.append(f'<text x="{sx(xv):.1f}" y="{HEIGHT - MARGIN + 16}" text-anchor="middle" '
                   f'font-size="10">{xv:g}</text>')
        out.append(f'<text x="{MARGIN - 6}" y="{sy(yv) + 3:.1f}" text-anchor="end" font-size="10">{yv:.3g}</text>')
    for i, (name, points) in enumerate(series.items()):
        color = COLORS[i % len(COLORS)]
        good = [(x, y) for x, y in points if math.isfinite(y)]
        if good:
            path = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in good)
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{path}"/>')
        ly = MARGIN + 14 * i
        out.append(f'<text x="{WIDTH - MARGIN + 4}" y="{ly}" font-size="10" fill="{color}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def line_chart_from_table(table, **kw) -> str:
    series: dict = {}
    for x, name, y in table:
        series.setdefault(name, []).append((float(x), float(y)))
    return line_chart(series, **kw)
