"""Minimal log-log SVG charts written without a plotting library."""
from __future__ import annotations

import math
from html import escape

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")
WIDTH, HEIGHT = 640, 440
MARGIN = dict(left=78, right=150, top=36, bottom=56)


def _decades(lo, hi):
    a, b = math.floor(math.log10(lo)), math.ceil(math.log10(hi))
    if a == b:
        b += 1
    return a, b


def loglog_svg(series, xlabel, ylabel, title=""):
    """``series`` maps a label to (xs, ys); non-positive or NaN points are skipped."""
    clean = {}
    for label, (xs, ys) in series.items():
        pts = [(float(x), float(y)) for x, y in zip(xs, ys)
               if x is not None and y is not None and x > 0 and y > 0
               and math.isfinite(x) and math.isfinite(y)]
        if pts:
            clean[label] = pts
    allx = [x for pts in clean.values() for x, _ in pts] or [1.0, 10.0]
    ally = [y for pts in clean.values() for _, y in pts] or [1.0, 10.0]
    xa, xb = _decades(min(allx), max(allx))
    ya, yb = _decades(min(ally), max(ally))
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def X(x):
        return MARGIN["left"] + pw * (math.log10(x) - xa) / (xb - xa)

    def Y(y):
        return MARGIN["top"] + ph * (1 - (math.log10(y) - ya) / (yb - ya))

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" '
        f'fill="none" stroke="black"/>',
    ]
    ystep = max(1, (yb - ya) // 8)
    for k in range(ya, yb + 1, ystep):
        y = Y(10.0**k)
        out.append(f'<line x1="{MARGIN["left"]}" y1="{y:.2f}" x2="{MARGIN["left"] + pw}" '
                   f'y2="{y:.2f}" stroke="#ddd"/>')
        out.append(f'<text x="{MARGIN["left"] - 6}" y="{y + 4:.2f}" text-anchor="end">1e{k}</text>')
    ticks = sorted(set(allx)) if len(set(allx)) <= 12 else [10.0**k for k in range(xa, xb + 1)]
    for t in ticks:
        x = X(t)
        out.append(f'<line x1="{x:.2f}" y1="{MARGIN["top"]}" x2="{x:.2f}" '
                   f'y2="{MARGIN["top"] + ph}" stroke="#eee"/>')
        out.append(f'<text x="{x:.2f}" y="{MARGIN["top"] + ph + 16}" text-anchor="middle">{t:g}</text>')
    out.append(f'<text x="{MARGIN["left"] + pw / 2}" y="{HEIGHT - 14}" '
               f'text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text transform="translate(18,{MARGIN["top"] + ph / 2}) rotate(-90)" '
               f'text-anchor="middle">{escape(ylabel)}</text>')
    if title:
        out.append(f'<text x="{WIDTH / 2}" y="22" text-anchor="middle" '
                   f'font-size="14">{escape(title)}</text>')
    for n, (label, pts) in enumerate(clean.items()):
        c = COLORS[n % len(COLORS)]
        path = " ".join(f"{X(x):.2f},{Y(y):.2f}" for x, y in pts)
        out.append(f'<polyline points="{path}" fill="none" stroke="{c}" stroke-width="1.6"/>')
        out.extend(f'<circle cx="{X(x):.2f}" cy="{Y(y):.2f}" r="3" fill="{c}"/>' for x, y in pts)
        ly = MARGIN["top"] + 14 + 18 * n
        lx = MARGIN["left"] + pw + 12
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 18}" y2="{ly - 4}" stroke="{c}" '
                   f'stroke-width="2"/>')
        out.append(f'<text x="{lx + 24}" y="{ly}">{escape(str(label))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path, *args, **kw):
    with open(path, "w") as fh:
        fh.write(loglog_svg(*args, **kw))
