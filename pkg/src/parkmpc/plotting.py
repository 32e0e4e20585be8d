"""Minimal SVG line charts for simulation traces.

Only what the path / steering / speed figures need: polylines, linear
axes with rounded ticks, a legend. Output is deterministic text.
"""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 720, 420
MARGIN = dict(left=70, right=20, top=40, bottom=55)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def nice_ticks(lo, hi, target=6):
    if not (math.isfinite(lo) and math.isfinite(hi)):
        lo, hi = 0.0, 1.0
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    raw = (hi - lo) / target
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    start = math.floor(lo / step) * step
    stop = math.ceil(hi / step) * step
    n = int(round((stop - start) / step))
    return [start + i * step for i in range(n + 1)]


def _fmt(v):
    return f"{v:.2f}".rstrip("0").rstrip(".") if v != 0 else "0"


def _label(v):
    return f"{v:.6g}"


def line_chart(series, title, xlabel, ylabel, equal_aspect=False):
    """Render ``series`` (dicts with ``x``, ``y``, ``label`` and optional
    ``dashed``) as an SVG document string."""
    xs = np.concatenate([np.asarray(s["x"], float) for s in series])
    ys = np.concatenate([np.asarray(s["y"], float) for s in series])
    xt = nice_ticks(float(xs.min()), float(xs.max()))
    yt = nice_ticks(float(ys.min()), float(ys.max()))
    x0, x1, y0, y1 = xt[0], xt[-1], yt[0], yt[-1]
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]
    sx, sy = pw / (x1 - x0), ph / (y1 - y0)
    if equal_aspect:
        sx = sy = min(sx, sy)

    def px(x):
        return MARGIN["left"] + (x - x0) * sx

    def py(y):
        return MARGIN["top"] + ph - (y - y0) * sy

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
    ]
    for t in xt:
        if px(t) > WIDTH - MARGIN["right"] + 0.5:
            continue
        out.append(f'<line x1="{_fmt(px(t))}" y1="{MARGIN["top"]}" x2="{_fmt(px(t))}" '
                   f'y2="{MARGIN["top"] + ph}" stroke="#e0e0e0"/>')
        out.append(f'<text x="{_fmt(px(t))}" y="{MARGIN["top"] + ph + 18}" '
                   f'text-anchor="middle">{_label(t)}</text>')
    for t in yt:
        if py(t) < MARGIN["top"] - 0.5:
            continue
        out.append(f'<line x1="{MARGIN["left"]}" y1="{_fmt(py(t))}" x2="{MARGIN["left"] + pw}" '
                   f'y2="{_fmt(py(t))}" stroke="#e0e0e0"/>')
        out.append(f'<text x="{MARGIN["left"] - 8}" y="{_fmt(py(t) + 4)}" '
                   f'text-anchor="end">{_label(t)}</text>')
    out.append(f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" '
               f'fill="none" stroke="black"/>')
    out.append(f'<text x="{MARGIN["left"] + pw / 2:.1f}" y="{HEIGHT - 12}" '
               f'text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text transform="translate(16 {MARGIN["top"] + ph / 2:.1f}) rotate(-90)" '
               f'text-anchor="middle">{escape(ylabel)}</text>')

    for i, s in enumerate(series):
        color = s.get("color", PALETTE[i % len(PALETTE)])
        pts = " ".join(f"{_fmt(px(a))},{_fmt(py(b))}" for a, b in zip(s["x"], s["y"]))
        dash = ' stroke-dasharray="6 4"' if s.get("dashed") else ""
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.6"{dash}/>')
        ly = MARGIN["top"] + 16 + 16 * i
        lx = MARGIN["left"] + 12
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 24}" y2="{ly - 4}" stroke="{color}" '
                   f'stroke-width="2"{dash}/>')
        out.append(f'<text x="{lx + 30}" y="{ly}">{escape(s["label"])}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def path_figure(result, trajectory):
    return line_chart(
        [
            {"x": trajectory.x, "y": trajectory.y, "label": "reference path", "dashed": True},
            {"x": result.column("x"), "y": result.column("y"), "label": "vehicle (rear axle)"},
        ],
        "Vehicle path", "x [m]", "y [m]", equal_aspect=True,
    )


def steering_figure(result):
    t = result.column("t")
    applied = np.arctan([s.applied.tan_delta for s in result.samples])
    return line_chart(
        [
            {"x": t, "y": result.column("delta_cmd"), "label": "commanded road-wheel angle"},
            {"x": t, "y": applied, "label": "applied (after delay)", "dashed": True},
        ],
        "Steering", "t [s]", "road-wheel angle [rad]",
    )


def speed_figure(result):
    t = result.column("t")
    return line_chart(
        [
            {"x": t, "y": result.column("v_ref"), "label": "reference speed", "dashed": True},
            {"x": t, "y": result.column("v"), "label": "vehicle speed"},
        ],
        "Speed", "t [s]", "v [m/s]",
    )
