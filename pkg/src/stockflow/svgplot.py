"""Deterministic SVG line charts."""
from __future__ import annotations

import math
from html import escape

import numpy as np

WIDTH, HEIGHT = 800, 450
LEFT, RIGHT, TOP, BOTTOM = 70, 170, 40, 50
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


def nice_ticks(lo: float, hi: float, target: int = 6) -> list[float]:
    """Round tick positions (1, 2 or 5 times a power of ten) covering [lo, hi]."""
    if hi < lo:
        lo, hi = hi, lo
    if hi == lo:
        pad = abs(lo) * 0.05 or 1.0
        lo, hi = lo - pad, hi + pad
    raw = (hi - lo) / max(target - 1, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 5, 10) if m * mag >= raw)
    first = math.floor(lo / step + 1e-9) * step
    last = math.ceil(hi / step - 1e-9) * step
    count = int(round((last - first) / step))
    return [_clean(first + i * step) for i in range(count + 1)]


def _clean(v: float) -> float:
    v = float(f"{v:.12g}")
    return 0.0 if v == 0 else v


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def line_chart(x, columns: dict[str, np.ndarray], title: str = "", x_label: str = "", y_label: str = "") -> str:
    """One polyline per column over a shared x, with axes, ticks and a legend."""
    x = np.asarray(x, dtype=np.float64)
    if not columns:
        raise ValueError("no columns to plot")
    ys = {name: np.asarray(v, dtype=np.float64) for name, v in columns.items()}
    for name, y in ys.items():
        if y.shape != x.shape:
            raise ValueError(f"column '{name}' has {y.shape[0]} values for {x.shape[0]} x values")
    allv = np.concatenate([y[np.isfinite(y)] for y in ys.values()] or [np.zeros(1)])
    if allv.size == 0:
        allv = np.zeros(1)
    xt = nice_ticks(float(x.min()), float(x.max()))
    yt = nice_ticks(float(allv.min()), float(allv.max()))
    x0, x1, y0, y1 = xt[0], xt[-1], yt[0], yt[-1]
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def px(v):
        return LEFT + (v - x0) / (x1 - x0) * pw

    def py(v):
        return TOP + ph - (v - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{WIDTH / 2:.2f}" y="24" text-anchor="middle" font-size="16">{escape(title)}</text>')
    out.append('<g stroke="#cccccc" stroke-width="1">')
    for v in xt:
        out.append(f'<line x1="{px(v):.2f}" y1="{TOP}" x2="{px(v):.2f}" y2="{TOP + ph}"/>')
    for v in yt:
        out.append(f'<line x1="{LEFT}" y1="{py(v):.2f}" x2="{LEFT + pw}" y2="{py(v):.2f}"/>')
    out.append("</g>")
    out.append(f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    out.append('<g font-size="12" font-family="sans-serif">')
    for v in xt:
        out.append(f'<text x="{px(v):.2f}" y="{TOP + ph + 18}" text-anchor="middle">{_fmt(v)}</text>')
    for v in yt:
        out.append(f'<text x="{LEFT - 6}" y="{py(v) + 4:.2f}" text-anchor="end">{_fmt(v)}</text>')
    if x_label:
        out.append(f'<text x="{LEFT + pw / 2:.2f}" y="{HEIGHT - 10}" text-anchor="middle">{escape(x_label)}</text>')
    if y_label:
        out.append(f'<text x="16" y="{TOP + ph / 2:.2f}" text-anchor="middle" '
                   f'transform="rotate(-90 16 {TOP + ph / 2:.2f})">{escape(y_label)}</text>')
    out.append("</g>")
    for i, (name, y) in enumerate(ys.items()):
        color = COLORS[i % len(COLORS)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y) if math.isfinite(b))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
    out.append('<g class="legend" font-size="12" font-family="sans-serif">')
    for i, name in enumerate(ys):
        color = COLORS[i % len(COLORS)]
        ly = TOP + 10 + 20 * i
        lx = LEFT + pw + 15
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly + 4}">{escape(name)}</text>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
