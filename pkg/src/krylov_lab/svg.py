"""Minimal SVG figures: line/marker plots with error bars and heatmaps."""

from __future__ import annotations

from html import escape

import numpy as np

from .kcx import atomic_open

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]

W, H = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 40, 55


def _ticks(lo, hi, count=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / count
    mag = 10 ** np.floor(np.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=raw)
    start = np.ceil(lo / step) * step
    return [float(v) for v in np.arange(start, hi + 1e-9 * step, step)]


def _fmt(v):
    return f"{v:.4g}"


def _frame(title, xlabel, ylabel, xlim, ylim, parts):
    x0, x1 = xlim
    y0, y1 = ylim
    pw, ph = W - LEFT - RIGHT, H - TOP - BOTTOM

    def sx(x):
        return LEFT + (np.asarray(x) - x0) / (x1 - x0) * pw

    def sy(y):
        return TOP + ph - (np.asarray(y) - y0) / (y1 - y0) * ph

    parts.append(f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>')
    for t in _ticks(x0, x1):
        px = sx(t)
        parts.append(f'<line x1="{px:.2f}" y1="{TOP + ph}" x2="{px:.2f}" y2="{TOP + ph + 5}" stroke="#333"/>')
        parts.append(f'<text x="{px:.2f}" y="{TOP + ph + 18}" font-size="11" text-anchor="middle">{_fmt(t)}</text>')
    for t in _ticks(y0, y1):
        py = sy(t)
        parts.append(f'<line x1="{LEFT - 5}" y1="{py:.2f}" x2="{LEFT}" y2="{py:.2f}" stroke="#333"/>')
        parts.append(f'<text x="{LEFT - 8}" y="{py + 4:.2f}" font-size="11" text-anchor="end">{_fmt(t)}</text>')
    parts.append(f'<text x="{LEFT + pw / 2}" y="{H - 12}" font-size="13" text-anchor="middle">{escape(xlabel)}</text>')
    parts.append(f'<text x="16" y="{TOP + ph / 2}" font-size="13" text-anchor="middle" '
                 f'transform="rotate(-90 16 {TOP + ph / 2})">{escape(ylabel)}</text>')
    parts.append(f'<text x="{W / 2}" y="22" font-size="14" text-anchor="middle">{escape(title)}</text>')
    return sx, sy


def _document(parts, width=W, height=H):
    body = "\n".join(parts)
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif">\n'
            f'<rect width="100%" height="100%" fill="white"/>\n{body}\n</svg>\n')


def line_plot(series, title="", xlabel="", ylabel="", xlim=None, ylim=None, logy=False) -> str:
    """Render ``series``: dicts with x, y and optional err, label, color, markers."""
    series = [dict(s) for s in series]
    for s in series:
        s["x"] = np.asarray(s["x"], dtype=float)
        s["y"] = np.asarray(s["y"], dtype=float)
        if logy:
            s["y"] = np.log10(np.maximum(s["y"], 1e-300))
    xs = np.concatenate([s["x"] for s in series])
    lows = np.concatenate([s["y"] - (np.asarray(s["err"]) if s.get("err") is not None else 0) for s in series])
    highs = np.concatenate([s["y"] + (np.asarray(s["err"]) if s.get("err") is not None else 0) for s in series])
    xlim = xlim or (float(xs.min()), float(xs.max()))
    if ylim is None:
        pad = 0.05 * max(float(highs.max() - lows.min()), 1e-12)
        ylim = (float(lows.min()) - pad, float(highs.max()) + pad)
    parts = []
    sx, sy = _frame(title, xlabel, ("log10 " if logy else "") + ylabel, xlim, ylim, parts)
    for i, s in enumerate(series):
        color = s.get("color", PALETTE[i % len(PALETTE)])
        px, py = sx(s["x"]), sy(s["y"])
        if s.get("err") is not None:
            lo, hi = sy(s["y"] - s["err"]), sy(s["y"] + s["err"])
            for a, b, c in zip(px, lo, hi):
                parts.append(f'<line x1="{a:.2f}" y1="{b:.2f}" x2="{a:.2f}" y2="{c:.2f}" stroke="{color}" '
                             f'stroke-opacity="0.35"/>')
        if s.get("markers"):
            for a, b in zip(px, py):
                parts.append(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="2.2" fill="{color}"/>')
        else:
            pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
            dash = ' stroke-dasharray="4 3"' if s.get("dashed") else ""
            parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>')
        if s.get("label"):
            ly = TOP + 16 + 16 * i
            parts.append(f'<rect x="{W - RIGHT - 150}" y="{ly - 9}" width="10" height="10" fill="{color}"/>')
            parts.append(f'<text x="{W - RIGHT - 135}" y="{ly}" font-size="11">{escape(s["label"])}</text>')
    return _document(parts)


def heatmap(grid, title="", xlabel="", ylabel="", extent=None) -> str:
    """Rows of ``grid`` run along y (bottom to top), columns along x."""
    grid = np.asarray(grid, dtype=float)
    rows, cols = grid.shape
    extent = extent or (0, cols, 0, rows)
    parts = []
    sx, sy = _frame(title, xlabel, ylabel, extent[:2], extent[2:], parts)
    vmax = float(grid.max()) or 1.0
    dx = (extent[1] - extent[0]) / cols
    dy = (extent[3] - extent[2]) / rows
    cw = abs(float(sx(extent[0] + dx) - sx(extent[0])))
    ch = abs(float(sy(extent[2]) - sy(extent[2] + dy)))
    cells = []
    for r in range(rows):
        y = float(sy(extent[2] + (r + 1) * dy))
        for c in range(cols):
            v = grid[r, c] / vmax
            shade = int(255 * (1 - v))
            x = float(sx(extent[0] + c * dx))
            cells.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{cw + 0.3:.2f}" height="{ch + 0.3:.2f}" '
                         f'fill="rgb({shade},{shade},255)"/>')
    return _document(cells + parts)


def write_svg(text: str, path) -> None:
    with atomic_open(path) as fh:
        fh.write(text)
