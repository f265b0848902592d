"""Minimal SVG output: a single-series line plot and a grayscale heatmap."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

_HEAD = '<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">\n'


def _fmt(v):
    return f"{v:.2f}"


def line_plot(xs, ys, xlabel="x", ylabel="y", title="", width=420, height=320) -> str:
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    left, right, top, bottom = 60, 20, 30, 50
    pw, ph = width - left - right, height - top - bottom
    x0, x1 = xs.min(), xs.max()
    y0, y1 = ys.min(), ys.max()
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    pad = 0.05 * (y1 - y0) if y1 > y0 else 1.0
    y0, y1 = y0 - pad, y1 + pad

    def px(x):
        return left + (x - x0) / (x1 - x0) * pw

    def py(y):
        return top + (y1 - y) / (y1 - y0) * ph

    out = [_HEAD.format(w=width, h=height), '<rect width="100%" height="100%" fill="white"/>\n']
    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>\n')
    for t in np.linspace(y0, y1, 5):
        out.append(f'<line x1="{left - 4}" y1="{_fmt(py(t))}" x2="{left}" y2="{_fmt(py(t))}" stroke="black"/>\n')
        out.append(f'<text x="{left - 6}" y="{_fmt(py(t) + 4)}" font-size="10" text-anchor="end">{t:.3g}</text>\n')
    for t in np.linspace(x0, x1, 5):
        out.append(f'<line x1="{_fmt(px(t))}" y1="{top + ph}" x2="{_fmt(px(t))}" y2="{top + ph + 4}" stroke="black"/>\n')
        out.append(f'<text x="{_fmt(px(t))}" y="{top + ph + 16}" font-size="10" text-anchor="middle">{t:.3g}</text>\n')
    pts = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in zip(xs, ys))
    out.append(f'<polyline points="{pts}" fill="none" stroke="#1f4fb4" stroke-width="1.5" stroke-dasharray="5,3"/>\n')
    for x, y in zip(xs, ys):
        out.append(f'<circle cx="{_fmt(px(x))}" cy="{_fmt(py(y))}" r="3" fill="#1f4fb4"/>\n')
    out.append(f'<text x="{left + pw / 2}" y="{height - 12}" font-size="12" text-anchor="middle">{escape(xlabel)}</text>\n')
    out.append(f'<text x="14" y="{top + ph / 2}" font-size="12" text-anchor="middle" '
               f'transform="rotate(-90 14 {top + ph / 2})">{escape(ylabel)}</text>\n')
    if title:
        out.append(f'<text x="{width / 2}" y="18" font-size="13" text-anchor="middle">{escape(title)}</text>\n')
    out.append("</svg>\n")
    return "".join(out)


def heatmap(a, title="", cell=16, vmax=None) -> str:
    """Grayscale rendering of ``|a|``; black is ``vmax`` (default: max |a|)."""
    a = np.abs(np.asarray(a, dtype=float))
    rows, cols = a.shape
    vmax = float(a.max()) if vmax is None else float(vmax)
    scale = 1.0 / vmax if vmax > 0 else 0.0
    top = 24 if title else 0
    w, h = cols * cell, rows * cell + top
    out = [_HEAD.format(w=w, h=h)]
    if title:
        out.append(f'<text x="{w / 2}" y="16" font-size="12" text-anchor="middle">{escape(title)}</text>\n')
    for i in range(rows):
        for j in range(cols):
            g = int(round(255 * (1.0 - min(a[i, j] * scale, 1.0))))
            out.append(f'<rect x="{j * cell}" y="{top + i * cell}" width="{cell}" height="{cell}" '
                       f'fill="rgb({g},{g},{g})"/>\n')
    out.append("</svg>\n")
    return "".join(out)
