"""Minimal SVG 1.1 log-log line plots and heatmaps, written as plain text."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

__all__ = ["loglog_plot", "heatmap_plot", "Series"]

WIDTH, HEIGHT = 640, 440
MARGIN = dict(left=70, right=170, top=30, bottom=50)
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"]


class Series:
    """One polyline: ``label``, x values, y values and an optional dash pattern."""

    def __init__(self, label, xs, ys, dashed: bool = False, color: str | None = None):
        self.label = label
        self.xs = np.asarray(xs, dtype=float)
        self.ys = np.asarray(ys, dtype=float)
        self.dashed = dashed
        self.color = color


def _header(digest: str | None, version: str | None) -> list[str]:
    out = ['<?xml version="1.0" encoding="UTF-8"?>']
    if version is not None:
        out.append(f"<!-- build: {escape(version)} -->")
    if digest is not None:
        out.append(f"<!-- config-sha256: {digest} -->")
    out.append(f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" '
               f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">')
    out.append(f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>')
    return out


def _decades(lo: float, hi: float) -> tuple[int, int]:
    a, b = math.floor(math.log10(lo)), math.ceil(math.log10(hi))
    return a, b if b > a else a + 1


def loglog_plot(series: list[Series], title: str = "", xlabel: str = "k", ylabel: str = "",
                digest: str | None = None, version: str | None = None) -> str:
    """Log-log plot of positive finite points of each series."""
    pts = []
    for s in series:
        ok = (s.xs > 0) & (s.ys > 0) & np.isfinite(s.xs) & np.isfinite(s.ys)
        pts.append((s, s.xs[ok], s.ys[ok]))
    allx = np.concatenate([p[1] for p in pts] + [np.array([1.0])])
    ally = np.concatenate([p[2] for p in pts] + [np.array([])])
    if ally.size == 0:
        ally = np.array([1e-1, 1.0])
    x0, x1 = _decades(allx.min(), allx.max())
    y0, y1 = _decades(ally.min(), ally.max())
    L, R, T, B = MARGIN["left"], WIDTH - MARGIN["right"], MARGIN["top"], HEIGHT - MARGIN["bottom"]

    def px(x):
        return L + (math.log10(x) - x0) / (x1 - x0) * (R - L)

    def py(y):
        return B - (math.log10(y) - y0) / (y1 - y0) * (B - T)

    out = _header(digest, version)
    out.append(f'<text x="{(L + R) / 2:.1f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>')
    out.append(f'<rect x="{L}" y="{T}" width="{R - L}" height="{B - T}" fill="none" stroke="black"/>')
    for e in range(x0, x1 + 1):
        x = px(10.0**e)
        out.append(f'<line x1="{x:.1f}" y1="{T}" x2="{x:.1f}" y2="{B}" stroke="#ddd"/>')
        out.append(f'<text x="{x:.1f}" y="{B + 16}" text-anchor="middle">1e{e}</text>')
    for e in range(y0, y1 + 1):
        y = py(10.0**e)
        out.append(f'<line x1="{L}" y1="{y:.1f}" x2="{R}" y2="{y:.1f}" stroke="#ddd"/>')
        out.append(f'<text x="{L - 6}" y="{y + 4:.1f}" text-anchor="end">1e{e}</text>')
    out.append(f'<text x="{(L + R) / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{(T + B) / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {(T + B) / 2:.1f})">{escape(ylabel)}</text>')
    for i, (s, xs, ys) in enumerate(pts):
        color = s.color or ("black" if s.dashed else PALETTE[i % len(PALETTE)])
        if xs.size:
            coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
            dash = ' stroke-dasharray="6,4"' if s.dashed else ""
            out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>')
        ly = T + 14 + 16 * i
        dash = ' stroke-dasharray="6,4"' if s.dashed else ""
        out.append(f'<line x1="{R + 10}" y1="{ly - 4}" x2="{R + 34}" y2="{ly - 4}" stroke="{color}" stroke-width="1.5"{dash}/>')
        out.append(f'<text x="{R + 40}" y="{ly}">{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _color(v: float, vmax: float) -> str:
    if not np.isfinite(v):
        return "#cccccc"
    t = 0.0 if vmax <= 0 else min(max(v / vmax, 0.0), 1.0)
    # white -> dark blue
    r = int(round(255 * (1 - 0.9 * t)))
    g = int(round(255 * (1 - 0.75 * t)))
    b = int(round(255 * (1 - 0.35 * t)))
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap_plot(p_grid, q_grid, values, title: str = "", mark=None,
                 digest: str | None = None, version: str | None = None) -> str:
    """Cells ``values[i, j]`` at ``(p_grid[i], q_grid[j])``; ``p`` across, ``q`` up."""
    values = np.asarray(values, dtype=float)
    n_p, n_q = values.shape
    L, R, T, B = MARGIN["left"], WIDTH - MARGIN["right"], MARGIN["top"], HEIGHT - MARGIN["bottom"]
    cw, ch = (R - L) / n_p, (B - T) / n_q
    vmax = np.nanmax(values) if np.any(np.isfinite(values)) else 0.0
    out = _header(digest, version)
    out.append(f'<text x="{(L + R) / 2:.1f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>')
    for i in range(n_p):
        for j in range(n_q):
            x, y = L + i * cw, B - (j + 1) * ch
            out.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{cw + 0.05:.2f}" height="{ch + 0.05:.2f}" '
                       f'fill="{_color(values[i, j], vmax)}"/>')
    out.append(f'<rect x="{L}" y="{T}" width="{R - L}" height="{B - T}" fill="none" stroke="black"/>')
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        i = min(int(frac * (n_p - 1)), n_p - 1)
        j = min(int(frac * (n_q - 1)), n_q - 1)
        out.append(f'<text x="{L + (i + 0.5) * cw:.1f}" y="{B + 16}" text-anchor="middle">{p_grid[i]:.3g}</text>')
        out.append(f'<text x="{L - 6}" y="{B - (j + 0.5) * ch + 4:.1f}" text-anchor="end">{q_grid[j]:.3g}</text>')
    out.append(f'<text x="{(L + R) / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle">p</text>')
    out.append(f'<text x="16" y="{(T + B) / 2:.1f}" text-anchor="middle">q</text>')
    if mark is not None:
        i, j = mark
        out.append(f'<circle cx="{L + (i + 0.5) * cw:.2f}" cy="{B - (j + 0.5) * ch:.2f}" r="5" '
                   f'fill="none" stroke="#d62728" stroke-width="2"/>')
    # colour bar
    for t in range(50):
        y = B - (t + 1) * (B - T) / 50
        out.append(f'<rect x="{R + 20}" y="{y:.2f}" width="16" height="{(B - T) / 50 + 0.05:.2f}" '
                   f'fill="{_color(vmax * (t + 0.5) / 50, vmax)}"/>')
    out.append(f'<text x="{R + 42}" y="{T + 8}">{vmax:.4g}</text>')
    out.append(f'<text x="{R + 42}" y="{B}">0</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
