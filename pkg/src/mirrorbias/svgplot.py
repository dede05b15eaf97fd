"""Minimal SVG line and scatter charts (fixed 800x600 viewport)."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

__all__ = ["Series", "line_chart", "scatter_chart"]

WIDTH, HEIGHT = 800, 600
MARGIN = dict(left=80, right=190, top=50, bottom=60)
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
           "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]


class Series:
    """One labelled curve or point cloud."""

    def __init__(self, label, x, y, dashed=False, markers=False):
        self.label = str(label)
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.dashed = dashed
        self.markers = markers


def _ticks(lo, hi, log):
    if log:
        a, b = math.floor(math.log10(lo)), math.ceil(math.log10(hi))
        return [10.0 ** k for k in range(a, b + 1)]
    span = hi - lo
    step = 10.0 ** math.floor(math.log10(span / 5)) if span > 0 else 1.0
    for m in (1, 2, 5, 10):
        if span / (m * step) <= 7:
            step *= m
            break
    start = math.ceil(lo / step) * step
    return list(np.arange(start, hi + 0.5 * step, step))


def _fmt(v):
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-3:
        return f"{v:.0e}"
    return f"{v:.4g}"


class _Axes:
    def __init__(self, series, logx, logy):
        xs = np.concatenate([s.x for s in series]) if series else np.zeros(1)
        ys = np.concatenate([s.y for s in series]) if series else np.zeros(1)
        ok = np.isfinite(xs) & np.isfinite(ys)
        if logx:
            ok &= xs > 0
        if logy:
            ok &= ys > 0
        xs, ys = (xs[ok], ys[ok]) if ok.any() else (np.ones(1), np.ones(1))
        self.logx, self.logy = logx, logy
        self.x0, self.x1 = self._range(xs, logx)
        self.y0, self.y1 = self._range(ys, logy)

    @staticmethod
    def _range(v, log):
        lo, hi = float(v.min()), float(v.max())
        if log:
            if lo == hi:
                return lo / 2, hi * 2
            return lo / 1.2, hi * 1.2
        if lo == hi:
            return lo - 1.0, hi + 1.0
        pad = 0.05 * (hi - lo)
        return lo - pad, hi + pad

    def _t(self, v, lo, hi, log):
        if log:
            return (math.log10(v) - math.log10(lo)) / (math.log10(hi) - math.log10(lo))
        return (v - lo) / (hi - lo)

    def px(self, x):
        w = WIDTH - MARGIN["left"] - MARGIN["right"]
        return MARGIN["left"] + w * self._t(x, self.x0, self.x1, self.logx)

    def py(self, y):
        h = HEIGHT - MARGIN["top"] - MARGIN["bottom"]
        return HEIGHT - MARGIN["bottom"] - h * self._t(y, self.y0, self.y1, self.logy)

    def visible(self, x, y):
        if not (math.isfinite(x) and math.isfinite(y)):
            return False
        return not ((self.logx and x <= 0) or (self.logy and y <= 0))


def _frame(ax, title, xlabel, ylabel):
    L, R = MARGIN["left"], WIDTH - MARGIN["right"]
    T, B = MARGIN["top"], HEIGHT - MARGIN["bottom"]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<text x="{(L + R) / 2}" y="28" text-anchor="middle" font-size="16">{escape(title)}</text>',
           f'<rect x="{L}" y="{T}" width="{R - L}" height="{B - T}" fill="none" stroke="black"/>']
    for v in _ticks(ax.x0, ax.x1, ax.logx):
        if ax.x0 <= v <= ax.x1:
            x = ax.px(v)
            out.append(f'<line x1="{x:.2f}" y1="{B}" x2="{x:.2f}" y2="{B + 5}" stroke="black"/>')
            out.append(f'<text x="{x:.2f}" y="{B + 20}" text-anchor="middle">{_fmt(v)}</text>')
    for v in _ticks(ax.y0, ax.y1, ax.logy):
        if ax.y0 <= v <= ax.y1:
            y = ax.py(v)
            out.append(f'<line x1="{L - 5}" y1="{y:.2f}" x2="{L}" y2="{y:.2f}" stroke="black"/>')
            out.append(f'<text x="{L - 8}" y="{y + 4:.2f}" text-anchor="end">{_fmt(v)}</text>')
    out.append(f'<text x="{(L + R) / 2}" y="{HEIGHT - 15}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="20" y="{(T + B) / 2}" text-anchor="middle" '
               f'transform="rotate(-90 20 {(T + B) / 2})">{escape(ylabel)}</text>')
    return out


def _legend(series):
    out = []
    x = WIDTH - MARGIN["right"] + 15
    for k, s in enumerate(series):
        y = MARGIN["top"] + 10 + 20 * k
        c = PALETTE[k % len(PALETTE)]
        dash = ' stroke-dasharray="6,4"' if s.dashed else ""
        out.append(f'<line x1="{x}" y1="{y}" x2="{x + 25}" y2="{y}" stroke="{c}" stroke-width="2"{dash}/>')
        out.append(f'<text x="{x + 32}" y="{y + 4}">{escape(s.label)}</text>')
    return out


def line_chart(path, series, title="", xlabel="", ylabel="", logx=False, logy=False):
    """Write a line chart of ``series`` to ``path``."""
    ax = _Axes(series, logx, logy)
    out = _frame(ax, title, xlabel, ylabel)
    for k, s in enumerate(series):
        c = PALETTE[k % len(PALETTE)]
        pts = [f"{ax.px(x):.2f},{ax.py(y):.2f}" for x, y in zip(s.x, s.y) if ax.visible(x, y)]
        dash = ' stroke-dasharray="6,4"' if s.dashed else ""
        if pts:
            out.append(f'<polyline fill="none" stroke="{c}" stroke-width="2"{dash} points="{" ".join(pts)}"/>')
        if s.markers:
            for x, y in zip(s.x, s.y):
                if ax.visible(x, y):
                    out.append(f'<circle cx="{ax.px(x):.2f}" cy="{ax.py(y):.2f}" r="3.5" fill="{c}"/>')
    out += _legend(series)
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


def scatter_chart(path, series, title="", xlabel="", ylabel="", connect=True):
    """Point clouds, optionally joined in order (trajectories)."""
    for s in series:
        s.markers = True
    if connect:
        line_chart(path, series, title, xlabel, ylabel)
        return
    ax = _Axes(series, False, False)
    out = _frame(ax, title, xlabel, ylabel)
    for k, s in enumerate(series):
        c = PALETTE[k % len(PALETTE)]
        for x, y in zip(s.x, s.y):
            if ax.visible(x, y):
                out.append(f'<circle cx="{ax.px(x):.2f}" cy="{ax.py(y):.2f}" r="3.5" fill="{c}"/>')
    out += _legend(series)
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
