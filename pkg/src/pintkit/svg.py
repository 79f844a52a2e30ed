"""Minimal deterministic SVG charts (line and grouped-bar) written as plain text."""
from __future__ import annotations

import math
from typing import Sequence
from xml.sax.saxutils import escape

__all__ = ["line_chart", "bar_chart"]

_W, _H = 640, 400
_LEFT, _RIGHT, _TOP, _BOTTOM = 70, 20, 40, 50
_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def _frame(title: str, xlabel: str, ylabel: str) -> list[str]:
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<text x="{_W / 2}" y="{_H - 10}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="16" y="{_H / 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {_H / 2})">{escape(ylabel)}</text>',
        f'<line x1="{_LEFT}" y1="{_H - _BOTTOM}" x2="{_W - _RIGHT}" y2="{_H - _BOTTOM}" stroke="black"/>',
        f'<line x1="{_LEFT}" y1="{_TOP}" x2="{_LEFT}" y2="{_H - _BOTTOM}" stroke="black"/>',
    ]


def _legend(names: Sequence[str]) -> list[str]:
    out = []
    for j, name in enumerate(names):
        y = _TOP + 14 * j
        color = _PALETTE[j % len(_PALETTE)]
        out.append(f'<rect x="{_W - _RIGHT - 130}" y="{y - 8}" width="10" height="10" fill="{color}"/>')
        out.append(f'<text x="{_W - _RIGHT - 115}" y="{y + 1}" font-size="11">{escape(str(name))}</text>')
    return out


def line_chart(
    series: dict[str, tuple[Sequence[float], Sequence[float]]],
    title: str,
    xlabel: str,
    ylabel: str,
    log_y: bool = False,
) -> str:
    """One ``<polyline class="series">`` per entry of ``series`` (name -> (x, y)).

    With ``log_y`` the y values are plotted as log10; non-positive values are dropped.
    """
    pts = {}
    for name, (xs, ys) in series.items():
        pairs = []
        for x, y in zip(xs, ys):
            if y is None or not math.isfinite(y) or (log_y and y <= 0):
                continue
            pairs.append((float(x), math.log10(y) if log_y else float(y)))
        pts[name] = pairs
    allx = [p[0] for v in pts.values() for p in v] or [0.0, 1.0]
    ally = [p[1] for v in pts.values() for p in v] or [0.0, 1.0]
    x0, x1 = min(allx), max(allx)
    y0, y1 = min(ally), max(ally)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1

    def sx(x):
        return _LEFT + (x - x0) / (x1 - x0) * (_W - _LEFT - _RIGHT)

    def sy(y):
        return _H - _BOTTOM - (y - y0) / (y1 - y0) * (_H - _TOP - _BOTTOM)

    out = _frame(title, xlabel, ylabel)
    for t in _ticks(y0, y1):
        label = f"1e{t:.1f}" if log_y else f"{t:.3g}"
        out.append(f'<text x="{_LEFT - 5}" y="{_fmt(sy(t) + 4)}" text-anchor="end" font-size="10">{label}</text>')
    for t in _ticks(x0, x1):
        out.append(f'<text x="{_fmt(sx(t))}" y="{_H - _BOTTOM + 15}" text-anchor="middle" font-size="10">{t:.3g}</text>')
    for j, (name, pairs) in enumerate(pts.items()):
        coords = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in pairs)
        color = _PALETTE[j % len(_PALETTE)]
        out.append(f'<polyline class="series" data-name="{escape(str(name))}" points="{coords}" '
                   f'fill="none" stroke="{color}" stroke-width="2"/>')
    out += _legend(list(pts))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def bar_chart(
    categories: Sequence[str],
    series: dict[str, Sequence[float]],
    title: str,
    xlabel: str,
    ylabel: str,
) -> str:
    """Grouped bars: one ``<g class="series">`` per series with one ``<rect>`` per category."""
    cats = [str(c) for c in categories]
    vals = [v for vs in series.values() for v in vs if v is not None and math.isfinite(v)]
    top = max(vals + [0.0]) or 1.0
    n_series = max(len(series), 1)
    slot = (_W - _LEFT - _RIGHT) / max(len(cats), 1)
    bar = 0.8 * slot / n_series
    plot_h = _H - _TOP - _BOTTOM

    out = _frame(title, xlabel, ylabel)
    for t in _ticks(0.0, top):
        y = _H - _BOTTOM - t / top * plot_h
        out.append(f'<text x="{_LEFT - 5}" y="{_fmt(y + 4)}" text-anchor="end" font-size="10">{t:.3g}</text>')
    for c, name in enumerate(cats):
        x = _LEFT + slot * (c + 0.5)
        out.append(f'<text x="{_fmt(x)}" y="{_H - _BOTTOM + 15}" text-anchor="middle" font-size="10">{escape(name)}</text>')
    for j, (name, vs) in enumerate(series.items()):
        color = _PALETTE[j % len(_PALETTE)]
        out.append(f'<g class="series" data-name="{escape(str(name))}" fill="{color}">')
        for c, v in enumerate(vs):
            v = 0.0 if v is None or not math.isfinite(v) else float(v)
            h = v / top * plot_h
            x = _LEFT + slot * c + 0.1 * slot + bar * j
            out.append(f'<rect x="{_fmt(x)}" y="{_fmt(_H - _BOTTOM - h)}" width="{_fmt(bar)}" '
                       f'height="{_fmt(h)}" data-value="{v!r}"/>')
        out.append("</g>")
    out += _legend(list(series))
    out.append("</svg>")
    return "\n".join(out) + "\n"
