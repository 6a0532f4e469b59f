"""
Minimal SVG line charts for eyeballing CSV output. Not used by any computation.
"""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

_COLOURS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
_W, _H, _PAD = 640, 400, 56


def _ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    return np.linspace(lo, hi, n)


def line_chart(series: dict[str, tuple], title: str = "", xlabel: str = "", ylabel: str = "") -> str:
    """Render named ``(x, y)`` series as an SVG document string."""
    xs = np.concatenate([np.asarray(x, dtype=float) for x, _ in series.values()])
    ys = np.concatenate([np.asarray(y, dtype=float) for _, y in series.values()])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0

    def sx(v):
        return _PAD + (v - x0) / (x1 - x0) * (_W - 2 * _PAD)

    def sy(v):
        return _H - _PAD - (v - y0) / (y1 - y0) * (_H - 2 * _PAD)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" font-family="sans-serif" font-size="11">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{_PAD}" y1="{_H - _PAD}" x2="{_W - _PAD}" y2="{_H - _PAD}" stroke="black"/>',
        f'<line x1="{_PAD}" y1="{_PAD}" x2="{_PAD}" y2="{_H - _PAD}" stroke="black"/>',
    ]
    for v in _ticks(x0, x1):
        out.append(f'<text x="{sx(v):.1f}" y="{_H - _PAD + 16}" text-anchor="middle">{v:.3g}</text>')
    for v in _ticks(y0, y1):
        out.append(f'<text x="{_PAD - 6}" y="{sy(v) + 4:.1f}" text-anchor="end">{v:.3g}</text>')
    if y0 < 0 < y1:
        out.append(f'<line x1="{_PAD}" y1="{sy(0):.1f}" x2="{_W - _PAD}" y2="{sy(0):.1f}" stroke="#bbb"/>')
    out.append(f'<text x="{_W / 2}" y="{_H - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="14" y="{_H / 2}" text-anchor="middle" transform="rotate(-90 14 {_H / 2})">'
               f'{escape(ylabel)}</text>')
    for i, (name, (x, y)) in enumerate(series.items()):
        colour = _COLOURS[i % len(_COLOURS)]
        pts = " ".join(f"{sx(a):.1f},{sy(b):.1f}" for a, b in zip(np.asarray(x, float), np.asarray(y, float)))
        out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{_W - _PAD - 4}" y="{_PAD + 14 * i}" text-anchor="end" fill="{colour}">'
                   f'{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_line_chart(path: str | Path, series: dict[str, tuple], **labels) -> None:
    Path(path).write_text(line_chart(series, **labels))
