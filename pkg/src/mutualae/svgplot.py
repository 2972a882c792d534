"""Minimal deterministic SVG line charts.

Hand-rolled on purpose: output bytes depend only on the data passed in
(no timestamps, no library version strings), so rerunning a pipeline
produces byte-identical artifacts.
"""

from __future__ import annotations

import numpy as np

WIDTH = 880
HEIGHT = 360
MARGIN_L = 64
MARGIN_R = 16
MARGIN_T = 36
MARGIN_B = 44

PALETTE = ["#1f6fb2", "#d1495b", "#3e8e41", "#8661c1", "#c98a2b", "#2aa6a1",
           "#7a7a7a", "#b04a98"]


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def _ticks(lo: float, hi: float, n: int = 5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(n - 1, 1)
    mag = 10.0 ** np.floor(np.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    else:
        step = 10.0 * mag
    start = np.ceil(lo / step) * step
    vals = []
    v = start
    while v <= hi + 1e-12 * step:
        vals.append(0.0 if abs(v) < 1e-12 * step else float(v))
        v += step
    return vals


def line_chart(path, series: dict, title: str = "", x_label: str = "",
               y_label: str = "") -> None:
    """Write one chart; ``series`` maps a legend name to (xs, ys)."""
    cleaned = {}
    for name, (xs, ys) in series.items():
        xs = np.asarray(xs, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64)
        if len(xs) != len(ys):
            raise ValueError(f"series {name!r}: x and y lengths differ")
        if len(xs) > 0:
            cleaned[name] = (xs, ys)
    if not cleaned:
        raise ValueError("nothing to plot")

    x_lo = min(float(np.min(xs)) for xs, _ in cleaned.values())
    x_hi = max(float(np.max(xs)) for xs, _ in cleaned.values())
    y_lo = min(float(np.min(ys)) for _, ys in cleaned.values())
    y_hi = max(float(np.max(ys)) for _, ys in cleaned.values())
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi, y_lo = y_lo + 0.5, y_lo - 0.5
    pad = 0.04 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    iw = WIDTH - MARGIN_L - MARGIN_R
    ih = HEIGHT - MARGIN_T - MARGIN_B

    def px(x):
        return MARGIN_L + iw * (x - x_lo) / (x_hi - x_lo)

    def py(y):
        return MARGIN_T + ih * (1.0 - (y - y_lo) / (y_hi - y_lo))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{iw}" height="{ih}" '
        f'fill="none" stroke="#444444" stroke-width="1"/>',
    ]
    if title:
        parts.append(f'<text x="{WIDTH // 2}" y="22" font-family="sans-serif" '
                     f'font-size="15" text-anchor="middle">{title}</text>')

    for tv in _ticks(y_lo, y_hi):
        yy = _fmt(py(tv))
        parts.append(f'<line x1="{MARGIN_L}" y1="{yy}" x2="{MARGIN_L + iw}" y2="{yy}" '
                     f'stroke="#dddddd" stroke-width="1"/>')
        parts.append(f'<text x="{MARGIN_L - 6}" y="{yy}" font-family="sans-serif" '
                     f'font-size="11" text-anchor="end" dominant-baseline="middle">'
                     f'{_fmt(tv)}</text>')
    for tv in _ticks(x_lo, x_hi, 7):
        xx = _fmt(px(tv))
        parts.append(f'<text x="{xx}" y="{HEIGHT - MARGIN_B + 16}" '
                     f'font-family="sans-serif" font-size="11" text-anchor="middle">'
                     f'{_fmt(tv)}</text>')
    if x_label:
        parts.append(f'<text x="{MARGIN_L + iw // 2}" y="{HEIGHT - 8}" '
                     f'font-family="sans-serif" font-size="12" text-anchor="middle">'
                     f'{x_label}</text>')
    if y_label:
        parts.append(f'<text x="14" y="{MARGIN_T + ih // 2}" font-family="sans-serif" '
                     f'font-size="12" text-anchor="middle" '
                     f'transform="rotate(-90 14 {MARGIN_T + ih // 2})">{y_label}</text>')

    for i, (name, (xs, ys)) in enumerate(cleaned.items()):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     f'stroke-width="1.5"/>')
        ly = MARGIN_T + 14 + 16 * i
        parts.append(f'<line x1="{MARGIN_L + 10}" y1="{ly - 4}" x2="{MARGIN_L + 34}" '
                     f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{MARGIN_L + 40}" y="{ly}" font-family="sans-serif" '
                     f'font-size="11">{name}</text>')

    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))
        fh.write("\n")
