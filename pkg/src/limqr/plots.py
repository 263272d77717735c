"""Minimal static SVG 1.1 plots: log-scale line charts and a discrete heatmap.

Output is a pure function of the input data, so identical runs give
byte-identical files.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 440
MARGIN = dict(left=80, right=150, top=40, bottom=60)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")
# discrete sequential colormap, low (good) to high (bad)
HEAT = ("#0b3d91", "#1f6fb5", "#3fa0c9", "#7fcdbb", "#c7e9b4", "#fed976", "#fd8d3c", "#e31a1c", "#800026")
NAN_FILL = "#dddddd"


@dataclass
class Series:
    label: str
    x: Sequence[float]
    y: Sequence[float]
    dashed: bool = False


def _num(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".")


def _tick_label(v: float, log: bool) -> str:
    if log:
        return f"1e{int(round(math.log10(v)))}"
    return f"{v:g}"


class _Axis:
    def __init__(self, values, log: bool, lo_px: float, hi_px: float):
        v = np.asarray([x for x in values if math.isfinite(x) and (x > 0 or not log)], dtype=float)
        if v.size == 0:
            v = np.array([1.0, 10.0] if log else [0.0, 1.0])
        self.log = log
        if log:
            a, b = math.floor(math.log10(v.min())), math.ceil(math.log10(v.max()))
            if a == b:
                b += 1
        else:
            a, b = float(v.min()), float(v.max())
            if a == b:
                a, b = a - 0.5, b + 0.5
        self.a, self.b = a, b
        self.lo_px, self.hi_px = lo_px, hi_px

    def __call__(self, v: float) -> float:
        t = math.log10(v) if self.log else v
        return self.lo_px + (t - self.a) / (self.b - self.a) * (self.hi_px - self.lo_px)

    def ticks(self) -> list[float]:
        if self.log:
            step = max(1, math.ceil((self.b - self.a) / 8))
            return [10.0**k for k in range(int(self.a), int(self.b) + 1, step)]
        return list(np.linspace(self.a, self.b, 6))

    def valid(self, v: float) -> bool:
        return math.isfinite(v) and (v > 0 or not self.log)


def _header(title: str) -> list[str]:
    return ['<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
            f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
            f'<text x="{WIDTH / 2 - 40:.0f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>']


def _frame(xa: _Axis, ya: _Axis, xlabel: str, ylabel: str) -> list[str]:
    L, T = MARGIN["left"], MARGIN["top"]
    R, B = WIDTH - MARGIN["right"], HEIGHT - MARGIN["bottom"]
    out = [f'<rect x="{L}" y="{T}" width="{R - L}" height="{B - T}" fill="none" stroke="black"/>']
    for t in xa.ticks():
        px = _num(xa(t))
        out.append(f'<line x1="{px}" y1="{B}" x2="{px}" y2="{B + 5}" stroke="black"/>')
        out.append(f'<text x="{px}" y="{B + 18}" text-anchor="middle">{_tick_label(t, xa.log)}</text>')
    for t in ya.ticks():
        py = _num(ya(t))
        out.append(f'<line x1="{L - 5}" y1="{py}" x2="{L}" y2="{py}" stroke="black"/>')
        out.append(f'<line x1="{L}" y1="{py}" x2="{R}" y2="{py}" stroke="#eeeeee"/>')
        out.append(f'<text x="{L - 8}" y="{py}" text-anchor="end" dominant-baseline="middle">'
                   f'{_tick_label(t, ya.log)}</text>')
    out.append(f'<text x="{(L + R) / 2:.0f}" y="{HEIGHT - 15}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="18" y="{(T + B) / 2:.0f}" text-anchor="middle" '
               f'transform="rotate(-90 18 {(T + B) / 2:.0f})">{escape(ylabel)}</text>')
    return out


def line_plot(series: Sequence[Series], xlabel: str, ylabel: str, title: str = "",
              xlog: bool = False, ylog: bool = True) -> str:
    """Polyline chart; non-finite or non-positive (on log axes) points break the line."""
    L, T = MARGIN["left"], MARGIN["top"]
    R, B = WIDTH - MARGIN["right"], HEIGHT - MARGIN["bottom"]
    xa = _Axis([v for s in series for v in s.x], xlog, L, R)
    ya = _Axis([v for s in series for v in s.y], ylog, B, T)
    out = _header(title) + _frame(xa, ya, xlabel, ylabel)
    for i, s in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        dash = ' stroke-dasharray="6,4"' if s.dashed else ""
        run: list[str] = []
        pieces: list[list[str]] = []
        for x, y in zip(s.x, s.y):
            if xa.valid(x) and ya.valid(y):
                run.append(f"{_num(xa(x))},{_num(ya(y))}")
            elif run:
                pieces.append(run)
                run = []
        if run:
            pieces.append(run)
        for pts in pieces:
            out.append(f'<polyline points="{" ".join(pts)}" fill="none" stroke="{color}" '
                       f'stroke-width="1.5"{dash}/>')
            for p in pts:
                cx, cy = p.split(",")
                out.append(f'<circle cx="{cx}" cy="{cy}" r="2.5" fill="{color}"/>')
        ly = T + 14 + 18 * i
        out.append(f'<line x1="{R + 10}" y1="{ly}" x2="{R + 30}" y2="{ly}" stroke="{color}" '
                   f'stroke-width="1.5"{dash}/>')
        out.append(f'<text x="{R + 35}" y="{ly}" dominant-baseline="middle">{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def heatmap(n_list: Sequence[int], eps_list: Sequence[float], values, title: str = "",
            value_label: str = "log10 error") -> str:
    """Discrete colormap of ``log10(values)`` with stencil size on x and shape parameter on y.

    ``values[i, j]`` belongs to ``n_list[i]`` and ``eps_list[j]``.  NaN cells are grey.
    """
    vals = np.asarray(values, dtype=float)
    if vals.shape != (len(n_list), len(eps_list)):
        raise ValueError("values must have shape (len(n_list), len(eps_list))")
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(vals > 0, np.log10(vals), np.nan)
    finite = logs[np.isfinite(logs)]
    lo = math.floor(finite.min()) if finite.size else -1
    hi = math.ceil(finite.max()) if finite.size else 0
    if hi == lo:
        hi = lo + 1
    L, T = MARGIN["left"], MARGIN["top"]
    R, B = WIDTH - MARGIN["right"], HEIGHT - MARGIN["bottom"]
    cw, ch = (R - L) / len(n_list), (B - T) / len(eps_list)
    out = _header(title)
    for i, n in enumerate(n_list):
        for j, eps in enumerate(eps_list):
            v = logs[i, j]
            if np.isfinite(v):
                k = int((v - lo) / (hi - lo) * len(HEAT))
                fill = HEAT[min(max(k, 0), len(HEAT) - 1)]
                text = f"{v:.1f}"
            else:
                fill, text = NAN_FILL, "nan"
            x, y = L + i * cw, B - (j + 1) * ch
            out.append(f'<rect x="{_num(x)}" y="{_num(y)}" width="{_num(cw)}" height="{_num(ch)}" '
                       f'fill="{fill}" stroke="white"/>')
            out.append(f'<text x="{_num(x + cw / 2)}" y="{_num(y + ch / 2)}" text-anchor="middle" '
                       f'dominant-baseline="middle" font-size="10">{text}</text>')
    for i, n in enumerate(n_list):
        out.append(f'<text x="{_num(L + (i + 0.5) * cw)}" y="{B + 18}" text-anchor="middle">{n}</text>')
    for j, eps in enumerate(eps_list):
        out.append(f'<text x="{L - 8}" y="{_num(B - (j + 0.5) * ch)}" text-anchor="end" '
                   f'dominant-baseline="middle">{eps:g}</text>')
    out.append(f'<text x="{(L + R) / 2:.0f}" y="{HEIGHT - 15}" text-anchor="middle">stencil size n</text>')
    out.append(f'<text x="18" y="{(T + B) / 2:.0f}" text-anchor="middle" '
               f'transform="rotate(-90 18 {(T + B) / 2:.0f})">shape parameter</text>')
    # legend
    step = (B - T) / len(HEAT)
    for k, color in enumerate(HEAT):
        y = B - (k + 1) * step
        out.append(f'<rect x="{R + 15}" y="{_num(y)}" width="20" height="{_num(step)}" fill="{color}"/>')
        out.append(f'<text x="{R + 40}" y="{_num(y + step / 2)}" dominant-baseline="middle" font-size="10">'
                   f'{lo + k * (hi - lo) / len(HEAT):.1f}</text>')
    out.append(f'<text x="{R + 15}" y="{T - 8}" font-size="10">{escape(value_label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
