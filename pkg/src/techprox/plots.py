"""Static SVG charts: per-pair index curves, error histograms, centroid layouts.

Output is plain text built from fixed-precision numbers, so identical inputs
give byte-identical documents.
"""
from __future__ import annotations

from typing import Mapping, Sequence
from xml.sax.saxutils import escape

import numpy as np

from techprox.clustering import LayoutPoint
from techprox.indices import IndexKind
from techprox.processing import ProcessedSeries

KIND_COLORS = {
    IndexKind.CITATION_FWD: "#1f77b4",
    IndexKind.CITATION_REV: "#ff7f0e",
    IndexKind.COLLAB_INCREMENTAL: "#2ca02c",
    IndexKind.COLLAB_NON_INCREMENTAL: "#d62728",
    IndexKind.KEYWORD: "#9467bd",
}
KIND_LABELS = {
    IndexKind.CITATION_FWD: "Index 1: citations t1 to t2",
    IndexKind.CITATION_REV: "Index 2: citations t2 to t1",
    IndexKind.COLLAB_INCREMENTAL: "Index 3: collaboration (incremental h)",
    IndexKind.COLLAB_NON_INCREMENTAL: "Index 4: collaboration (non-incremental h)",
    IndexKind.KEYWORD: "Index 5: shared keywords",
}
FONT = 'font-family="Helvetica,Arial,sans-serif"'


def _f(v: float) -> str:
    return f"{v:.2f}"


class _Frame:
    """Maps data coordinates onto a plot rectangle."""

    def __init__(self, x0, x1, y0, y1, left, top, width, height):
        self.x0, self.x1 = float(x0), float(x1) if x1 > x0 else float(x0) + 1.0
        self.y0, self.y1 = float(y0), float(y1) if y1 > y0 else float(y0) + 1.0
        self.left, self.top, self.width, self.height = left, top, width, height

    def x(self, v: float) -> float:
        return self.left + (v - self.x0) / (self.x1 - self.x0) * self.width

    def y(self, v: float) -> float:
        return self.top + self.height - (v - self.y0) / (self.y1 - self.y0) * self.height


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** np.floor(np.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=raw)
    first = np.ceil(lo / step) * step
    return [float(v) for v in np.arange(first, hi + step * 1e-9, step)]


def _axes(frame: _Frame, xticks: Sequence[tuple[float, str]], yticks: Sequence[float],
          xlabel: str, ylabel: str) -> list[str]:
    f = frame
    bottom = f.top + f.height
    parts = [
        f'<rect x="{_f(f.left)}" y="{_f(f.top)}" width="{_f(f.width)}" height="{_f(f.height)}" '
        f'fill="none" stroke="#444" stroke-width="1"/>',
    ]
    for v, label in xticks:
        x = f.x(v)
        parts.append(f'<line x1="{_f(x)}" y1="{_f(bottom)}" x2="{_f(x)}" y2="{_f(bottom + 5)}" stroke="#444"/>')
        parts.append(f'<text x="{_f(x)}" y="{_f(bottom + 18)}" text-anchor="middle" font-size="11" {FONT}>'
                     f'{escape(label)}</text>')
    for v in yticks:
        y = f.y(v)
        parts.append(f'<line x1="{_f(f.left - 5)}" y1="{_f(y)}" x2="{_f(f.left + f.width)}" y2="{_f(y)}" '
                     f'stroke="#ddd" stroke-width="0.5"/>')
        parts.append(f'<text x="{_f(f.left - 8)}" y="{_f(y + 4)}" text-anchor="end" font-size="11" {FONT}>'
                     f'{v:g}</text>')
    parts.append(f'<text x="{_f(f.left + f.width / 2)}" y="{_f(bottom + 38)}" text-anchor="middle" '
                 f'font-size="12" {FONT}>{escape(xlabel)}</text>')
    cy = f.top + f.height / 2
    parts.append(f'<text x="{_f(f.left - 48)}" y="{_f(cy)}" text-anchor="middle" font-size="12" {FONT} '
                 f'transform="rotate(-90 {_f(f.left - 48)} {_f(cy)})">{escape(ylabel)}</text>')
    return parts


def _document(width: int, height: int, title: str, body: list[str]) -> str:
    head = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.2f}" y="24" text-anchor="middle" font-size="15" font-weight="bold" {FONT}>'
        f'{escape(title)}</text>',
    ]
    return "\n".join(head + body + ["</svg>"]) + "\n"


def render_series_plot(
    items: Sequence[ProcessedSeries],
    title: str,
    end_month=None,
) -> str:
    """One chart with a point layer and a fitted curve per index kind.

    Points are the interpolated monthly values (filled months drawn hollow);
    every series contributes exactly one point per month. The legend lists
    each kind with its interpolation rate.
    """
    items = sorted(items, key=lambda p: p.kind.number)
    if not items:
        raise ValueError("no series to plot")
    n = len(items[0].filled)
    start = items[0].start
    width, height = 960, 520
    frame_w = 600
    x0 = start.year + (start.month - 1) / 12
    x1 = x0 + n / 12
    top_v = max(max(float(np.max(p.filled)), float(np.max(p.fitted))) for p in items)
    ymax = _nice_ticks(0.0, top_v if top_v > 0 else 1.0)[-1]
    if ymax < top_v:
        ymax = top_v
    frame = _Frame(x0, x1, 0.0, ymax if ymax > 0 else 1.0, 80, 50, frame_w, 400)
    years = range(start.year, int(np.ceil(x1)) + 1)
    step = max(1, len(years) // 10)
    xticks = [(float(y), str(y)) for y in years if y >= x0 - 1e-9 and y <= x1 + 1e-9 and (y - start.year) % step == 0]
    body = _axes(frame, xticks, _nice_ticks(0.0, frame.y1), "Year", "Index value")

    for p in items:
        color = KIND_COLORS[p.kind]
        t = np.arange(len(p.filled))
        xs = x0 + t / 12
        fitted = np.clip(p.fitted, frame.y0, frame.y1)
        path = " ".join(f"{_f(frame.x(a))},{_f(frame.y(b))}" for a, b in zip(xs, fitted))
        body.append(f'<polyline class="fit" data-kind="{p.kind.value}" points="{path}" fill="none" '
                    f'stroke="{color}" stroke-width="2"/>')
        missing = np.isnan(p.raw)
        for a, b, m in zip(xs, p.filled, missing):
            fill = "white" if m else color
            body.append(f'<circle class="pt" data-kind="{p.kind.value}" cx="{_f(frame.x(a))}" '
                        f'cy="{_f(frame.y(b))}" r="2" fill="{fill}" stroke="{color}" stroke-width="0.8"/>')

    lx = frame.left + frame.width + 20
    body.append(f'<text x="{_f(lx)}" y="62" font-size="12" font-weight="bold" {FONT}>Legend</text>')
    for i, p in enumerate(items):
        y = 84 + i * 40
        color = KIND_COLORS[p.kind]
        body.append(f'<g class="legend-entry" data-kind="{p.kind.value}">')
        body.append(f'<line x1="{_f(lx)}" y1="{_f(y)}" x2="{_f(lx + 22)}" y2="{_f(y)}" stroke="{color}" stroke-width="2"/>')
        body.append(f'<circle cx="{_f(lx + 11)}" cy="{_f(y)}" r="3" fill="{color}"/>')
        body.append(f'<text x="{_f(lx + 30)}" y="{_f(y + 4)}" font-size="11" {FONT}>'
                    f'{escape(KIND_LABELS[p.kind])}</text>')
        body.append(f'<text x="{_f(lx + 30)}" y="{_f(y + 18)}" font-size="10" fill="#555" {FONT}>'
                    f'interpolation rate {p.interpolation_rate:.0%}, fit degree {p.fit.degree}</text>')
        body.append("</g>")
    yl = 84 + len(items) * 40
    body.append(f'<text x="{_f(lx)}" y="{_f(yl)}" font-size="10" fill="#555" {FONT}>'
                f'hollow markers: interpolated months</text>')
    return _document(width, height, title, body)


def render_histogram(buckets: Mapping[str, Sequence[tuple[float, float, int]]], title: str) -> str:
    """Grouped bars of fold-SMAPE counts per model over [0, 200]."""
    models = list(buckets)
    width, height = 960, 480
    frame = _Frame(0.0, 200.0, 0.0, 1.0, 80, 50, 640, 360)
    top = max((c for b in buckets.values() for _, _, c in b), default=0)
    yticks = _nice_ticks(0.0, max(top, 1))
    frame.y1 = max(yticks[-1], float(top), 1.0)
    body = _axes(frame, [(float(v), f"{v:g}") for v in range(0, 201, 20)], yticks, "SMAPE", "Fold count")
    palette = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2"]
    n = max(len(models), 1)
    for mi, model in enumerate(models):
        color = palette[mi % len(palette)]
        for lo, hi, count in buckets[model]:
            if not count:
                continue
            bw = (frame.x(hi) - frame.x(lo)) / n
            x = frame.x(lo) + mi * bw
            y = frame.y(count)
            body.append(f'<rect class="bar" x="{_f(x)}" y="{_f(y)}" width="{_f(bw)}" '
                        f'height="{_f(frame.y(0) - y)}" fill="{color}"/>')
    lx = frame.left + frame.width + 20
    for mi, model in enumerate(models):
        y = 70 + mi * 22
        body.append(f'<rect x="{_f(lx)}" y="{_f(y - 9)}" width="12" height="12" fill="{palette[mi % len(palette)]}"/>')
        body.append(f'<text x="{_f(lx + 18)}" y="{_f(y + 1)}" font-size="11" {FONT}>{escape(model)}</text>')
    return _document(width, height, title, body)


def render_layout(points: Sequence[LayoutPoint], title: str) -> str:
    """Cluster centroids placed by multidimensional scaling, radius by size."""
    width, height = 560, 520
    xs = [p.x for p in points] or [0.0]
    ys = [p.y for p in points] or [0.0]
    span = max(max(xs) - min(xs), max(ys) - min(ys), 1e-9)
    cx, cy = (max(xs) + min(xs)) / 2, (max(ys) + min(ys)) / 2
    frame = _Frame(cx - 0.65 * span, cx + 0.65 * span, cy - 0.65 * span, cy + 0.65 * span, 60, 50, 440, 420)
    body = [f'<rect x="60" y="50" width="440" height="420" fill="none" stroke="#444"/>']
    biggest = max((p.size for p in points), default=1) or 1
    for p in points:
        r = 6 + 24 * np.sqrt(p.size / biggest)
        body.append(f'<circle class="centroid" cx="{_f(frame.x(p.x))}" cy="{_f(frame.y(p.y))}" r="{_f(r)}" '
                    f'fill="#1f77b4" fill-opacity="0.35" stroke="#1f77b4"/>')
        body.append(f'<text x="{_f(frame.x(p.x))}" y="{_f(frame.y(p.y) + 4)}" text-anchor="middle" '
                    f'font-size="11" {FONT}>{p.cluster} ({p.size})</text>')
    return _document(width, height, title, body)
