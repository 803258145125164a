"""Self-contained SVG rendering of experiment curves.

Minimal, dependency-free line plots: one polyline per series with circle
markers, a shaded band of plus/minus two Monte Carlo standard errors, and
labelled axes.  Output is SVG 1.1 with deterministic bytes for identical
inputs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

from .errors import MissingColumn

WIDTH, HEIGHT = 720, 460
MARGIN_LEFT, MARGIN_RIGHT = 70, 160
MARGIN_TOP, MARGIN_BOTTOM = 40, 55

PALETTE = ("#1b6ca8", "#d1495b", "#3a7d44", "#8e5ba6", "#c77d1e", "#4a4a4a")


@dataclass(frozen=True)
class PlotSpec:
    input_path: str
    output_path: str
    x_column: str = "s"
    series_column: str = "method"
    y_column: str = "value"
    band_column: str = "mc_se"
    title: str = ""


def _read_series(spec: PlotSpec):
    with open(spec.input_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for column in (spec.x_column, spec.series_column, spec.y_column, spec.band_column):
            if column not in header:
                raise MissingColumn(f"{spec.input_path}: no column {column!r}")
        rows = list(reader)
    if not rows:
        raise ValueError(f"{spec.input_path}: no data rows to plot")
    series: dict[str, list[tuple[float, float, float]]] = {}
    for row in rows:
        name = row[spec.series_column]
        band = row[spec.band_column]
        series.setdefault(name, []).append(
            (
                float(row[spec.x_column]),
                float(row[spec.y_column]),
                float(band) if band.strip() else 0.0,
            )
        )
    for points in series.values():
        points.sort(key=lambda p: p[0])
    return series


def _ticks(lo: float, hi: float, count: int = 5):
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    step = (hi - lo) / (count - 1)
    return [lo + i * step for i in range(count)], lo, hi


def _fmt(value: float) -> str:
    return f"{value:.4g}"


def render_plot(spec: PlotSpec) -> None:
    series = _read_series(spec)
    xs = [p[0] for pts in series.values() for p in pts]
    ys = [p[1] + 2 * p[2] for pts in series.values() for p in pts]
    ys += [p[1] - 2 * p[2] for pts in series.values() for p in pts]
    x_ticks, x_lo, x_hi = _ticks(min(xs), max(xs))
    y_ticks, y_lo, y_hi = _ticks(min(ys), max(ys))

    def sx(x: float) -> float:
        return MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)

    def sy(y: float) -> float:
        return HEIGHT - MARGIN_BOTTOM - (y - y_lo) / (y_hi - y_lo) * (
            HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
        )

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if spec.title:
        parts.append(
            f'<text x="{WIDTH / 2:.1f}" y="24" text-anchor="middle" '
            f'font-family="sans-serif" font-size="16">{spec.title}</text>'
        )

    axis_y = HEIGHT - MARGIN_BOTTOM
    parts.append(
        f'<line x1="{MARGIN_LEFT}" y1="{axis_y}" x2="{WIDTH - MARGIN_RIGHT}" '
        f'y2="{axis_y}" stroke="black"/>'
    )
    parts.append(
        f'<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" x2="{MARGIN_LEFT}" '
        f'y2="{axis_y}" stroke="black"/>'
    )
    for tick in x_ticks:
        px = sx(tick)
        parts.append(f'<line x1="{px:.1f}" y1="{axis_y}" x2="{px:.1f}" y2="{axis_y + 5}" stroke="black"/>')
        parts.append(
            f'<text x="{px:.1f}" y="{axis_y + 20}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12">{_fmt(tick)}</text>'
        )
    for tick in y_ticks:
        py = sy(tick)
        parts.append(f'<line x1="{MARGIN_LEFT - 5}" y1="{py:.1f}" x2="{MARGIN_LEFT}" y2="{py:.1f}" stroke="black"/>')
        parts.append(
            f'<text x="{MARGIN_LEFT - 9}" y="{py + 4:.1f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="12">{_fmt(tick)}</text>'
        )
    parts.append(
        f'<text x="{(MARGIN_LEFT + WIDTH - MARGIN_RIGHT) / 2:.1f}" y="{HEIGHT - 12}" '
        f'text-anchor="middle" font-family="sans-serif" font-size="13">{spec.x_column}</text>'
    )
    parts.append(
        f'<text x="18" y="{(MARGIN_TOP + axis_y) / 2:.1f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13" '
        f'transform="rotate(-90 18 {(MARGIN_TOP + axis_y) / 2:.1f})">{spec.y_column}</text>'
    )

    for index, (name, points) in enumerate(sorted(series.items())):
        color = PALETTE[index % len(PALETTE)]
        if any(p[2] > 0 for p in points) and len(points) > 1:
            upper = [(sx(x), sy(y + 2 * se)) for x, y, se in points]
            lower = [(sx(x), sy(y - 2 * se)) for x, y, se in reversed(points)]
            band = " ".join(f"{px:.2f},{py:.2f}" for px, py in upper + lower)
            parts.append(f'<polygon points="{band}" fill="{color}" fill-opacity="0.15"/>')
        if len(points) > 1:
            line = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y, _ in points)
            parts.append(
                f'<polyline points="{line}" fill="none" stroke="{color}" stroke-width="1.8"/>'
            )
        for x, y, _ in points:
            parts.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" fill="{color}"/>')
        legend_y = MARGIN_TOP + 18 * index
        legend_x = WIDTH - MARGIN_RIGHT + 14
        parts.append(
            f'<line x1="{legend_x}" y1="{legend_y}" x2="{legend_x + 22}" y2="{legend_y}" '
            f'stroke="{color}" stroke-width="1.8"/>'
        )
        parts.append(
            f'<text x="{legend_x + 28}" y="{legend_y + 4}" font-family="sans-serif" '
            f'font-size="12">{name}</text>'
        )

    parts.append("</svg>")
    with open(spec.output_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")
