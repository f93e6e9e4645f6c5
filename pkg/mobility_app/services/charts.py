"""Graphiques SVG minimalistes (axes, graduations, une polyligne par série)."""
from __future__ import annotations

import math
from pathlib import Path
from typing import Dict, List, Sequence, Tuple
from xml.sax.saxutils import escape

import pandas as pd

from .utils import format_sig

WIDTH, HEIGHT = 720, 420
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 70, 160, 40, 50
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def _nice_ticks(low: float, high: float, count: int = 5) -> List[float]:
    if high <= low:
        high = low + 1.0
    raw = (high - low) / count
    magnitude = 10 ** math.floor(math.log10(raw))
    step = next(m * magnitude for m in (1, 2, 5, 10) if m * magnitude >= raw)
    first = math.floor(low / step) * step
    ticks = []
    value = first
    while value <= high + 1e-9 * step:
        ticks.append(round(value, 10))
        value += step
    return ticks


def render_line_chart(
    title: str,
    x: Sequence[float],
    series: Dict[str, Sequence[float]],
    y_label: str,
) -> str:
    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    values = [value for points in series.values() for value in points if math.isfinite(value)]
    x_ticks = _nice_ticks(min(x), max(x)) if x else [0.0, 1.0]
    y_ticks = _nice_ticks(min(values + [0.0]), max(values + [1e-9])) if values else [0.0, 1.0]
    x_lo, x_hi = x_ticks[0], max(x_ticks[-1], x_ticks[0] + 1e-9)
    y_lo, y_hi = y_ticks[0], max(y_ticks[-1], y_ticks[0] + 1e-9)

    def sx(value: float) -> float:
        return MARGIN_LEFT + (value - x_lo) / (x_hi - x_lo) * plot_w

    def sy(value: float) -> float:
        return MARGIN_TOP + plot_h - (value - y_lo) / (y_hi - y_lo) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.2f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP + plot_h}" x2="{MARGIN_LEFT + plot_w}" '
        f'y2="{MARGIN_TOP + plot_h}" stroke="black"/>',
        f'<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" x2="{MARGIN_LEFT}" y2="{MARGIN_TOP + plot_h}" stroke="black"/>',
    ]
    for tick in x_ticks:
        px = sx(tick)
        parts.append(
            f'<line x1="{px:.2f}" y1="{MARGIN_TOP + plot_h}" x2="{px:.2f}" y2="{MARGIN_TOP + plot_h + 5}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{px:.2f}" y="{MARGIN_TOP + plot_h + 18}" text-anchor="middle">{format_sig(tick)}</text>'
        )
    for tick in y_ticks:
        py = sy(tick)
        parts.append(f'<line x1="{MARGIN_LEFT - 5}" y1="{py:.2f}" x2="{MARGIN_LEFT}" y2="{py:.2f}" stroke="black"/>')
        parts.append(f'<text x="{MARGIN_LEFT - 8}" y="{py + 4:.2f}" text-anchor="end">{format_sig(tick)}</text>')
    parts.append(
        f'<text x="18" y="{MARGIN_TOP + plot_h / 2:.2f}" text-anchor="middle" '
        f'transform="rotate(-90 18 {MARGIN_TOP + plot_h / 2:.2f})">{escape(y_label)}</text>'
    )

    for index, (name, points) in enumerate(series.items()):
        color = PALETTE[index % len(PALETTE)]
        coords = " ".join(
            f"{sx(px):.2f},{sy(py):.2f}" for px, py in zip(x, points) if math.isfinite(py)
        )
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{coords}"/>')
        legend_y = MARGIN_TOP + 16 * index + 8
        legend_x = MARGIN_LEFT + plot_w + 12
        parts.append(
            f'<line x1="{legend_x}" y1="{legend_y}" x2="{legend_x + 18}" y2="{legend_y}" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(f'<text x="{legend_x + 24}" y="{legend_y + 4}">{escape(name)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def charts_from_report_csv(csv_path: Path | str) -> Dict[str, str]:
    """Construit les deux graphiques à partir du CSV écrit, jamais des résultats en mémoire."""
    frame = pd.read_csv(csv_path)
    years = [float(year) for year in frame["year"]]
    mfpt_columns: List[Tuple[str, str]] = [
        (column, column[len("mfpt_") : -len("_years")].replace("_", " → ", 1))
        for column in frame.columns
        if column.startswith("mfpt_")
    ]
    mixing_svg = render_line_chart(
        "Temps de mélange par année",
        years,
        {"temps de mélange": [float(value) for value in frame["mixing_time_years"]]},
        "années",
    )
    mfpt_svg = render_line_chart(
        "MFPT par année",
        years,
        {label: [float(value) for value in frame[column]] for column, label in mfpt_columns},
        "années",
    )
    return {"mixing_time.svg": mixing_svg, "mfpt.svg": mfpt_svg}
