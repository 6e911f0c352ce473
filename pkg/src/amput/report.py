"""Report emission: CSV tables, JSON documents and a dependency-free SVG plot.

Any object with ``columns``, ``table()``, ``to_dict()`` and ``series()``
can be emitted.  Floats are written with 17 significant digits so that a
CSV round trip is bit-exact.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return "none"
    return format(value, ".17g")


def write_csv(path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def read_csv(path):
    """Inverse of :func:`write_csv`: header plus rows of floats (``none`` becomes NaN)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [tuple(math.nan if v == "none" else float(v) for v in row) for row in reader]
    return header, rows


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def dumps(obj) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n"


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def render_svg(series: dict, title: str = "", width: int = 640, height: int = 420) -> str:
    """Log-log chart with one ``<polyline>`` per series."""
    margin = 60
    pts = [(x, y) for s in series.values() for x, y in s if x > 0 and y > 0]
    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{title}</text>']
    if pts:
        lx = np.log10([p[0] for p in pts])
        ly = np.log10([p[1] for p in pts])
        x0, x1 = float(lx.min()), float(lx.max())
        y0, y1 = float(ly.min()), float(ly.max())
        x1 = x1 if x1 > x0 else x0 + 1.0
        y1 = y1 if y1 > y0 else y0 + 1.0

        def px(x):
            return margin + (math.log10(x) - x0) / (x1 - x0) * (width - 2 * margin)

        def py(y):
            return height - margin - (math.log10(y) - y0) / (y1 - y0) * (height - 2 * margin)

        lines.append(f'<rect x="{margin}" y="{margin}" width="{width - 2 * margin}" '
                     f'height="{height - 2 * margin}" fill="none" stroke="#888"/>')
        lines.append(f'<text x="{margin}" y="{height - margin + 20}" font-size="11">'
                     f'10^{x0:.2f}</text>')
        lines.append(f'<text x="{width - margin}" y="{height - margin + 20}" font-size="11" '
                     f'text-anchor="end">10^{x1:.2f}</text>')
        lines.append(f'<text x="{margin - 5}" y="{height - margin}" font-size="11" '
                     f'text-anchor="end">10^{y0:.2f}</text>')
        lines.append(f'<text x="{margin - 5}" y="{margin + 10}" font-size="11" '
                     f'text-anchor="end">10^{y1:.2f}</text>')
        for i, (name, data) in enumerate(series.items()):
            color = _PALETTE[i % len(_PALETTE)]
            coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in data if x > 0 and y > 0)
            lines.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                         f'points="{coords}"><title>{name}</title></polyline>')
            lines.append(f'<text x="{width - margin + 4}" y="{margin + 14 * (i + 1)}" '
                         f'font-size="11" fill="{color}">{name}</text>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def emit_report(report, format: str, path) -> None:
    """Write ``report`` as ``csv``, ``json`` or ``svg``; I/O errors propagate unchanged."""
    path = Path(path)
    if format == "csv":
        write_csv(path, report.columns, report.table())
    elif format == "json":
        path.write_text(dumps(report.to_dict()))
    elif format == "svg":
        title = report.to_dict().get("kind", "")
        path.write_text(render_svg(report.series(), title=title))
    else:
        raise ValueError(f"unknown format {format!r}")
