"""Self-contained SVG 1.1 line and bar charts from CSV tables.

Output is a pure function of (table, spec): coordinates are printed with a
fixed precision and series are ordered by first appearance, so identical
inputs produce identical bytes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

from .errors import ConfigError, UnknownColumn
from .harness import CsvTable

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")

_MARGIN = (70, 20, 40, 55)  # left, right, top, bottom


@dataclass(frozen=True)
class PlotSpec:
    x: str
    y: str
    group: str | None = None
    kind: str = "line"
    title: str = ""
    x_label: str | None = None
    y_label: str | None = None
    width: int = 640
    height: int = 400

    def __post_init__(self):
        if self.kind not in ("line", "bar"):
            raise ConfigError(f"plot kind must be 'line' or 'bar', got {self.kind!r}")
        if self.width < 200 or self.height < 150:
            raise ConfigError("plot must be at least 200x150")

    @classmethod
    def from_dict(cls, d: dict) -> PlotSpec:
        allowed = set(cls.__dataclass_fields__)
        unknown = set(d) - allowed
        if unknown:
            raise ConfigError(f"unknown plot spec keys: {', '.join(sorted(unknown))}")
        for key in ("x", "y"):
            if key not in d:
                raise ConfigError(f"plot spec needs {key!r}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> PlotSpec:
        with open(path, encoding="utf-8") as fh:
            try:
                return cls.from_dict(json.load(fh))
            except json.JSONDecodeError as exc:
                raise ConfigError(f"plot spec is not valid JSON: {exc}") from None


def _f(v: float) -> str:
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


def _label(v: float) -> str:
    if v == 0:
        return "0"
    return f"{v:.6g}"


def nice_ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    """Round tick positions covering ``[lo, hi]``."""
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return [0.0, 1.0]
    if hi - lo <= 1e-9 * max(abs(lo), abs(hi), 1e-290):
        # flat or below float resolution: pad around the value
        pad = abs(lo) * 0.1 or 1.0
        lo, hi = lo - pad, hi + pad
    raw = (hi - lo) / target
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    start = math.floor(lo / step) * step
    n = max(1, math.ceil((hi - start) / step - 1e-9))
    return [start + step * i for i in range(n + 1)]


def _numeric(v) -> float | None:
    if isinstance(v, bool):
        return float(v)
    if isinstance(v, (int, float)) and math.isfinite(v):
        return float(v)
    return None


def _series(table: CsvTable, spec: PlotSpec):
    xs = table.column(spec.x)
    ys = table.column(spec.y)
    gs = table.column(spec.group) if spec.group else [None] * len(xs)
    order: list = []
    data: dict = {}
    for x, y, g in zip(xs, ys, gs):
        if g not in data:
            order.append(g)
            data[g] = []
        data[g].append((x, y))
    return [(g, data[g]) for g in order]


def emit_plot(table: CsvTable, spec: PlotSpec | dict) -> str:
    """Render ``table`` as an SVG document string."""
    if isinstance(spec, dict):
        spec = PlotSpec.from_dict(spec)
    if table.columns:
        for name in (spec.x, spec.y, spec.group):
            if name is not None and name not in table.columns:
                raise UnknownColumn(f"unknown column {name!r}; have {', '.join(table.columns)}")
    series = _series(table, spec) if table.rows else []

    W, H = spec.width, spec.height
    left, right, top, bottom = _MARGIN
    pw, ph = W - left - right, H - top - bottom

    ys = [v for _, pts in series for _, y in pts if (v := _numeric(y)) is not None]
    y_ticks = nice_ticks(min(ys), max(ys)) if ys else [0.0, 1.0]
    y0, y1 = y_ticks[0], y_ticks[-1]

    if spec.kind == "line":
        xs = [v for _, pts in series for x, _ in pts if (v := _numeric(x)) is not None]
        x_ticks = nice_ticks(min(xs), max(xs)) if xs else [0.0, 1.0]
        x0, x1 = x_ticks[0], x_ticks[-1]
        categories: list = []
    else:
        categories = []
        for _, pts in series:
            for x, _ in pts:
                if x not in categories:
                    categories.append(x)
        x_ticks = []
        x0, x1 = 0.0, float(max(1, len(categories)))

    def sx(v):
        return left + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return top + ph - (v - y0) / (y1 - y0) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="#ffffff"/>',
    ]
    if spec.title:
        out.append(f'<text x="{_f(W / 2)}" y="20" text-anchor="middle" font-size="14">{escape(spec.title)}</text>')

    # axes and grid
    out.append('<g class="axes" stroke="#000000" stroke-width="1" fill="none">')
    out.append(f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}"/>')
    out.append(f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}"/>')
    out.append("</g>")
    out.append('<g class="ticks" fill="#000000">')
    for t in y_ticks:
        y = sy(t)
        out.append(f'<line x1="{left - 4}" y1="{_f(y)}" x2="{left}" y2="{_f(y)}" stroke="#000000"/>')
        out.append(f'<line x1="{left}" y1="{_f(y)}" x2="{left + pw}" y2="{_f(y)}" stroke="#dddddd"/>')
        out.append(f'<text x="{left - 6}" y="{_f(y + 4)}" text-anchor="end">{_label(t)}</text>')
    for t in x_ticks:
        x = sx(t)
        out.append(f'<line x1="{_f(x)}" y1="{top + ph}" x2="{_f(x)}" y2="{top + ph + 4}" stroke="#000000"/>')
        out.append(f'<text x="{_f(x)}" y="{top + ph + 16}" text-anchor="middle">{_label(t)}</text>')
    for i, c in enumerate(categories):
        x = sx(i + 0.5)
        out.append(f'<text x="{_f(x)}" y="{top + ph + 16}" text-anchor="middle">{escape(str(c))}</text>')
    out.append("</g>")
    out.append(f'<text x="{_f(left + pw / 2)}" y="{H - 12}" text-anchor="middle">'
               f'{escape(spec.x_label or spec.x)}</text>')
    out.append(f'<text x="16" y="{_f(top + ph / 2)}" text-anchor="middle" '
               f'transform="rotate(-90 16 {_f(top + ph / 2)})">{escape(spec.y_label or spec.y)}</text>')

    # data
    n = len(series)
    for si, (g, pts) in enumerate(series):
        color = PALETTE[si % len(PALETTE)]
        name = escape(f"{spec.group}={g}" if spec.group else spec.y)
        out.append(f'<g class="series" data-name="{name}">')
        if spec.kind == "line":
            coords = [(_numeric(x), _numeric(y)) for x, y in pts]
            coords = sorted((x, y) for x, y in coords if x is not None and y is not None)
            if coords:
                path = " ".join(f"{_f(sx(x))},{_f(sy(y))}" for x, y in coords)
                out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
                for x, y in coords:
                    out.append(f'<circle cx="{_f(sx(x))}" cy="{_f(sy(y))}" r="2.5" fill="{color}"/>')
        else:
            width = 0.8 / max(1, n)
            base = sy(max(y0, min(0.0, y1)))
            for x, y in pts:
                v = _numeric(y)
                if v is None:
                    continue
                i = categories.index(x)
                bx0 = sx(i + 0.1 + si * width)
                bx1 = sx(i + 0.1 + (si + 1) * width)
                top_y = min(sy(v), base)
                h = abs(sy(v) - base)
                out.append(f'<rect x="{_f(bx0)}" y="{_f(top_y)}" width="{_f(bx1 - bx0)}" '
                           f'height="{_f(h)}" fill="{color}"/>')
        out.append("</g>")

    # legend
    if spec.group and series:
        out.append('<g class="legend">')
        for si, (g, _) in enumerate(series):
            y = top + 4 + si * 14
            color = PALETTE[si % len(PALETTE)]
            out.append(f'<rect x="{left + pw - 90}" y="{y}" width="10" height="10" fill="{color}"/>')
            out.append(f'<text x="{left + pw - 76}" y="{y + 9}">{escape(f"{spec.group}={g}")}</text>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_plot(table: CsvTable, spec, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(emit_plot(table, spec))
