"""Choropleth maps and the correlation heatmap as GeoJSON and SVG.

All output is plain text built with fixed float formatting, so the same
inputs give byte-identical files on every platform.
"""
from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .errors import ValidationError
from .geo import ZoneSet, zone_to_geojson_geometry
from .stats import CorrelationMatrix

CANVAS = 1000
MAP_TOP, MAP_BOTTOM, MAP_MARGIN = 60, 820, 40
NULL_GREY = "#bdbdbd"

PALETTES = {
    "blues": ["#f7fbff", "#deebf7", "#c6dbef", "#9ecae1", "#6baed6", "#4292c6", "#2171b5", "#08519c", "#08306b"],
    "reds": ["#fff5f0", "#fee0d2", "#fcbba1", "#fc9272", "#fb6a4a", "#ef3b2c", "#cb181d", "#a50f15", "#67000d"],
    "greens": ["#f7fcf5", "#e5f5e0", "#c7e9c0", "#a1d99b", "#74c476", "#41ab5d", "#238b45", "#006d2c", "#00441b"],
    "purples": ["#fcfbfd", "#efedf5", "#dadaeb", "#bcbddc", "#9e9ac8", "#807dba", "#6a51a3", "#54278f", "#3f007d"],
    # diverging, negative first
    "rdbu": [
        "#67001f", "#b2182b", "#d6604d", "#f4a582", "#fddbc7", "#f7f7f7",
        "#d1e5f0", "#92c5de", "#4393c3", "#2166ac", "#053061",
    ],
}


def _palette(name: str) -> list[str]:
    try:
        return PALETTES[name]
    except KeyError:
        raise ValidationError(f"unknown palette {name!r}; choose from {sorted(PALETTES)}") from None


def _lerp_color(stops: list[str], t: float) -> str:
    t = min(1.0, max(0.0, t))
    pos = t * (len(stops) - 1)
    i = min(int(math.floor(pos)), len(stops) - 2)
    f = pos - i
    a, b = stops[i], stops[i + 1]
    rgb = []
    for k in (1, 3, 5):
        ca, cb = int(a[k : k + 2], 16), int(b[k : k + 2], 16)
        rgb.append(int(round(ca + (cb - ca) * f)))
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def class_color(stops: list[str], cls: int, n_classes: int) -> str:
    """Lightest usable shade for class 0, darkest for the top class."""
    if n_classes <= 1:
        return stops[-1]
    return _lerp_color(stops, 0.15 + 0.85 * cls / (n_classes - 1))


# -- classing -------------------------------------------------------------------


def quantile_classes(values: Sequence[float | None], k: int = 5) -> list[float]:
    """Breakpoints at the 1/k .. (k-1)/k linear-interpolation quantiles.

    Duplicates collapse, and a breakpoint equal to the maximum is dropped
    because the class above it would be empty. Class i holds values in
    (b[i-1], b[i]].
    """
    if k < 2:
        raise ValidationError(f"k must be >= 2, got {k}")
    vals = np.array([float(v) for v in values if v is not None], dtype=float)
    if vals.size == 0:
        raise ValidationError("cannot class an all-null variable")
    qs = np.quantile(vals, [i / k for i in range(1, k)], method="linear")
    top = float(vals.max())
    out: list[float] = []
    for q in qs.tolist():
        if q < top and (not out or q > out[-1]):
            out.append(q)
    return out


def class_index(value: float, breakpoints: Sequence[float]) -> int:
    return bisect.bisect_left(breakpoints, value)


@dataclass(frozen=True)
class Choropleth:
    zones: ZoneSet
    variable: str
    breakpoints: tuple[float, ...]
    class_of: dict[str, int | None]
    values: dict[str, float | None]

    @property
    def n_classes(self) -> int:
        return len(self.breakpoints) + 1 if any(c is not None for c in self.class_of.values()) else 0


def build_choropleth(zs: ZoneSet, variable: str, values: Mapping[str, float | None], k: int = 5) -> Choropleth:
    for z in values:
        if z not in zs:
            raise ValidationError(f"choropleth {variable}: zip {z} is not in the zone set")
    vals = {z: (None if values.get(z) is None else float(values[z])) for z in zs.zip_ids}
    if all(v is None for v in vals.values()):
        return Choropleth(zs, variable, (), {z: None for z in vals}, vals)
    bps = tuple(quantile_classes(list(vals.values()), k))
    classes = {z: (None if v is None else class_index(v, bps)) for z, v in vals.items()}
    return Choropleth(zs, variable, bps, classes, vals)


# -- SVG helpers ---------------------------------------------------------------


def _fmt(v: float) -> str:
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


def _num(v: float) -> str:
    return f"{v:.4g}"


class _Frame:
    """Equirectangular fit of a lon/lat box into a pixel rectangle."""

    def __init__(self, bbox, x0, y0, x1, y1):
        w, s, e, n = bbox
        self.w, self.n = w, n
        self.kx = math.cos(math.radians((s + n) / 2))
        span_x = max((e - w) * self.kx, 1e-12)
        span_y = max(n - s, 1e-12)
        self.scale = min((x1 - x0) / span_x, (y1 - y0) / span_y)
        self.ox = x0 + ((x1 - x0) - span_x * self.scale) / 2
        self.oy = y0 + ((y1 - y0) - span_y * self.scale) / 2

    def __call__(self, lon: float, lat: float) -> tuple[float, float]:
        return self.ox + (lon - self.w) * self.kx * self.scale, self.oy + (self.n - lat) * self.scale


def _path(zone, frame: _Frame) -> str:
    parts = []
    for poly in zone.polygons:
        for ring in poly:
            pts = [frame(x, y) for x, y in ring[:-1]]
            parts.append("M" + " L".join(f"{_fmt(px)},{_fmt(py)}" for px, py in pts) + " Z")
    return " ".join(parts)


def _centroid(zone) -> tuple[float, float]:
    """Area centroid of the zone's largest part (outer ring only)."""
    best, best_a = None, -1.0
    for poly in zone.polygons:
        ring = poly[0]
        a = cx = cy = 0.0
        for (x0, y0), (x1, y1) in zip(ring, ring[1:]):
            c = x0 * y1 - x1 * y0
            a += c
            cx += (x0 + x1) * c
            cy += (y0 + y1) * c
        if abs(a) > best_a:
            best_a = abs(a)
            best = (cx / (3 * a), cy / (3 * a)) if a else ring[0]
    return best


_HATCH = (
    '<pattern id="hatch" patternUnits="userSpaceOnUse" width="8" height="8">'
    f'<rect width="8" height="8" fill="{NULL_GREY}"/>'
    '<path d="M0,8 L8,0" stroke="#737373" stroke-width="1"/></pattern>'
)


def choropleth_svg(ch: Choropleth, palette: str = "blues", circles: bool = False) -> str:
    stops = _palette(palette)
    frame = _Frame(ch.zones.bbox, MAP_MARGIN, MAP_TOP, CANVAS - MAP_MARGIN, MAP_BOTTOM)
    m = ch.n_classes
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{CANVAS}" height="{CANVAS}" viewBox="0 0 {CANVAS} {CANVAS}">',
        f"<defs>{_HATCH}</defs>",
        f'<rect width="{CANVAS}" height="{CANVAS}" fill="#ffffff"/>',
        f'<text x="{MAP_MARGIN}" y="36" font-family="sans-serif" font-size="22">{escape(ch.variable)}</text>',
        '<g id="zones" stroke="#ffffff" stroke-width="1" fill-rule="evenodd">',
    ]
    for zone in ch.zones:
        cls = ch.class_of[zone.zip_id]
        fill = "url(#hatch)" if cls is None else class_color(stops, cls, m)
        val = ch.values[zone.zip_id]
        label = "null" if val is None else _num(val)
        out.append(
            f'<path id="z{zone.zip_id}" d="{_path(zone, frame)}" fill="{fill}">'
            f"<title>{zone.zip_id}: {label}</title></path>"
        )
    out.append("</g>")
    if circles:
        vmax = max((v for v in ch.values.values() if v is not None and v > 0), default=None)
        if vmax:
            out.append('<g id="circles" fill="#000000" fill-opacity="0.35">')
            for zone in ch.zones:
                v = ch.values[zone.zip_id]
                if v is None or v <= 0:
                    continue
                cx, cy = frame(*_centroid(zone))
                out.append(f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="{_fmt(30.0 * math.sqrt(v / vmax))}"/>')
            out.append("</g>")
    out.append(_legend(ch, stops))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _legend(ch: Choropleth, stops: list[str]) -> str:
    items = []
    present = [v for v in ch.values.values() if v is not None]
    m = ch.n_classes
    if present:
        edges = [min(present), *ch.breakpoints, max(present)]
        for i in range(m):
            items.append((class_color(stops, i, m), f"{_num(edges[i])} to {_num(edges[i + 1])}"))
    if any(v is None for v in ch.values.values()):
        items.append(("url(#hatch)", "no data"))
    g = ['<g id="legend" font-family="sans-serif" font-size="14">']
    for i, (fill, text) in enumerate(items):
        x = MAP_MARGIN + (i % 3) * 300
        y = MAP_BOTTOM + 30 + (i // 3) * 30
        g.append(f'<rect x="{x}" y="{y}" width="24" height="18" fill="{fill}" stroke="#636363"/>')
        g.append(f'<text x="{x + 32}" y="{y + 14}">{escape(text)}</text>')
    g.append("</g>")
    return "\n".join(g)


def choropleth_geojson(ch: Choropleth) -> str:
    feats = []
    for zone in ch.zones:
        feats.append(
            {
                "type": "Feature",
                "properties": {
                    "zip_id": zone.zip_id,
                    "value": ch.values[zone.zip_id],
                    "class": ch.class_of[zone.zip_id],
                },
                "geometry": zone_to_geojson_geometry(zone),
            }
        )
    doc = {"type": "FeatureCollection", "variable": ch.variable, "breakpoints": list(ch.breakpoints), "features": feats}
    return json.dumps(doc, separators=(",", ":")) + "\n"


def render_choropleth(
    zs: ZoneSet,
    variable: str,
    values: Mapping[str, float | None],
    k: int = 5,
    palette: str = "blues",
    circles: bool = False,
) -> tuple[str, str]:
    """(GeoJSON text, SVG text) for one variable."""
    ch = build_choropleth(zs, variable, values, k)
    return choropleth_geojson(ch), choropleth_svg(ch, palette, circles)


# -- heatmap -------------------------------------------------------------------


def render_corr_heatmap(m: CorrelationMatrix, palette: str = "rdbu") -> str:
    stops = _palette(palette)
    k = len(m.columns)
    left, top = 230, 230
    cell = min(60.0, (CANVAS - left - 20) / max(k, 1))
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{CANVAS}" height="{CANVAS}" viewBox="0 0 {CANVAS} {CANVAS}">',
        f'<rect width="{CANVAS}" height="{CANVAS}" fill="#ffffff"/>',
        '<g id="labels" font-family="sans-serif" font-size="13">',
    ]
    for i, name in enumerate(m.columns):
        cy = top + (i + 0.5) * cell
        cx = left + (i + 0.5) * cell
        out.append(f'<text x="{left - 6}" y="{_fmt(cy + 4)}" text-anchor="end">{escape(name)}</text>')
        out.append(
            f'<text x="{_fmt(cx)}" y="{top - 6}" transform="rotate(-60 {_fmt(cx)} {top - 6})">{escape(name)}</text>'
        )
    out.append("</g>")
    out.append('<g id="cells" font-family="sans-serif" font-size="12" text-anchor="middle">')
    for i in range(k):
        for j in range(k):
            r = m.r[i][j]
            x, y = left + j * cell, top + i * cell
            fill = NULL_GREY if r is None else _lerp_color(stops, (r + 1.0) / 2.0)
            out.append(
                f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(cell)}" height="{_fmt(cell)}" '
                f'fill="{fill}" stroke="#ffffff"/>'
            )
            if r is not None:
                ink = "#ffffff" if abs(r) > 0.6 else "#000000"
                out.append(
                    f'<text x="{_fmt(x + cell / 2)}" y="{_fmt(y + cell / 2 + 4)}" fill="{ink}">{_fmt(r)}</text>'
                )
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
