"""Deterministic SVG rendering of analysis outputs.

Heatmaps, dendrograms and divergence panels are emitted as standalone
SVG 1.1 documents built by hand: identical inputs produce byte-identical
documents, with no plotting-library dependency. Invalid cells are
hatched; diverging colormaps are anchored at zero so the sign of a
similarity is visible at a glance.
"""

from __future__ import annotations

from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from lidd.clustering import LinkageTree, cut
from lidd.divergence import DivergenceReport
from lidd.errors import ConfigError, ContractViolation
from lidd.similarity import DistanceMatrix, SimilarityMap

SEQUENTIAL_STOPS = ((0.0, (247, 251, 255)), (0.5, (107, 174, 214)), (1.0, (8, 48, 107)))
DIVERGING_STOPS = ((0.0, (33, 102, 172)), (0.5, (247, 247, 247)), (1.0, (178, 24, 43)))

CLUSTER_PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)

ABOVE_CUT_COLOR = "#555555"
FLAG_ON_COLOR = "#d62728"
FLAG_OFF_COLOR = "#eeeeee"


@dataclass(frozen=True)
class RenderSpec:
    width_px: int = 640
    height_px: int = 520
    colormap: str = "sequential"
    label_font_px: int = 11
    value_range: tuple[float, float] | None = None

    def validate(self) -> None:
        if self.width_px <= 0 or self.height_px <= 0:
            raise ConfigError("width_px/height_px: must be positive")
        if self.colormap not in ("sequential", "diverging"):
            raise ConfigError(f"colormap: unknown value {self.colormap!r}")
        if self.label_font_px <= 0:
            raise ConfigError("label_font_px: must be positive")
        if self.value_range is not None and not self.value_range[0] < self.value_range[1]:
            raise ConfigError("value_range: min must be < max")


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _interp_stops(stops, p: float) -> str:
    p = min(1.0, max(0.0, p))
    for (p0, c0), (p1, c1) in zip(stops, stops[1:]):
        if p <= p1:
            f = 0.0 if p1 == p0 else (p - p0) / (p1 - p0)
            rgb = tuple(round(a + (b - a) * f) for a, b in zip(c0, c1))
            return "#%02x%02x%02x" % rgb
    rgb = stops[-1][1]
    return "#%02x%02x%02x" % rgb


def color_for(value: float, lo: float, hi: float, colormap: str) -> str:
    """Pure value -> hex color mapping over [lo, hi]; lo < hi required."""
    if colormap == "diverging":
        amax = max(abs(lo), abs(hi))
        p = 0.5 + 0.5 * (value / amax) if amax > 0 else 0.5
        return _interp_stops(DIVERGING_STOPS, p)
    p = (value - lo) / (hi - lo)
    return _interp_stops(SEQUENTIAL_STOPS, p)


def _resolve_range(values: np.ndarray, spec: RenderSpec, default=None):
    if spec.value_range is not None:
        return float(spec.value_range[0]), float(spec.value_range[1])
    if default is not None:
        return default
    if values.size == 0:
        return 0.0, 1.0
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        hi = lo + 1.0  # degenerate range rule
    return lo, hi


class _Svg:
    def __init__(self, width: int, height: int, title: str):
        self.parts = [
            '<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
            f'width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">',
            f"<title>{escape(title)}</title>",
            '<defs><pattern id="hatch" width="6" height="6" patternUnits="userSpaceOnUse">'
            '<rect width="6" height="6" fill="#ffffff"/>'
            '<path d="M0,6 L6,0" stroke="#999999" stroke-width="1"/></pattern></defs>',
            f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
        ]

    def rect(self, x, y, w, h, fill, stroke=None):
        s = f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(w)}" height="{_fmt(h)}" fill="{fill}"'
        if stroke:
            s += f' stroke="{stroke}" stroke-width="0.5"'
        self.parts.append(s + "/>")

    def line(self, x1, y1, x2, y2, stroke, width=1.0, dash=None):
        s = (
            f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" '
            f'stroke="{stroke}" stroke-width="{_fmt(width)}"'
        )
        if dash:
            s += f' stroke-dasharray="{dash}"'
        self.parts.append(s + "/>")

    def text(self, x, y, content, size, anchor="start", fill="#000000", rotate=None):
        transform = ""
        if rotate is not None:
            transform = f' transform="rotate({_fmt(rotate)} {_fmt(x)} {_fmt(y)})"'
        self.parts.append(
            f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-family="sans-serif" '
            f'font-size="{size}" text-anchor="{anchor}" fill="{fill}"{transform}>'
            f"{escape(str(content))}</text>"
        )

    def document(self) -> str:
        return "\n".join(self.parts) + "\n</svg>\n"


def _draw_grid(svg, values, valid, row_ids, col_ids, lo, hi, colormap, box, font):
    """Cell grid with row/column labels inside the given (x, y, w, h) box."""
    x0, y0, w, h = box
    nr, nc = values.shape
    cw, ch = w / nc, h / nr
    for i in range(nr):
        for j in range(nc):
            if valid is not None and not valid[i, j]:
                fill = "url(#hatch)"
            else:
                fill = color_for(float(values[i, j]), lo, hi, colormap)
            svg.rect(x0 + j * cw, y0 + i * ch, cw, ch, fill)
    for i, rid in enumerate(row_ids):
        svg.text(x0 - 4, y0 + (i + 0.5) * ch + font * 0.35, rid, font, anchor="end")
    for j, cid in enumerate(col_ids):
        cx = x0 + (j + 0.5) * cw
        svg.text(cx, y0 + h + font + 2, cid, font, anchor="end", rotate=-60)


def _draw_colorbar(svg, lo, hi, colormap, box, font, n_ticks=6):
    x0, y0, w, h = box
    strips = 64
    for k in range(strips):
        p = (k + 0.5) / strips
        v = hi - p * (hi - lo)  # top = max
        svg.rect(x0, y0 + k * h / strips, w, h / strips + 0.5,
                 color_for(v, lo, hi, colormap))
    for t in range(n_ticks):
        frac = t / (n_ticks - 1)
        v = hi - frac * (hi - lo)
        y = y0 + frac * h
        svg.line(x0 + w, y, x0 + w + 3, y, "#000000", 0.8)
        svg.text(x0 + w + 5, y + font * 0.35, format(v, ".4g"), font)


def render_heatmap(matrix, spec: RenderSpec, title: str = "") -> str:
    """Colored value grid of a DistanceMatrix or SimilarityMap.

    Distances use the data range (degenerate ranges widen by 1);
    similarity maps default to [-1, 1]. Invalid cells are hatched.
    """
    spec.validate()
    if isinstance(matrix, SimilarityMap):
        values, valid = matrix.scores, matrix.valid
        ids = matrix.sensor_ids
        lo, hi = _resolve_range(values[valid], spec, default=(-1.0, 1.0))
    elif isinstance(matrix, DistanceMatrix):
        values, valid = matrix.dist, None
        ids = matrix.item_ids
        lo, hi = _resolve_range(values, spec)
    else:
        raise ContractViolation("render_heatmap: unsupported matrix type")
    if len(ids) == 0:
        raise ContractViolation("render_heatmap: empty matrix")
    font = spec.label_font_px
    left = 10 + font * max((len(i) for i in ids), default=4) * 0.62 + 6
    top = 30
    right = 64 + font * 3
    bottom = 12 + font * max((len(i) for i in ids), default=4) * 0.62
    w = max(spec.width_px - left - right, 40)
    h = max(spec.height_px - top - bottom, 40)
    svg = _Svg(spec.width_px, spec.height_px, title or "heatmap")
    if title:
        svg.text(spec.width_px / 2, 18, title, font + 2, anchor="middle")
    _draw_grid(svg, values, valid, ids, ids, lo, hi, spec.colormap, (left, top, w, h), font)
    _draw_colorbar(svg, lo, hi, spec.colormap, (left + w + 16, top, 14, h), font)
    return svg.document()


def _leaf_order(tree: LinkageTree) -> list[int]:
    n = tree.n_items
    children = {n + j: (m.left, m.right) for j, m in enumerate(tree.merges)}
    root = n + len(tree.merges) - 1 if tree.merges else 0
    order: list[int] = []
    stack = [root]
    while stack:
        node = stack.pop()
        if node < n:
            order.append(node)
        else:
            left, right = children[node]
            stack.append(right)
            stack.append(left)
    return order


def render_dendrogram(tree: LinkageTree, threshold: float, spec: RenderSpec,
                      title: str = "") -> str:
    """Rectangular dendrogram with a dashed cut line at the threshold.

    Subtrees entirely below the cut share a palette color keyed to the
    cut partition's cluster labels; leaf labels are colored likewise.
    """
    spec.validate()
    n = tree.n_items
    if n == 0:
        raise ContractViolation("render_dendrogram: empty tree")
    partition = cut(tree, threshold)
    label_of = {item: int(partition.labels[i]) for i, item in enumerate(tree.item_ids)}
    colors = {
        i: CLUSTER_PALETTE[label_of[item] % len(CLUSTER_PALETTE)]
        for i, item in enumerate(tree.item_ids)
    }
    font = spec.label_font_px
    left, top, right = 46, 30, 14
    bottom = 14 + font * max((len(i) for i in tree.item_ids), default=4) * 0.62
    w = max(spec.width_px - left - right, 40)
    h = max(spec.height_px - top - bottom, 40)
    root_h = tree.merges[-1].height if tree.merges else 0.0
    hmax = max(root_h, threshold, 1e-9) * 1.05
    y_of = lambda height: top + h - (height / hmax) * h
    order = _leaf_order(tree)
    slot = {leaf: k for k, leaf in enumerate(order)}
    xs = {leaf: left + (slot[leaf] + 0.5) * (w / n) for leaf in order}
    ys = {leaf: y_of(0.0) for leaf in order}
    svg = _Svg(spec.width_px, spec.height_px, title or "dendrogram")
    if title:
        svg.text(spec.width_px / 2, 18, title, font + 2, anchor="middle")
    # height axis
    svg.line(left - 6, top, left - 6, top + h, "#000000", 0.8)
    for t in range(5):
        frac = t / 4
        v = hmax * (1 - frac)
        y = top + frac * h
        svg.line(left - 9, y, left - 6, y, "#000000", 0.8)
        svg.text(left - 11, y + font * 0.35, format(v, ".3g"), font - 1, anchor="end")
    node_members: dict[int, int] = {}
    for i in range(n):
        node_members[i] = i
    for j, m in enumerate(tree.merges):
        node = n + j
        below = m.height < threshold
        rep_left = node_members[m.left]
        color = colors[rep_left] if below else ABOVE_CUT_COLOR
        xl, yl = xs[m.left], ys[m.left]
        xr, yr = xs[m.right], ys[m.right]
        ym = y_of(m.height)
        svg.line(xl, yl, xl, ym, color, 1.2)
        svg.line(xr, yr, xr, ym, color, 1.2)
        svg.line(xl, ym, xr, ym, color, 1.2)
        xs[node] = 0.5 * (xl + xr)
        ys[node] = ym
        node_members[node] = rep_left
    y_cut = y_of(threshold)
    svg.line(left, y_cut, left + w, y_cut, "#d62728", 1.0, dash="5,4")
    svg.text(left + w, y_cut - 4, f"cut {format(threshold, '.4g')}", font - 1,
             anchor="end", fill="#d62728")
    for leaf in order:
        svg.text(xs[leaf], top + h + font + 2, tree.item_ids[leaf], font,
                 anchor="end", fill=colors[leaf], rotate=-60)
    return svg.document()


def _cluster_row_ids(report: DivergenceReport) -> list[str]:
    return [f"cluster {label}" for label in report.cluster_labels]


def render_divergence(report: DivergenceReport, spec: RenderSpec) -> tuple[str, str]:
    """(aggregate heatmap, flag grid) SVGs; thresholds echoed in titles."""
    spec.validate()
    rows = _cluster_row_ids(report)
    sensors = list(report.sensor_ids)
    font = spec.label_font_px
    left = 10 + font * max(len(r) for r in rows) * 0.62 + 6
    top = 30
    bottom = 12 + font * max((len(s) for s in sensors), default=4) * 0.62
    right = 64 + font * 3
    w = max(spec.width_px - left - right, 40)
    h = max(spec.height_px - top - bottom, 40)

    lo, hi = _resolve_range(report.aggregate, spec)
    agg_title = f"aggregate divergence (threshold {format(report.alpha_phi, '.4g')})"
    agg = _Svg(spec.width_px, spec.height_px, agg_title)
    agg.text(spec.width_px / 2, 18, agg_title, font + 2, anchor="middle")
    _draw_grid(agg, report.aggregate, None, rows, sensors, lo, hi, "sequential",
               (left, top, w, h), font)
    _draw_colorbar(agg, lo, hi, "sequential", (left + w + 16, top, 14, h), font)

    flag_title = f"root-cause flags (threshold {format(report.alpha_phi, '.4g')})"
    flags = _Svg(spec.width_px, spec.height_px, flag_title)
    flags.text(spec.width_px / 2, 18, flag_title, font + 2, anchor="middle")
    nr, nc = report.flags.shape
    cw, ch = w / nc, h / nr
    for i in range(nr):
        for j in range(nc):
            fill = FLAG_ON_COLOR if report.flags[i, j] else FLAG_OFF_COLOR
            flags.rect(left + j * cw, top + i * ch, cw, ch, fill, stroke="#ffffff")
    for i, rid in enumerate(rows):
        flags.text(left - 4, top + (i + 0.5) * ch + font * 0.35, rid, font, anchor="end")
    for j, cid in enumerate(sensors):
        flags.text(left + (j + 0.5) * cw, top + h + font + 2, cid, font,
                   anchor="end", rotate=-60)
    return agg.document(), flags.document()


def render_divergence_pairs(report: DivergenceReport, spec: RenderSpec) -> str:
    """One stacked panel per cluster of its pairwise scores vs the others."""
    spec.validate()
    C = len(report.cluster_labels)
    rows = _cluster_row_ids(report)
    sensors = list(report.sensor_ids)
    font = spec.label_font_px
    left = 10 + font * max(len(r) for r in rows) * 0.62 + 6
    right = 64 + font * 3
    panel_h = max(C * 16, 60) + 30 + 12 + int(font * max((len(s) for s in sensors), default=4) * 0.62)
    width = spec.width_px
    height = panel_h * C + 10
    lo, hi = _resolve_range(report.pair_scores, spec)
    doc_title = "pairwise divergence by cluster"
    svg = _Svg(width, height, doc_title)
    w = max(width - left - right, 40)
    for a in range(C):
        y_base = 10 + a * panel_h
        title = f"cluster {report.cluster_labels[a]} vs others"
        svg.text(width / 2, y_base + 12, title, font + 1, anchor="middle")
        box = (left, y_base + 22, w, max(C * 16, 60))
        _draw_grid(svg, report.pair_scores[a], None, rows, sensors, lo, hi,
                   "sequential", box, font)
        _draw_colorbar(svg, lo, hi, "sequential",
                       (left + w + 16, y_base + 22, 14, max(C * 16, 60)), font)
    return svg.document()
