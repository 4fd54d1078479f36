"""
Deterministic SVG scatter plots with anomalies drawn as enlarged markers.

Output is plain text built from fixed-precision numbers, so identical input
yields byte-identical files.
"""

from __future__ import annotations

from xml.sax.saxutils import escape


from .data import AttributeKind, Dataset
from .errors import ParameterError
from .taxonomy import AnomalyType

CLASS_COLORS = ("#4c78a8", "#e45756", "#54a24b", "#b279a2", "#f58518", "#9d755d", "#72b7b2", "#bab0ac")
TYPE_COLORS = {
    AnomalyType.EXTREME_VALUE: "#d62728",
    AnomalyType.RARE_CLASS: "#ff7f0e",
    AnomalyType.SIMPLE_MIXED: "#8c564b",
    AnomalyType.MULTIDIM_NUMERICAL: "#1f77b4",
    AnomalyType.MULTIDIM_RARE_CLASS: "#2ca02c",
    AnomalyType.MULTIDIM_MIXED: "#9467bd",
}

W, H = 760, 480
LEFT, RIGHT, TOP, BOTTOM = 60, 290, 20, 50


def _f(v: float) -> str:
    return f"{v:.2f}"


def scatter_svg(
    dataset: Dataset,
    x: str,
    y: str,
    anomalies: dict[int, AnomalyType] | None = None,
    class_attr: str | None = None,
    title: str = "",
) -> str:
    """Scatter ``x`` against ``y``; ``anomalies`` maps case ids to the type drawn.

    The legend always lists the six types; class colours are listed when
    ``class_attr`` is given.
    """
    schema = dataset.schema
    for nm in (x, y):
        if nm not in schema.names:
            raise ParameterError(f"unknown attribute {nm!r}")
        if schema.kind(nm) is not AttributeKind.CONTINUOUS:
            raise ParameterError(f"plot axis {nm!r} must be continuous")
    if class_attr is not None and class_attr not in schema.names:
        raise ParameterError(f"unknown attribute {class_attr!r}")
    anomalies = anomalies or {}
    ds = dataset.sorted_by_id()
    xs, ys = ds[x], ds[y]
    labels = [str(v) for v in ds[class_attr]] if class_attr else None
    classes = sorted(set(labels)) if labels else []
    color_of = {c: CLASS_COLORS[i % len(CLASS_COLORS)] for i, c in enumerate(classes)}

    def span(v):
        lo, hi = (float(v.min()), float(v.max())) if v.size else (0.0, 1.0)
        pad = (hi - lo) * 0.05 or 1.0
        return lo - pad, hi + pad

    (x0, x1), (y0, y1) = span(xs), span(ys)
    pw, ph = W - LEFT - RIGHT, H - TOP - BOTTOM
    px = lambda v: LEFT + (v - x0) / (x1 - x0) * pw
    py = lambda v: TOP + ph - (v - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>',
    ]
    if title:
        out.append(f'<text x="{LEFT}" y="{TOP - 5}" font-size="12">{escape(title)}</text>')
    out.append(f'<text x="{LEFT + pw / 2:.1f}" y="{H - 15}" font-size="12" text-anchor="middle">{escape(x)}</text>')
    out.append(
        f'<text x="15" y="{TOP + ph / 2:.1f}" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 15 {TOP + ph / 2:.1f})">{escape(y)}</text>'
    )
    for v, pos in ((x0, "start"), (x1, "end")):
        out.append(f'<text x="{_f(px(v))}" y="{TOP + ph + 15}" font-size="10" text-anchor="{pos}">{v:.3g}</text>')
    for v in (y0, y1):
        out.append(f'<text x="{LEFT - 5}" y="{_f(py(v))}" font-size="10" text-anchor="end">{v:.3g}</text>')

    out.append('<g class="cases">')
    for i, cid in enumerate(ds.case_ids):
        if int(cid) in anomalies:
            continue
        fill = color_of[labels[i]] if labels else "#888"
        out.append(f'<circle cx="{_f(px(xs[i]))}" cy="{_f(py(ys[i]))}" r="2" fill="{fill}" fill-opacity="0.6"/>')
    out.append("</g>")
    # anomalies on top, in case id order
    out.append('<g class="anomalies">')
    for i, cid in enumerate(ds.case_ids):
        t = anomalies.get(int(cid))
        if t is None:
            continue
        fill = color_of[labels[i]] if labels else "#888"
        out.append(
            f'<circle class="anomaly type-{t.value}" data-case="{int(cid)}" cx="{_f(px(xs[i]))}" '
            f'cy="{_f(py(ys[i]))}" r="6" fill="{fill}" stroke="{TYPE_COLORS[t]}" stroke-width="2.5"/>'
        )
    out.append("</g>")

    lx, ly = W - RIGHT + 15, TOP + 10
    out.append('<g class="legend" font-size="11">')
    for t in AnomalyType:
        out.append(
            f'<g class="legend-type"><circle cx="{lx}" cy="{ly}" r="6" fill="white" '
            f'stroke="{TYPE_COLORS[t]}" stroke-width="2.5"/>'
            f'<text x="{lx + 12}" y="{ly + 4}">{t.value}: {escape(t.label)}</text></g>'
        )
        ly += 18
    ly += 6
    for c in classes:
        out.append(
            f'<g class="legend-class"><circle cx="{lx}" cy="{ly}" r="4" fill="{color_of[c]}"/>'
            f'<text x="{lx + 12}" y="{ly + 4}">{escape(class_attr)}={escape(c)}</text></g>'
        )
        ly += 16
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
