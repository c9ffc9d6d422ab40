"""Minimal SVG emitters for result displays.

Pure string construction, no raster or plotting dependencies.  Coordinates
are rendered with fixed decimal precision so identical inputs produce
byte-identical documents.  Each emitter accepts an optional ``comment``
string that is embedded as an XML comment (used for provenance).
"""

from __future__ import annotations

import math

import numpy as np

PALETTE = (
    "#4269d0",
    "#efb118",
    "#ff725c",
    "#6cc5b0",
    "#3ca951",
    "#ff8ab7",
    "#a463f2",
    "#97bbf5",
    "#9c6b4e",
    "#9498a0",
)

_FONT = 'font-family="sans-serif"'


def _esc(text: str) -> str:
    return (
        str(text)
        .replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
    )


def _f(value: float) -> str:
    return f"{float(value):.2f}"


def _document(width: int, height: int, body: list[str], comment: str) -> str:
    head = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">'
    ]
    if comment:
        head.append(f"<!-- {_esc(comment)} -->")
    head.append(f'<rect width="{width}" height="{height}" fill="white"/>')
    return "\n".join(head + body + ["</svg>"]) + "\n"


def _title(text: str, width: int) -> str:
    return (
        f'<text x="{width // 2}" y="18" text-anchor="middle" {_FONT} '
        f'font-size="14" font-weight="bold">{_esc(text)}</text>'
    )


def _legend(classes: list[str], x: float, y: float) -> list[str]:
    parts = []
    for i, name in enumerate(classes):
        color = PALETTE[i % len(PALETTE)]
        cy = y + 16 * i
        parts.append(
            f'<rect x="{_f(x)}" y="{_f(cy)}" width="10" height="10" '
            f'fill="{color}"/>'
        )
        parts.append(
            f'<text x="{_f(x + 14)}" y="{_f(cy + 9)}" {_FONT} '
            f'font-size="11">{_esc(name)}</text>'
        )
    return parts


def scatter(
    points,
    labels,
    title: str = "",
    width: int = 640,
    height: int = 480,
    comment: str = "",
) -> str:
    """Labeled 2-D scatter with a class legend."""
    points = np.asarray(points, dtype=np.float64)
    labels = [str(l) for l in labels]
    classes = sorted(set(labels))
    left, right, top, bottom = 50.0, width - 130.0, 34.0, height - 36.0

    x_min, x_max = float(points[:, 0].min()), float(points[:, 0].max())
    y_min, y_max = float(points[:, 1].min()), float(points[:, 1].max())
    # pad degenerate ranges so scaling stays finite
    if x_max - x_min == 0:
        x_min, x_max = x_min - 1.0, x_max + 1.0
    if y_max - y_min == 0:
        y_min, y_max = y_min - 1.0, y_max + 1.0
    pad_x = 0.05 * (x_max - x_min)
    pad_y = 0.05 * (y_max - y_min)
    x_min, x_max = x_min - pad_x, x_max + pad_x
    y_min, y_max = y_min - pad_y, y_max + pad_y

    def sx(v):
        return left + (v - x_min) / (x_max - x_min) * (right - left)

    def sy(v):
        return bottom - (v - y_min) / (y_max - y_min) * (bottom - top)

    body = [_title(title, width)] if title else []
    body.append(
        f'<rect x="{_f(left)}" y="{_f(top)}" width="{_f(right - left)}" '
        f'height="{_f(bottom - top)}" fill="none" stroke="#333"/>'
    )
    for bound, anchor, pos in (
        (x_min, "start", (left, bottom + 16)),
        (x_max, "end", (right, bottom + 16)),
    ):
        body.append(
            f'<text x="{_f(pos[0])}" y="{_f(pos[1])}" text-anchor="{anchor}" '
            f'{_FONT} font-size="10">{_f(bound)}</text>'
        )
    for bound, pos_y in ((y_min, bottom), (y_max, top + 8)):
        body.append(
            f'<text x="{_f(left - 6)}" y="{_f(pos_y)}" text-anchor="end" '
            f'{_FONT} font-size="10">{_f(bound)}</text>'
        )
    color_of = {c: PALETTE[i % len(PALETTE)] for i, c in enumerate(classes)}
    for (x, y), label in zip(points, labels):
        body.append(
            f'<circle cx="{_f(sx(x))}" cy="{_f(sy(y))}" r="2.5" '
            f'fill="{color_of[label]}" fill-opacity="0.6"/>'
        )
    body += _legend(classes, right + 12, top + 4)
    return _document(width, height, body, comment)


def bars(
    names,
    values,
    title: str = "",
    width: int = 640,
    comment: str = "",
) -> str:
    """Horizontal bar chart, one bar per name, in the given order."""
    names = [str(n) for n in names]
    values = [float(v) for v in values]
    slot = 24
    top = 40
    height = top + slot * len(names) + 16
    left, right = 190.0, width - 70.0
    peak = max((abs(v) for v in values), default=0.0) or 1.0

    body = [_title(title, width)] if title else []
    for i, (name, value) in enumerate(zip(names, values)):
        y = top + slot * i
        bar_w = abs(value) / peak * (right - left)
        body.append(
            f'<text x="{_f(left - 8)}" y="{_f(y + 14)}" text-anchor="end" '
            f'{_FONT} font-size="11">{_esc(name)}</text>'
        )
        body.append(
            f'<rect x="{_f(left)}" y="{_f(y + 3)}" width="{_f(bar_w)}" '
            f'height="16" fill="{PALETTE[0]}"/>'
        )
        body.append(
            f'<text x="{_f(left + bar_w + 6)}" y="{_f(y + 15)}" {_FONT} '
            f'font-size="10">{value:.4f}</text>'
        )
    return _document(width, height, body, comment)


def heatmap(
    matrix,
    names,
    title: str = "",
    size: int = 720,
    comment: str = "",
) -> str:
    """Square heatmap for values in [-1, 1]; NaN cells render gray."""
    matrix = np.asarray(matrix, dtype=np.float64)
    n = matrix.shape[0]
    names = [str(x) for x in names]
    left, top = 150.0, 40.0
    cell = max(2.0, (size - left - 20) / max(n, 1))
    width = int(left + cell * n + 20)
    height = int(top + cell * n + 20)

    body = [_title(title, width)] if title else []
    label_step = max(1, math.ceil(n / 48))
    for i, name in enumerate(names):
        if i % label_step:
            continue
        body.append(
            f'<text x="{_f(left - 6)}" y="{_f(top + cell * i + cell * 0.75)}" '
            f'text-anchor="end" {_FONT} font-size="8">{_esc(name)}</text>'
        )
    for i in range(n):
        for j in range(n):
            v = matrix[i, j]
            if np.isnan(v):
                fill = "#cccccc"
            else:
                v = min(1.0, max(-1.0, float(v)))
                if v >= 0:
                    # white -> red
                    g = int(round(255 * (1 - v)))
                    fill = f"#ff{g:02x}{g:02x}"
                else:
                    # white -> blue
                    g = int(round(255 * (1 + v)))
                    fill = f"#{g:02x}{g:02x}ff"
            body.append(
                f'<rect x="{_f(left + cell * j)}" y="{_f(top + cell * i)}" '
                f'width="{_f(cell)}" height="{_f(cell)}" fill="{fill}"/>'
            )
    return _document(width, height, body, comment)


def roc_curves(
    curves: dict,
    title: str = "",
    width: int = 560,
    height: int = 520,
    comment: str = "",
) -> str:
    """One ROC polyline per class over the unit square, chance diagonal dashed.

    ``curves`` maps class name to a sequence of (fpr, tpr) points.
    """
    classes = sorted(curves)
    left, right, top, bottom = 60.0, width - 150.0, 40.0, height - 50.0

    def sx(v):
        return left + v * (right - left)

    def sy(v):
        return bottom - v * (bottom - top)

    body = [_title(title, width)] if title else []
    body.append(
        f'<rect x="{_f(left)}" y="{_f(top)}" width="{_f(right - left)}" '
        f'height="{_f(bottom - top)}" fill="none" stroke="#333"/>'
    )
    body.append(
        f'<line x1="{_f(sx(0))}" y1="{_f(sy(0))}" x2="{_f(sx(1))}" '
        f'y2="{_f(sy(1))}" stroke="#999" stroke-dasharray="4 3"/>'
    )
    for tick in (0.0, 0.5, 1.0):
        body.append(
            f'<text x="{_f(sx(tick))}" y="{_f(bottom + 16)}" '
            f'text-anchor="middle" {_FONT} font-size="10">{tick:.1f}</text>'
        )
        body.append(
            f'<text x="{_f(left - 8)}" y="{_f(sy(tick) + 4)}" '
            f'text-anchor="end" {_FONT} font-size="10">{tick:.1f}</text>'
        )
    body.append(
        f'<text x="{_f((left + right) / 2)}" y="{_f(bottom + 34)}" '
        f'text-anchor="middle" {_FONT} font-size="11">false positive rate</text>'
    )
    body.append(
        f'<text x="16" y="{_f((top + bottom) / 2)}" {_FONT} font-size="11" '
        f'transform="rotate(-90 16 {_f((top + bottom) / 2)})" '
        f'text-anchor="middle">true positive rate</text>'
    )
    for i, name in enumerate(classes):
        pts = list(curves[name])
        if not pts or pts[0] != (0.0, 0.0):
            pts = [(0.0, 0.0)] + pts
        if pts[-1] != (1.0, 1.0):
            pts = pts + [(1.0, 1.0)]
        path = " ".join(f"{_f(sx(fpr))},{_f(sy(tpr))}" for fpr, tpr in pts)
        body.append(
            f'<polyline points="{path}" fill="none" '
            f'stroke="{PALETTE[i % len(PALETTE)]}" stroke-width="1.5"/>'
        )
    body += _legend(classes, right + 12, top + 4)
    return _document(width, height, body, comment)


def confusion_grid(
    matrix,
    classes,
    title: str = "",
    comment: str = "",
) -> str:
    """Row-normalized confusion matrix with counts printed in each cell."""
    matrix = np.asarray(matrix, dtype=np.float64)
    n = matrix.shape[0]
    classes = [str(c) for c in classes]
    cell = 64.0
    left, top = 120.0, 60.0
    width = int(left + cell * n + 30)
    height = int(top + cell * n + 40)
    row_sums = matrix.sum(axis=1)

    body = [_title(title, width)] if title else []
    for j, name in enumerate(classes):
        body.append(
            f'<text x="{_f(left + cell * j + cell / 2)}" y="{_f(top - 8)}" '
            f'text-anchor="middle" {_FONT} font-size="10">{_esc(name)}</text>'
        )
    for i, name in enumerate(classes):
        body.append(
            f'<text x="{_f(left - 8)}" y="{_f(top + cell * i + cell / 2 + 4)}" '
            f'text-anchor="end" {_FONT} font-size="10">{_esc(name)}</text>'
        )
        for j in range(n):
            share = matrix[i, j] / row_sums[i] if row_sums[i] > 0 else 0.0
            g = int(round(255 * (1 - share)))
            body.append(
                f'<rect x="{_f(left + cell * j)}" y="{_f(top + cell * i)}" '
                f'width="{_f(cell)}" height="{_f(cell)}" '
                f'fill="#{g:02x}{g:02x}ff" stroke="#eee"/>'
            )
            shade = "#fff" if share > 0.55 else "#222"
            body.append(
                f'<text x="{_f(left + cell * j + cell / 2)}" '
                f'y="{_f(top + cell * i + cell / 2 + 4)}" text-anchor="middle" '
                f'{_FONT} font-size="11" fill="{shade}">{int(matrix[i, j])}</text>'
            )
    return _document(width, height, body, comment)
