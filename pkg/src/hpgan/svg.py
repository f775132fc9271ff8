"""SVG output: stick-figure strips and loss curves.

Plain string building; numbers are formatted with fixed precision so the
same input always yields the same bytes.
"""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from .skeleton import SkeletonTopology

SERIES_COLORS = ("#1f4fd1", "#2a9d3a", "#d12a2a")  # critic, generator, discriminator


def _f(x: float) -> str:
    return f"{x:.2f}"


def _doc(width, height, body) -> str:
    return (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_f(width)}" '
        f'height="{_f(height)}" viewBox="0 0 {_f(width)} {_f(height)}">\n'
        f'<rect x="0" y="0" width="{_f(width)}" height="{_f(height)}" fill="white"/>\n'
        + "".join(body)
        + "</svg>\n"
    )


def stick_figure_strip(prior, predicted, topology: SkeletonTopology, cell: float = 80.0,
                       title: str | None = None) -> str:
    """Frames left to right, x-y orthographic projection, divider between
    observed and predicted poses."""
    prior = np.asarray(prior, dtype=np.float64)
    predicted = np.asarray(predicted, dtype=np.float64)
    frames = np.concatenate([prior, predicted], axis=0)
    m = prior.shape[0]
    xy = frames[..., :2]
    lo = xy.reshape(-1, 2).min(axis=0)
    hi = xy.reshape(-1, 2).max(axis=0)
    span = float(max(hi[0] - lo[0], hi[1] - lo[1], 1e-9))
    pad = 0.1 * cell
    s = (cell - 2 * pad) / span
    top = 20.0 if title else 0.0
    width = cell * frames.shape[0]
    height = cell + top
    body = []
    if title:
        body.append(f'<text x="4" y="14" font-family="sans-serif" font-size="12">{escape(title)}</text>\n')
    for t, pose in enumerate(xy):
        ox = t * cell + pad
        color = "#333333" if t < m else "#c0392b"
        px = ox + (pose[:, 0] - lo[0]) * s
        py = top + cell - pad - (pose[:, 1] - lo[1]) * s  # y up
        for p, c in topology.bones:
            body.append(
                f'<line x1="{_f(px[p])}" y1="{_f(py[p])}" x2="{_f(px[c])}" y2="{_f(py[c])}" '
                f'stroke="{color}" stroke-width="1.5"/>\n'
            )
        for j in range(len(px)):
            body.append(f'<circle cx="{_f(px[j])}" cy="{_f(py[j])}" r="1.5" fill="{color}"/>\n')
    x = m * cell
    body.append(
        f'<line class="divider" x1="{_f(x)}" y1="{_f(top)}" x2="{_f(x)}" y2="{_f(height)}" '
        'stroke="#1f4fd1" stroke-width="2"/>\n'
    )
    return _doc(width, height, body)


def loss_chart(steps, series: dict, width: float = 640.0, height: float = 360.0) -> str:
    """Line chart with one polyline per named series over shared steps."""
    steps = np.asarray(steps, dtype=np.float64)
    if steps.size == 0:
        raise ValueError("no data points to plot")
    vals = np.concatenate([np.asarray(v, dtype=np.float64) for v in series.values()])
    y_lo, y_hi = float(vals.min()), float(vals.max())
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0
    x_lo, x_hi = float(steps.min()), float(steps.max())
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    left, right, top, bottom = 60.0, 130.0, 20.0, 40.0
    pw, ph = width - left - right, height - top - bottom

    def sx(v):
        return left + (v - x_lo) / (x_hi - x_lo) * pw

    def sy(v):
        return top + ph - (v - y_lo) / (y_hi - y_lo) * ph

    body = [
        f'<line x1="{_f(left)}" y1="{_f(top + ph)}" x2="{_f(left + pw)}" y2="{_f(top + ph)}" stroke="black"/>\n',
        f'<line x1="{_f(left)}" y1="{_f(top)}" x2="{_f(left)}" y2="{_f(top + ph)}" stroke="black"/>\n',
        f'<text x="{_f(left)}" y="{_f(height - 12)}" font-family="sans-serif" font-size="11">step {x_lo:g}</text>\n',
        f'<text x="{_f(left + pw - 60)}" y="{_f(height - 12)}" font-family="sans-serif" font-size="11">step {x_hi:g}</text>\n',
        f'<text x="4" y="{_f(top + 10)}" font-family="sans-serif" font-size="11">{y_hi:.3g}</text>\n',
        f'<text x="4" y="{_f(top + ph)}" font-family="sans-serif" font-size="11">{y_lo:.3g}</text>\n',
    ]
    for i, (name, ys) in enumerate(series.items()):
        color = SERIES_COLORS[i % len(SERIES_COLORS)]
        pts = " ".join(f"{_f(sx(x))},{_f(sy(y))}" for x, y in zip(steps, ys))
        body.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>\n')
        ly = top + 16 * (i + 1)
        body.append(
            f'<text x="{_f(left + pw + 10)}" y="{_f(ly)}" font-family="sans-serif" font-size="12" '
            f'fill="{color}">{escape(name)}</text>\n'
        )
    return _doc(width, height, body)
