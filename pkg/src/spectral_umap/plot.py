"""Dependency-free SVG scatter plots with byte-stable output."""

from __future__ import annotations

import numpy as np

PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)
MARGIN = 0.05


def _axis(values, length, flip):
    lo, hi = float(values.min()), float(values.max())
    span = hi - lo
    if span == 0:
        lo, span = lo - 0.5, 1.0
    lo -= MARGIN * span
    span *= 1 + 2 * MARGIN
    pos = (values - lo) / span * length
    return length - pos if flip else pos


def scatter_svg(coords, labels=None, width: int = 800, height: int = 800, radius: float = 2.0) -> str:
    """Scatter the first two columns of ``coords``.

    Points are coloured by ``labels`` (cycling through a 10-colour palette)
    or drawn in a single colour without them.
    """
    coords = np.asarray(coords, dtype=np.float64)
    x = _axis(coords[:, 0], width, flip=False)
    y = _axis(coords[:, 1], height, flip=True)
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="#ffffff"/>',
    ]
    for i in range(coords.shape[0]):
        color = PALETTE[0] if labels is None else PALETTE[int(labels[i]) % len(PALETTE)]
        parts.append(
            f'<circle cx="{x[i]:.2f}" cy="{y[i]:.2f}" r="{radius:g}" fill="{color}" fill-opacity="0.8"/>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
