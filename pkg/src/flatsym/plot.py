"""Static SVG overlays of curves in the upper half-plane."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .fmt import fmt


@dataclass
class HalfPlanePlot:
    x_range: tuple = (-2.0, 2.0)
    y_range: tuple = (0.0, 3.0)
    width: int = 640
    height: int = 480
    items: list = field(default_factory=list)

    def _px(self, x: float, y: float) -> tuple[float, float]:
        (x0, x1), (y0, y1) = self.x_range, self.y_range
        return (
            (x - x0) / (x1 - x0) * self.width,
            self.height - (y - y0) / (y1 - y0) * self.height,
        )

    def polyline(self, points: Sequence[Sequence[float]], color: str = "#1f4e9c", width: float = 1.5):
        pts = " ".join("{},{}".format(*(fmt(v, 6) for v in self._px(x, y))) for x, y in points)
        self.items.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="{width}"/>')

    def geodesic_through(self, x: float, y: float, phi: float, color: str = "#999999"):
        """Full hyperbolic geodesic through (x, y) with tangent angle phi."""
        c = math.cos(phi)
        if abs(c) < 1e-9:
            self.polyline([(x, self.y_range[0]), (x, self.y_range[1])], color, 0.8)
            return
        center = x + y * math.tan(phi)
        radius = y / abs(c)
        n = 181
        pts = [(center + radius * math.cos(math.pi * i / (n - 1)), radius * math.sin(math.pi * i / (n - 1))) for i in range(n)]
        self.polyline(pts, color, 0.8)

    def render(self) -> str:
        head = (
            '<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{self.width}" height="{self.height}">\n'
            f'<rect width="{self.width}" height="{self.height}" fill="white"/>\n'
        )
        _, axis = self._px(0.0, 0.0)
        axis_line = f'<line x1="0" y1="{fmt(axis, 6)}" x2="{self.width}" y2="{fmt(axis, 6)}" stroke="black"/>\n'
        return head + axis_line + "\n".join(self.items) + "\n</svg>\n"


def fit_ranges(points: Sequence[Sequence[float]], pad: float = 0.25) -> tuple[tuple, tuple]:
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    span = max(max(xs) - min(xs), max(ys), 1e-3)
    return (min(xs) - pad * span, max(xs) + pad * span), (0.0, max(ys) + pad * span)
