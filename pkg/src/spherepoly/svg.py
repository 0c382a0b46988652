"""Minimal SVG writer for 2D debugging figures."""
from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np


class Figure:
    """Collects primitives in data coordinates and writes a fitted SVG."""

    def __init__(self, size: int = 600, margin: int = 20):
        self.size = size
        self.margin = margin
        self._items: list[tuple] = []

    def polyline(self, pts, stroke="black", width=1.0, closed=False, dash=None):
        self._items.append(("poly", np.asarray(pts, dtype=float), stroke, width, closed, dash))

    def points(self, pts, r=2.0, fill="black"):
        self._items.append(("pts", np.asarray(pts, dtype=float).reshape(-1, 2), r, fill))

    def circle(self, center, radius, stroke="gray", fill="none"):
        self._items.append(("circ", np.asarray(center, dtype=float), float(radius), stroke, fill))

    def text(self, xy, label, size=12):
        self._items.append(("text", np.asarray(xy, dtype=float), str(label), size))

    def _bounds(self):
        chunks = []
        for it in self._items:
            if it[0] in ("poly", "pts") and it[1].size:
                chunks.append(it[1].reshape(-1, 2))
            elif it[0] == "circ":
                c, r = it[1], it[2]
                chunks.append(np.array([c - r, c + r]))
            elif it[0] == "text":
                chunks.append(it[1][None, :])
        allp = np.vstack(chunks) if chunks else np.zeros((1, 2))
        lo, hi = allp.min(axis=0), allp.max(axis=0)
        span = max(float(np.max(hi - lo)), 1e-12)
        return lo, span

    def render(self) -> str:
        lo, span = self._bounds()
        inner = self.size - 2 * self.margin
        s = inner / span

        def tx(p):
            p = np.atleast_2d(p)
            x = self.margin + (p[:, 0] - lo[0]) * s
            y = self.size - self.margin - (p[:, 1] - lo[1]) * s
            return np.column_stack([x, y])

        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.size}" height="{self.size}" '
               f'viewBox="0 0 {self.size} {self.size}">',
               '<rect width="100%" height="100%" fill="white"/>']
        for it in self._items:
            kind = it[0]
            if kind == "poly":
                _, pts, stroke, width, closed, dash = it
                q = tx(pts)
                tag = "polygon" if closed else "polyline"
                d = f' stroke-dasharray="{dash}"' if dash else ""
                coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in q)
                out.append(f'<{tag} points="{coords}" fill="none" stroke="{stroke}" stroke-width="{width}"{d}/>')
            elif kind == "pts":
                _, pts, r, fill = it
                for x, y in tx(pts):
                    out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{r}" fill="{fill}"/>')
            elif kind == "circ":
                _, c, r, stroke, fill = it
                (x, y), = tx(c)
                out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{r * s:.2f}" fill="{fill}" '
                           f'stroke="{stroke}" fill-opacity="0.3"/>')
            elif kind == "text":
                _, xy, label, size = it
                (x, y), = tx(xy)
                out.append(f'<text x="{x:.2f}" y="{y:.2f}" font-size="{size}">{escape(label)}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.render())


def view_basis(direction) -> np.ndarray:
    """Orthonormal 3x2 basis of the plane perpendicular to ``direction`` (n=3)."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    helper = np.eye(3)[int(np.argmin(np.abs(d)))]
    u = np.cross(d, helper)
    u /= np.linalg.norm(u)
    v = np.cross(d, u)
    return np.column_stack([u, v])
