"""Minimal SVG bar charts for pooled Hurst-estimate histograms."""
from __future__ import annotations

from typing import Sequence, Tuple
from xml.sax.saxutils import escape

PANEL_W = 320
PANEL_H = 220
MARGIN = 40


def histogram_panels(panels: Sequence[Tuple[str, "Histogram"]], atoms: Sequence[float]) -> str:
    """Side-by-side panels on [0, 1]; ``atoms`` are drawn as dashed red lines."""
    width = PANEL_W * max(len(panels), 1)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{PANEL_H}" '
             f'viewBox="0 0 {width} {PANEL_H}" font-family="sans-serif" font-size="10">',
             f'<rect width="{width}" height="{PANEL_H}" fill="white"/>']
    for k, (title, hist) in enumerate(panels):
        parts.append(_panel(k * PANEL_W, title, hist, atoms))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _panel(x0: float, title: str, hist, atoms) -> str:
    plot_w = PANEL_W - 2 * MARGIN
    plot_h = PANEL_H - 2 * MARGIN
    left, bottom = x0 + MARGIN, PANEL_H - MARGIN
    top = max(float(hist.masses.max()) if hist.masses.size else 0.0, 1e-12)
    span = hist.width * hist.masses.size

    def sx(v):
        return left + (v - hist.lo) / span * plot_w

    out = [f'<g>',
           f'<text x="{x0 + PANEL_W / 2:.1f}" y="{MARGIN / 2:.1f}" text-anchor="middle">{escape(title)}</text>']
    bar_w = plot_w / hist.masses.size
    for i, m in enumerate(hist.masses):
        h = m / top * plot_h
        out.append(f'<rect x="{left + i * bar_w:.2f}" y="{bottom - h:.2f}" width="{bar_w:.2f}" '
                   f'height="{h:.2f}" fill="#4a78b5" stroke="white" stroke-width="0.3"/>')
    for a in atoms:
        out.append(f'<line x1="{sx(a):.2f}" y1="{bottom}" x2="{sx(a):.2f}" y2="{bottom - plot_h}" '
                   f'stroke="#c0392b" stroke-dasharray="4,3"/>')
    out.append(f'<line x1="{left}" y1="{bottom}" x2="{left + plot_w}" y2="{bottom}" stroke="black"/>')
    out.append(f'<line x1="{left}" y1="{bottom}" x2="{left}" y2="{bottom - plot_h}" stroke="black"/>')
    for t in (0.0, 0.25, 0.5, 0.75, 1.0):
        v = hist.lo + t * span
        out.append(f'<line x1="{sx(v):.2f}" y1="{bottom}" x2="{sx(v):.2f}" y2="{bottom + 4}" stroke="black"/>')
        out.append(f'<text x="{sx(v):.2f}" y="{bottom + 15}" text-anchor="middle">{v:g}</text>')
    out.append(f'<text x="{left - 4}" y="{bottom - plot_h + 4}" text-anchor="end">{top:.3f}</text>')
    out.append(f'<text x="{left - 4}" y="{bottom}" text-anchor="end">0</text>')
    out.append(f'<text x="{left + plot_w / 2:.1f}" y="{PANEL_H - 8}" text-anchor="middle">Hurst estimate</text>')
    out.append("</g>")
    return "\n".join(out)
