"""Hand-emitted SVG line plots (no plotting dependency, no timestamps).

Polylines are written in data coordinates under a per-panel affine
transform, so the numbers in the file are the numbers that were plotted;
discontinuous curves are drawn as separate polylines with a visible gap.
Output is byte-identical for identical input.
"""

from __future__ import annotations

from pathlib import Path

__all__ = ["Panel", "render_panels"]

_PANEL_W = 360
_PANEL_H = 280
_MARGIN = 46
_GAP = 28


class Panel:
    """One subplot: a title and a list of polylines (lists of (x, y))."""

    def __init__(self, title: str, polylines: list[list[tuple[float, float]]]):
        self.title = title
        self.polylines = [line for line in polylines if len(line) >= 2]
        if not self.polylines:
            raise ValueError(f"panel {title!r} has no drawable polyline")

    def bounds(self) -> tuple[float, float, float, float]:
        xs = [p[0] for line in self.polylines for p in line]
        ys = [p[1] for line in self.polylines for p in line]
        x_lo, x_hi = min(xs), max(xs)
        y_lo, y_hi = min(ys), max(ys)
        if x_hi == x_lo:
            x_lo, x_hi = x_lo - 1.0, x_hi + 1.0
        if y_hi == y_lo:
            y_lo, y_hi = y_lo - 1.0, y_hi + 1.0
        return x_lo, x_hi, y_lo, y_hi


def _num(v: float) -> str:
    return format(float(v), ".17g")


def render_panels(panels: list[Panel], path: str | Path | None = None) -> str:
    """Render panels side by side; optionally write the SVG text to ``path``."""
    if not panels:
        raise ValueError("need at least one panel")
    width = _MARGIN + len(panels) * (_PANEL_W + _GAP)
    height = _PANEL_H + 2 * _MARGIN
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
    ]
    for idx, panel in enumerate(panels):
        px = _MARGIN + idx * (_PANEL_W + _GAP)
        py = _MARGIN
        x_lo, x_hi, y_lo, y_hi = panel.bounds()
        sx = _PANEL_W / (x_hi - x_lo)
        sy = _PANEL_H / (y_hi - y_lo)
        # data (x, y) -> pixel (px + (x-x_lo)*sx, py + (y_hi-y)*sy)
        transform = (
            f"translate({px - x_lo * sx:.8f},{py + y_hi * sy:.8f}) "
            f"scale({sx:.8f},{-sy:.8f})"
        )
        out.append(f'<g transform="{transform}">')
        for line in panel.polylines:
            pts = " ".join(f"{_num(x)},{_num(y)}" for x, y in line)
            out.append(
                f'<polyline points="{pts}" fill="none" stroke="steelblue" '
                'stroke-width="1.4" vector-effect="non-scaling-stroke"/>'
            )
        out.append("</g>")
        frame = (
            f'<path d="M {px} {py} L {px} {py + _PANEL_H} L {px + _PANEL_W} '
            f'{py + _PANEL_H}" fill="none" stroke="black" stroke-width="1"/>'
        )
        out.append(frame)
        out.append(
            f'<text x="{px + _PANEL_W / 2:.1f}" y="{py - 10}" font-size="14" '
            f'text-anchor="middle" font-family="sans-serif">{panel.title}</text>'
        )
        out.append(
            f'<text x="{px}" y="{py + _PANEL_H + 16}" font-size="11" '
            f'font-family="sans-serif">{x_lo:.6g}</text>'
        )
        out.append(
            f'<text x="{px + _PANEL_W}" y="{py + _PANEL_H + 16}" font-size="11" '
            f'text-anchor="end" font-family="sans-serif">{x_hi:.6g}</text>'
        )
        out.append(
            f'<text x="{px - 4}" y="{py + _PANEL_H}" font-size="11" '
            f'text-anchor="end" font-family="sans-serif">{y_lo:.6g}</text>'
        )
        out.append(
            f'<text x="{px - 4}" y="{py + 10}" font-size="11" '
            f'text-anchor="end" font-family="sans-serif">{y_hi:.6g}</text>'
        )
    out.append("</svg>")
    text = "\n".join(out) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text
