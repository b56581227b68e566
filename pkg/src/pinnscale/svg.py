"""Static SVG emission for the report command (no plotting dependency).

Two chart types: a log-log error-vs-N scatter with per-N median markers and
regime shading (pink / blue / green for pre-asymptotic / transition /
permanent), and a bar chart for efficiency versus worker count.
"""

from __future__ import annotations

import math

__all__ = ["efficiency_bars_svg", "error_vs_n_svg"]

WIDTH, HEIGHT = 720, 460
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 40, 55

REGIME_FILL = {
    "pre-asymptotic": "#f9d0e1",
    "transition": "#cfe3f9",
    "permanent": "#d3f2d3",
}


def _esc(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _svg_header(title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="22" text-anchor="middle" font-size="15">{_esc(title)}</text>',
    ]


def _log_ticks(lo: float, hi: float) -> list[int]:
    return list(range(math.floor(lo), math.ceil(hi) + 1))


class _LogAxes:
    """Maps log10 data coordinates to pixel coordinates."""

    def __init__(self, x_range: tuple[float, float], y_range: tuple[float, float]):
        pad = 0.15
        self.x0, self.x1 = x_range[0] - pad, x_range[1] + pad
        self.y0, self.y1 = y_range[0] - pad, y_range[1] + pad
        if self.x1 <= self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 <= self.y0:
            self.y1 = self.y0 + 1.0

    def px(self, lx: float) -> float:
        frac = (lx - self.x0) / (self.x1 - self.x0)
        return MARGIN_L + frac * (WIDTH - MARGIN_L - MARGIN_R)

    def py(self, ly: float) -> float:
        frac = (ly - self.y0) / (self.y1 - self.y0)
        return HEIGHT - MARGIN_B - frac * (HEIGHT - MARGIN_T - MARGIN_B)


def error_vs_n_svg(
    points: list[tuple[int, float]],
    medians: dict[int, float],
    regimes: dict[int, str],
    title: str = "Relative L2 error vs collocation points",
) -> str:
    """Log-log scatter of (N_f, error) with median markers and regime bands."""
    pts = [(n, e) for n, e in points if n > 0 and e > 0 and math.isfinite(e)]
    if not pts:
        raise ValueError("no positive finite (N, error) pairs to plot")
    lx = [math.log10(n) for n, _ in pts]
    ly = [math.log10(e) for _, e in pts]
    axes = _LogAxes((min(lx), max(lx)), (min(ly), max(ly)))
    out = _svg_header(title)

    ns = sorted({n for n, _ in pts})
    if regimes:
        # band edges halfway (in log space) between neighbouring N values
        logns = [math.log10(n) for n in ns]
        edges = [axes.x0] + [(a + b) / 2 for a, b in zip(logns, logns[1:])] + [axes.x1]
        for i, n in enumerate(ns):
            fill = REGIME_FILL.get(regimes.get(n, ""), None)
            if fill is None:
                continue
            x_left, x_right = axes.px(edges[i]), axes.px(edges[i + 1])
            out.append(
                f'<rect x="{x_left:.1f}" y="{MARGIN_T}" width="{x_right - x_left:.1f}" '
                f'height="{HEIGHT - MARGIN_T - MARGIN_B}" fill="{fill}" opacity="0.8"/>'
            )

    for exp in _log_ticks(axes.x0, axes.x1):
        x = axes.px(exp)
        if MARGIN_L <= x <= WIDTH - MARGIN_R:
            out.append(f'<line x1="{x:.1f}" y1="{MARGIN_T}" x2="{x:.1f}" y2="{HEIGHT - MARGIN_B}" stroke="#ddd"/>')
            out.append(f'<text x="{x:.1f}" y="{HEIGHT - MARGIN_B + 18}" text-anchor="middle">1e{exp}</text>')
    for exp in _log_ticks(axes.y0, axes.y1):
        y = axes.py(exp)
        if MARGIN_T <= y <= HEIGHT - MARGIN_B:
            out.append(f'<line x1="{MARGIN_L}" y1="{y:.1f}" x2="{WIDTH - MARGIN_R}" y2="{y:.1f}" stroke="#ddd"/>')
            out.append(f'<text x="{MARGIN_L - 8}" y="{y + 4:.1f}" text-anchor="end">1e{exp}</text>')
    out.append(
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{WIDTH - MARGIN_L - MARGIN_R}" '
        f'height="{HEIGHT - MARGIN_T - MARGIN_B}" fill="none" stroke="#333"/>'
    )
    out.append(
        f'<text x="{(MARGIN_L + WIDTH - MARGIN_R) / 2}" y="{HEIGHT - 12}" text-anchor="middle">'
        "collocation points N_f</text>"
    )
    out.append(
        f'<text x="18" y="{(MARGIN_T + HEIGHT - MARGIN_B) / 2}" text-anchor="middle" '
        f'transform="rotate(-90 18 {(MARGIN_T + HEIGHT - MARGIN_B) / 2})">relative L2 error</text>'
    )

    for n, e in pts:
        out.append(
            f'<circle cx="{axes.px(math.log10(n)):.1f}" cy="{axes.py(math.log10(e)):.1f}" '
            'r="3.5" fill="#2b6cb0" opacity="0.65"/>'
        )
    for n in ns:
        med = medians.get(n)
        if med is None or med <= 0 or not math.isfinite(med):
            continue
        x, y = axes.px(math.log10(n)), axes.py(math.log10(med))
        out.append(f'<line x1="{x - 7:.1f}" y1="{y:.1f}" x2="{x + 7:.1f}" y2="{y:.1f}" stroke="#c53030" stroke-width="2.5"/>')
    out.append("</svg>")
    return "\n".join(out)


def efficiency_bars_svg(
    sizes: list[int],
    efficiencies: list[float],
    title: str = "Scaling efficiency",
) -> str:
    """Bar chart of efficiency (0..1) per worker count, with the ideal line."""
    if not sizes or len(sizes) != len(efficiencies):
        raise ValueError("sizes and efficiencies must be equal-length and non-empty")
    out = _svg_header(title)
    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B
    top = max(1.0, max(e for e in efficiencies if math.isfinite(e)) * 1.1)
    slot = plot_w / len(sizes)

    for frac in (0.25, 0.5, 0.75, 1.0):
        y = HEIGHT - MARGIN_B - frac / top * plot_h
        out.append(f'<line x1="{MARGIN_L}" y1="{y:.1f}" x2="{WIDTH - MARGIN_R}" y2="{y:.1f}" stroke="#ddd"/>')
        out.append(f'<text x="{MARGIN_L - 8}" y="{y + 4:.1f}" text-anchor="end">{frac:.2f}</text>')
    ideal_y = HEIGHT - MARGIN_B - 1.0 / top * plot_h
    out.append(
        f'<line x1="{MARGIN_L}" y1="{ideal_y:.1f}" x2="{WIDTH - MARGIN_R}" y2="{ideal_y:.1f}" '
        'stroke="#888" stroke-dasharray="6 4"/>'
    )
    for i, (size, eff) in enumerate(zip(sizes, efficiencies)):
        if not math.isfinite(eff):
            continue
        h = max(0.0, eff) / top * plot_h
        x = MARGIN_L + i * slot + slot * 0.2
        y = HEIGHT - MARGIN_B - h
        out.append(f'<rect x="{x:.1f}" y="{y:.1f}" width="{slot * 0.6:.1f}" height="{h:.1f}" fill="#2f855a"/>')
        out.append(
            f'<text x="{x + slot * 0.3:.1f}" y="{y - 6:.1f}" text-anchor="middle">{eff * 100:.1f}%</text>'
        )
        out.append(
            f'<text x="{x + slot * 0.3:.1f}" y="{HEIGHT - MARGIN_B + 18}" text-anchor="middle">{size}</text>'
        )
    out.append(
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#333"/>'
    )
    out.append(f'<text x="{(MARGIN_L + WIDTH - MARGIN_R) / 2}" y="{HEIGHT - 12}" text-anchor="middle">workers</text>')
    out.append("</svg>")
    return "\n".join(out)
