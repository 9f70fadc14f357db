"""Minimal built-in SVG rendering of rate-vs-loss curves.

Produces a self-contained vector plot — log-scale rate axis, one curve per
phase count, the repeaterless capacity overlaid as a dashed line — without
any plotting dependency.  Output is deterministic for identical inputs.
"""

from __future__ import annotations

import math

from .keyrate import KeyRatePoint, plob_bound

_WIDTH, _HEIGHT = 720, 520
_LEFT, _RIGHT, _TOP, _BOTTOM = 80, 24, 28, 56
_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
_FLOOR_EXP = -12  # rates below 1e-12 are treated as off-scale


def _phase_label(m_phases: float) -> str:
    return "M=inf" if math.isinf(m_phases) else f"M={int(m_phases)}"


def _nice_x_step(span: float) -> float:
    for step in (1.0, 2.0, 5.0, 10.0, 20.0, 50.0):
        if span / step <= 9:
            return step
    return 100.0


def render_rate_svg(points: list[KeyRatePoint]) -> str:
    """Render sweep results as an SVG document string."""
    if not points:
        raise ValueError("no points to plot")

    curves: dict[float, list[KeyRatePoint]] = {}
    for point in points:
        curves.setdefault(point.m_phases, []).append(point)
    for curve in curves.values():
        curve.sort(key=lambda p: p.loss_db)
    order = sorted(curves, key=lambda m: (math.isinf(m), m))

    losses = sorted({p.loss_db for p in points})
    plob = [(loss, plob_bound(10.0 ** (-loss / 10.0))) for loss in losses if loss > 0]

    values = [p.rate for p in points if p.rate > 0]
    values += [v for _, v in plob if v > 0]
    if values:
        y_lo = math.floor(max(math.log10(min(values)), _FLOOR_EXP))
        y_hi = math.ceil(math.log10(max(values)))
        if y_hi == y_lo:
            y_hi += 1
    else:
        y_lo, y_hi = _FLOOR_EXP, 0
    x_lo, x_hi = losses[0], losses[-1]
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 1.0, x_hi + 1.0

    inner_w = _WIDTH - _LEFT - _RIGHT
    inner_h = _HEIGHT - _TOP - _BOTTOM

    def x_pos(loss: float) -> float:
        return _LEFT + (loss - x_lo) / (x_hi - x_lo) * inner_w

    def y_pos(rate: float) -> float:
        exp = max(math.log10(rate), y_lo) if rate > 0 else y_lo
        return _TOP + (y_hi - exp) / (y_hi - y_lo) * inner_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        '<g font-family="sans-serif" font-size="12" fill="#333">',
    ]

    # gridlines and axis labels
    for exp in range(y_lo, y_hi + 1):
        y = y_pos(10.0**exp)
        out.append(
            f'<line x1="{_LEFT}" y1="{y:.1f}" x2="{_WIDTH - _RIGHT}" y2="{y:.1f}" '
            'stroke="#ddd" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{_LEFT - 8}" y="{y + 4:.1f}" text-anchor="end">1e{exp}</text>'
        )
    step = _nice_x_step(x_hi - x_lo)
    tick = math.ceil(x_lo / step) * step
    while tick <= x_hi + 1e-9:
        x = x_pos(tick)
        out.append(
            f'<line x1="{x:.1f}" y1="{_TOP}" x2="{x:.1f}" y2="{_HEIGHT - _BOTTOM}" '
            'stroke="#eee" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{x:.1f}" y="{_HEIGHT - _BOTTOM + 18}" text-anchor="middle">{tick:g}</text>'
        )
        tick += step
    out.append(
        f'<rect x="{_LEFT}" y="{_TOP}" width="{inner_w}" height="{inner_h}" '
        'fill="none" stroke="#333" stroke-width="1"/>'
    )
    out.append(
        f'<text x="{_LEFT + inner_w / 2:.1f}" y="{_HEIGHT - 12}" text-anchor="middle">'
        "total loss (dB)</text>"
    )
    out.append(
        f'<text x="18" y="{_TOP + inner_h / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 18 {_TOP + inner_h / 2:.1f})">secret key rate per pulse</text>'
    )

    # repeaterless capacity reference
    if len(plob) >= 2:
        path = " ".join(f"{x_pos(loss):.1f},{y_pos(v):.1f}" for loss, v in plob)
        out.append(
            f'<polyline points="{path}" fill="none" stroke="#000" stroke-width="1.5" '
            'stroke-dasharray="6,4"/>'
        )

    # one curve per phase count, line breaks at zero-rate points
    for idx, m in enumerate(order):
        color = _PALETTE[idx % len(_PALETTE)]
        run: list[str] = []
        segments: list[list[str]] = []
        for point in curves[m]:
            if point.rate > 0:
                run.append(f"{x_pos(point.loss_db):.1f},{y_pos(point.rate):.1f}")
            elif run:
                segments.append(run)
                run = []
        if run:
            segments.append(run)
        for seg in segments:
            if len(seg) == 1:
                x, y = seg[0].split(",")
                out.append(f'<circle cx="{x}" cy="{y}" r="2.5" fill="{color}"/>')
            else:
                out.append(
                    f'<polyline points="{" ".join(seg)}" fill="none" stroke="{color}" '
                    'stroke-width="1.8"/>'
                )

    # legend
    legend_x = _WIDTH - _RIGHT - 130
    legend_y = _TOP + 14
    for idx, m in enumerate(order):
        color = _PALETTE[idx % len(_PALETTE)]
        y = legend_y + 18 * idx
        out.append(
            f'<line x1="{legend_x}" y1="{y}" x2="{legend_x + 26}" y2="{y}" '
            f'stroke="{color}" stroke-width="1.8"/>'
        )
        out.append(f'<text x="{legend_x + 32}" y="{y + 4}">{_phase_label(m)}</text>')
    if plob:
        y = legend_y + 18 * len(order)
        out.append(
            f'<line x1="{legend_x}" y1="{y}" x2="{legend_x + 26}" y2="{y}" '
            'stroke="#000" stroke-width="1.5" stroke-dasharray="6,4"/>'
        )
        out.append(f'<text x="{legend_x + 32}" y="{y + 4}">repeaterless cap</text>')

    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
