"""Reliability-diagram rendering as deterministic, dependency-free SVG.

One panel per ReliabilityBins: wide bars show the observed frequency per
bin, narrow bars mark the gap between observed frequency and mean
predicted probability, and the diagonal marks perfect calibration. The
markup is fixed-layout with fixed number formatting, so identical inputs
produce byte-identical files.
"""

import numpy as np

from .metrics import ReliabilityBins

_PANEL_W = 240
_PANEL_H = 240
_MARGIN_L = 36
_MARGIN_B = 28
_MARGIN_T = 22
_MARGIN_R = 10
_PER_ROW = 4

_BAR_FILL = "#4878b0"
_GAP_FILL = "#d65f5f"


def _fmt(v: float) -> str:
    return f"{v:.4f}"


def _panel(bins: ReliabilityBins, x0: int, y0: int, title: str) -> list:
    plot_w = _PANEL_W - _MARGIN_L - _MARGIN_R
    plot_h = _PANEL_H - _MARGIN_T - _MARGIN_B
    left = x0 + _MARGIN_L
    top = y0 + _MARGIN_T
    bottom = top + plot_h

    def sx(v: float) -> float:
        return left + v * plot_w

    def sy(v: float) -> float:
        return bottom - v * plot_h

    parts = [f'<g class="chart" transform="translate(0,0)">']
    parts.append(
        f'<rect x="{_fmt(left)}" y="{_fmt(top)}" width="{_fmt(plot_w)}" '
        f'height="{_fmt(plot_h)}" fill="none" stroke="#888888" stroke-width="1"/>'
    )
    parts.append(
        f'<line x1="{_fmt(sx(0.0))}" y1="{_fmt(sy(0.0))}" x2="{_fmt(sx(1.0))}" '
        f'y2="{_fmt(sy(1.0))}" stroke="#999999" stroke-width="1" stroke-dasharray="4,3"/>'
    )
    m = bins.counts.size
    for i in range(m):
        if bins.counts[i] == 0:
            continue
        lo = float(bins.edges[i])
        hi = float(bins.edges[i + 1])
        freq = float(bins.empirical_frequency[i])
        pred = float(bins.mean_predicted[i])
        parts.append(
            f'<rect x="{_fmt(sx(lo) + 1)}" y="{_fmt(sy(freq))}" '
            f'width="{_fmt(max(sx(hi) - sx(lo) - 2, 1.0))}" '
            f'height="{_fmt(max(bottom - sy(freq), 0.0))}" fill="{_BAR_FILL}"/>'
        )
        gap_top = sy(max(freq, pred))
        gap_h = abs(sy(freq) - sy(pred))
        centre = sx(0.5 * (lo + hi))
        parts.append(
            f'<rect x="{_fmt(centre - 2)}" y="{_fmt(gap_top)}" width="4.0000" '
            f'height="{_fmt(gap_h)}" fill="{_GAP_FILL}"/>'
        )
    parts.append(
        f'<text x="{_fmt(x0 + _PANEL_W / 2)}" y="{_fmt(y0 + 14)}" font-size="11" '
        f'text-anchor="middle" font-family="sans-serif">{title}</text>'
    )
    for tick in (0.0, 0.5, 1.0):
        parts.append(
            f'<text x="{_fmt(sx(tick))}" y="{_fmt(bottom + 14)}" font-size="9" '
            f'text-anchor="middle" font-family="sans-serif">{tick:.1f}</text>'
        )
        parts.append(
            f'<text x="{_fmt(left - 4)}" y="{_fmt(sy(tick) + 3)}" font-size="9" '
            f'text-anchor="end" font-family="sans-serif">{tick:.1f}</text>'
        )
    parts.append("</g>")
    return parts


def render_reliability_svg(bins_list) -> str:
    """SVG document with one chart per ReliabilityBins, wrapped 4 per row."""
    bins_list = list(bins_list)
    if not bins_list:
        raise ValueError("need at least one set of reliability bins")
    cols = min(len(bins_list), _PER_ROW)
    rows = (len(bins_list) + _PER_ROW - 1) // _PER_ROW
    width = cols * _PANEL_W
    height = rows * _PANEL_H
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
    ]
    for i, bins in enumerate(bins_list):
        x0 = (i % _PER_ROW) * _PANEL_W
        y0 = (i // _PER_ROW) * _PANEL_H
        if bins.mode == "confidence":
            title = "confidence reliability"
        else:
            title = f"class {bins.class_index} reliability"
        parts.extend(_panel(bins, x0, y0, title))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def reliability_table(bins_list) -> str:
    """CSV with the exact per-bin numbers behind the charts."""
    lines = ["mode,class,bin_low,bin_high,count,mean_predicted,empirical_frequency"]
    for bins in bins_list:
        cls = "" if bins.class_index is None else str(bins.class_index)
        for lo, hi, count, pred, freq in bins.to_table():
            pred_s = "" if np.isnan(pred) else repr(pred)
            freq_s = "" if np.isnan(freq) else repr(freq)
            lines.append(f"{bins.mode},{cls},{lo!r},{hi!r},{count},{pred_s},{freq_s}")
    return "\n".join(lines) + "\n"
