"""Hand-written SVG charts and a plain-text summary of EC reports.

Charts are emitted as text with fixed number formatting, so identical inputs
give byte-identical files.
"""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from .attribution import ECReport, ECRow

PALETTE = ("#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860", "#da8bc3", "#8c8c8c")
BAR_W = 22.0
GROUP_GAP = 26.0
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 64.0, 24.0, 40.0, 96.0
PLOT_H = 240.0
MIN_WIDTH = 280.0


def _f(x: float) -> str:
    return f"{x:.2f}"


def _nice_max(v: float) -> float:
    if v <= 0:
        return 1.0
    mag = 10 ** np.floor(np.log10(v))
    for m in (1, 1.2, 1.5, 2, 2.5, 3, 4, 5, 6, 8, 10):
        if m * mag >= v:
            return float(m * mag)
    return float(10 * mag)


def bar_chart_svg(groups: list[str], series: list[str], values: dict, title: str, y_label: str) -> str:
    """Grouped bars: ``values[(group, series)] = (mean, std)``; missing pairs are skipped.

    Whiskers mark mean ± std and are omitted when std is 0.  Each bar is
    labelled with its mean to 4 decimals.
    """
    if not groups or not series:
        raise ValueError("nothing to plot")
    top = max((m + s for m, s in values.values()), default=0.0)
    low = min((m - s for m, s in values.values()), default=0.0)
    # headroom for the rotated value labels
    y_max = _nice_max(top * 1.3)
    y_min = -_nice_max(-low * 1.3) if low < 0 else 0.0
    group_w = len(series) * BAR_W + GROUP_GAP
    width = max(MIN_WIDTH, MARGIN_L + len(groups) * group_w + MARGIN_R)
    legend = len(series) > 1
    legend_h = 16.0 * len(series) if legend else 0.0
    height = MARGIN_T + PLOT_H + MARGIN_B + legend_h

    def y_of(v):
        return MARGIN_T + PLOT_H * (y_max - v) / (y_max - y_min)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(width)}" height="{_f(height)}" '
        f'viewBox="0 0 {_f(width)} {_f(height)}" font-family="sans-serif" font-size="10">',
        f'<rect width="{_f(width)}" height="{_f(height)}" fill="white"/>',
        f'<text x="{_f(width / 2)}" y="20.00" text-anchor="middle" font-size="13">{escape(title)}</text>',
    ]
    for i in range(6):
        v = y_min + (y_max - y_min) * i / 5
        y = y_of(v)
        out.append(f'<line x1="{_f(MARGIN_L)}" y1="{_f(y)}" x2="{_f(width - MARGIN_R)}" y2="{_f(y)}" stroke="#dddddd"/>')
        out.append(f'<text x="{_f(MARGIN_L - 6)}" y="{_f(y + 3)}" text-anchor="end">{v:.4f}</text>')
    mid_y = MARGIN_T + PLOT_H / 2
    out.append(
        f'<text x="14.00" y="{_f(mid_y)}" text-anchor="middle" transform="rotate(-90 14.00 {_f(mid_y)})">{escape(y_label)}</text>'
    )
    zero = y_of(0.0)
    for gi, g in enumerate(groups):
        x0 = MARGIN_L + gi * group_w + GROUP_GAP / 2
        for si, s in enumerate(series):
            if (g, s) not in values:
                continue
            mean, std = values[(g, s)]
            x = x0 + si * BAR_W
            y_top, y_bot = sorted((y_of(mean), zero))
            color = PALETTE[si % len(PALETTE)]
            out.append(
                f'<rect class="bar" x="{_f(x + 1)}" y="{_f(y_top)}" width="{_f(BAR_W - 2)}" height="{_f(y_bot - y_top)}" fill="{color}"/>'
            )
            cx = x + BAR_W / 2
            if std > 0:
                hi, lo = y_of(mean + std), y_of(mean - std)
                out.append(f'<line class="whisker" x1="{_f(cx)}" y1="{_f(hi)}" x2="{_f(cx)}" y2="{_f(lo)}" stroke="black"/>')
                for yy in (hi, lo):
                    out.append(f'<line class="cap" x1="{_f(cx - 4)}" y1="{_f(yy)}" x2="{_f(cx + 4)}" y2="{_f(yy)}" stroke="black"/>')
            label_y = min(y_of(mean + std), y_of(mean)) - 4
            out.append(
                f'<text x="{_f(cx + 3)}" y="{_f(label_y)}" text-anchor="start" font-size="8" '
                f'transform="rotate(-90 {_f(cx + 3)} {_f(label_y)})">{mean:.4f}</text>'
            )
        gx = x0 + len(series) * BAR_W / 2
        gy = MARGIN_T + PLOT_H + 14
        out.append(
            f'<text x="{_f(gx)}" y="{_f(gy)}" text-anchor="end" transform="rotate(-30 {_f(gx)} {_f(gy)})">{escape(g)}</text>'
        )
    out.append(
        f'<line x1="{_f(MARGIN_L)}" y1="{_f(zero)}" x2="{_f(width - MARGIN_R)}" y2="{_f(zero)}" stroke="black"/>'
    )
    ly = MARGIN_T + PLOT_H + MARGIN_B
    for si, s in enumerate(series if legend else []):
        y = ly + 16 * si
        out.append(f'<rect x="{_f(MARGIN_L)}" y="{_f(y - 9)}" width="10.00" height="10.00" fill="{PALETTE[si % len(PALETTE)]}"/>')
        out.append(f'<text x="{_f(MARGIN_L + 14)}" y="{_f(y)}">{escape(s)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _series_label(row: ECRow) -> str:
    return row.optimizer if row.mode == "filter" else f"{row.optimizer} ({row.mode})"


def ec_chart_svg(rows: list[ECRow], title: str | None = None) -> str:
    """Grouped EC bar chart: one group per target, one bar per optimizer."""
    if not rows:
        raise ValueError("empty report")
    groups = list(dict.fromkeys(r.target for r in rows))
    series = list(dict.fromkeys(_series_label(r) for r in rows))
    values = {(r.target, _series_label(r)): (r.mean, r.std) for r in rows}
    level = rows[0].level
    path = rows[0].path
    title = title or (f"Error contribution by {level}" + (f" on {path}" if path else ""))
    return bar_chart_svg(groups, series, values, title, "error contribution")


def split_by_chart(rows: list[ECRow]) -> dict[str, list[ECRow]]:
    """Rows grouped per chart: one chart per (level, path)."""
    out: dict[str, list[ECRow]] = {}
    for r in rows:
        key = r.level if not r.path else f"{r.level}_{r.path}"
        out.setdefault(key, []).append(r)
    return out


def timing_rows(summary: dict) -> list[tuple[str, float, float, int]]:
    """(optimizer/mode label, mean elapsed s, std, run count) from a run summary."""
    groups: dict[str, list[float]] = {}
    for r in summary.get("runs", []):
        label = r["optimizer"] if r.get("mode", "cash") == "cash" else f"{r['optimizer']} ({r['mode']})"
        groups.setdefault(label, []).append(float(r["elapsed_s"]))
    return [(k, float(np.mean(v)), float(np.std(v)), len(v)) for k, v in groups.items()]


def timing_chart_svg(summary: dict, title: str = "Wall-clock time per run") -> str:
    rows = timing_rows(summary)
    if not rows:
        raise ValueError("run summary has no runs")
    values = {(label, "time"): (mean, std) for label, mean, std, _ in rows}
    return bar_chart_svg([r[0] for r in rows], ["time"], values, title, "seconds")


def summary_table(reports: list[ECReport], summaries: list[dict] = ()) -> str:
    """Fixed-width text table of every EC row, then per-optimizer timings."""
    lines = []
    rows = [r for rep in reports for r in rep.rows]
    wt = max([len("target")] + [len(r.target) for r in rows])
    wp = max([len("path")] + [len(r.path) for r in rows])
    header = f"{'level':<15} {'target':<{wt}} {'path':<{wp}} {'optimizer':<16} {'mean':>8} {'std':>8} {'runs':>4}"
    lines.append(header)
    lines.append("-" * len(header))
    for r in rows:
        lines.append(
            f"{r.level:<15} {r.target:<{wt}} {r.path:<{wp}} {_series_label(r):<16} {r.mean:>8.4f} {r.std:>8.4f} {r.run_count:>4}"
        )
    for summary in summaries:
        rows = timing_rows(summary)
        if rows:
            lines.append("")
            lines.append(f"{'optimizer':<16} {'mean s':>10} {'std s':>10} {'runs':>4}")
            for label, mean, std, n in rows:
                lines.append(f"{label:<16} {mean:>10.3f} {std:>10.3f} {n:>4}")
    return "\n".join(lines) + "\n"
