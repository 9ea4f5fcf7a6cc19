"""Minimal SVG 1.1 line-plot writer (no plotting backend, byte-stable output)."""
from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")
PANEL_W, PANEL_H = 380, 250
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 15, 30, 40
LEGEND_H = 28
MAX_POINTS = 801


def nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return []
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / max(n - 1, 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    first = math.ceil(lo / step) * step
    ticks = []
    v = first
    while v <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return ticks


def _limits(series) -> tuple[float, float, float, float]:
    xs = np.concatenate([np.asarray(s[1], float) for s in series])
    ys = np.concatenate([np.asarray(s[2], float) for s in series])
    ys = ys[np.isfinite(ys)]
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = (float(ys.min()), float(ys.max())) if ys.size else (0.0, 1.0)
    if y1 - y0 <= 1e-12 * max(abs(y0), abs(y1), 1.0):
        pad = max(abs(y0) * 0.05, 1e-3)
        y0, y1 = y0 - pad, y1 + pad
    if x1 <= x0:
        x1 = x0 + 1.0
    return x0, x1, y0, y1


def _stride(n: int) -> int:
    return max(1, math.ceil(n / MAX_POINTS))


def _subplot(out: list, ox: float, oy: float, title: str, series, colors) -> None:
    w = PANEL_W - MARGIN_L - MARGIN_R
    h = PANEL_H - MARGIN_T - MARGIN_B
    x0, x1, y0, y1 = _limits(series)
    left, top = ox + MARGIN_L, oy + MARGIN_T

    def px(x):
        return left + (x - x0) / (x1 - x0) * w

    def py(y):
        return top + h - (y - y0) / (y1 - y0) * h

    out.append(f'<g class="subplot" id="{escape(title)}">')
    out.append(f'<text x="{left + w / 2:.2f}" y="{oy + 18:.2f}" text-anchor="middle" '
               f'font-size="13">{escape(title)}</text>')
    out.append(f'<rect x="{left:.2f}" y="{top:.2f}" width="{w:.2f}" height="{h:.2f}" '
               f'fill="none" stroke="#444" stroke-width="1"/>')
    for t in nice_ticks(x0, x1):
        out.append(f'<line x1="{px(t):.2f}" y1="{top + h:.2f}" x2="{px(t):.2f}" y2="{top + h + 4:.2f}" stroke="#444"/>')
        out.append(f'<text x="{px(t):.2f}" y="{top + h + 16:.2f}" text-anchor="middle" font-size="10">{t:g}</text>')
    for t in nice_ticks(y0, y1):
        out.append(f'<line x1="{left - 4:.2f}" y1="{py(t):.2f}" x2="{left:.2f}" y2="{py(t):.2f}" stroke="#444"/>')
        out.append(f'<text x="{left - 6:.2f}" y="{py(t) + 3:.2f}" text-anchor="end" font-size="10">{t:.4g}</text>')
    out.append(f'<text x="{left + w / 2:.2f}" y="{top + h + 32:.2f}" text-anchor="middle" '
               f'font-size="11">t (weeks)</text>')
    for (label, xs, ys), color in zip(series, colors):
        xs = np.asarray(xs, float)
        ys = np.asarray(ys, float)
        k = _stride(len(xs))
        idx = np.unique(np.r_[np.arange(0, len(xs), k), len(xs) - 1])
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs[idx], ys[idx]) if math.isfinite(y))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                   f'data-label="{escape(label)}" points="{pts}"/>')
    out.append("</g>")


def figure(title: str, panels, ncols: int = 2) -> str:
    """``panels``: list of (subplot title, [(label, x, y), ...]); one legend per figure."""
    nrows = math.ceil(len(panels) / ncols)
    width = ncols * PANEL_W
    height = nrows * PANEL_H + LEGEND_H + 24
    labels = [s[0] for s in panels[0][1]]
    colors = [PALETTE[i % len(PALETTE)] for i in range(len(labels))]
    out = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif">',
        f'<title>{escape(title)}</title>',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.2f}" y="18" text-anchor="middle" font-size="15">{escape(title)}</text>',
    ]
    out.append('<g class="legend">')
    x = 10.0
    for label, color in zip(labels, colors):
        out.append(f'<line x1="{x:.2f}" y1="36" x2="{x + 24:.2f}" y2="36" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{x + 28:.2f}" y="40" font-size="11">{escape(label)}</text>')
        x += 40 + 7 * len(label)
    out.append("</g>")
    for i, (sub_title, series) in enumerate(panels):
        r, c = divmod(i, ncols)
        _subplot(out, c * PANEL_W, 24 + LEGEND_H + r * PANEL_H, sub_title, series, colors)
    out.append("</svg>")
    return "\n".join(out) + "\n"


WOMEN = (("S", 0, "susceptible pregnant women S"), ("I", 1, "infected pregnant women I"),
         ("W", 2, "births without microcephaly W"), ("M", 3, "births with microcephaly M"))
MOSQUITOES = (("Am", 4, "aquatic phase Am"), ("Sm", 5, "susceptible mosquitoes Sm"),
              ("Em", 6, "exposed mosquitoes Em"), ("Im", 7, "infected mosquitoes Im"))


def emit_plots(results, out_dir, prefix: str = "") -> list[Path]:
    """Women panel, mosquito panel and control panel, one polyline per scenario."""
    results = [r for r in results if r.solution is not None]
    if not results:
        raise ValueError("emit_plots needs at least one successful result")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def state_panels(spec):
        return [(title, [(r.label, r.solution.times, r.solution.states[:, i]) for r in results])
                for _, i, title in spec]

    controls = [(f"control u{i + 1}", [(r.label, r.solution.times, r.solution.controls[:, i])
                                      for r in results]) for i in range(2)]
    figures = {
        "women.svg": figure("Women population", state_panels(WOMEN)),
        "mosquitoes.svg": figure("Mosquito population", state_panels(MOSQUITOES)),
        "controls.svg": figure("Control strategies", controls),
    }
    paths = []
    for name, text in figures.items():
        path = out_dir / f"{prefix}{name}"
        path.write_text(text, encoding="utf-8")
        paths.append(path)
    return paths
