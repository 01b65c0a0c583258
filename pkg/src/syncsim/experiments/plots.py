"""Dependency-free SVG line charts for the study CSVs."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

from ..errors import InputError
from .runner import SCHEMA

WIDTH, HEIGHT = 640, 420
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 80, 150, 40, 60
PALETTE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"]


@dataclass
class Series:
    name: str
    xs: list[float]
    ys: list[float]
    color: str = "#000000"
    width: float = 1.5


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi == lo:
        return [lo]
    step = (hi - lo) / (count - 1)
    return [lo + i * step for i in range(count)]


def render_svg(title: str, xlabel: str, ylabel: str, series: Sequence[Series], log_y: bool = False) -> str:
    """Render a line chart; identical input gives byte-identical output."""
    if not series or not any(s.xs for s in series):
        raise InputError("nothing to plot")
    xs = [x for s in series for x in s.xs]
    ys = [y for s in series for y in s.ys]
    if log_y:
        if any(y <= 0 for y in ys):
            raise InputError("log-scaled axis needs positive values")
        ys = [math.log10(y) for y in ys]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pw = WIDTH - MARGIN_L - MARGIN_R
    ph = HEIGHT - MARGIN_T - MARGIN_B

    def px(x):
        return MARGIN_L + (x - x0) / (x1 - x0) * pw

    def py(y):
        return MARGIN_T + ph - (y - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" data-log-y="{str(log_y).lower()}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<rect class="plot-area" x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>',
    ]
    for t in _ticks(x0, x1):
        out.append(f'<text x="{px(t):.2f}" y="{MARGIN_T + ph + 16}" text-anchor="middle" font-size="11">{t:.4g}</text>')
    for t in _ticks(y0, y1):
        label = f"{10 ** t:.3g}" if log_y else f"{t:.4g}"
        out.append(f'<line x1="{MARGIN_L}" x2="{MARGIN_L + pw}" y1="{py(t):.2f}" y2="{py(t):.2f}" stroke="#ddd"/>')
        out.append(f'<text x="{MARGIN_L - 6}" y="{py(t) + 4:.2f}" text-anchor="end" font-size="11">{label}</text>')
    out.append(f'<text x="{MARGIN_L + pw / 2:.1f}" y="{HEIGHT - 15}" text-anchor="middle" font-size="13">{escape(xlabel)}</text>')
    out.append(
        f'<text x="18" y="{MARGIN_T + ph / 2:.1f}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 18 {MARGIN_T + ph / 2:.1f})">{escape(ylabel)}</text>'
    )
    for idx, s in enumerate(series):
        sy = [math.log10(y) for y in s.ys] if log_y else s.ys
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(s.xs, sy))
        out.append(
            f'<polyline class="series" data-name="{escape(s.name)}" fill="none" stroke="{s.color}" '
            f'stroke-width="{s.width}" points="{pts}"/>'
        )
        ly = MARGIN_T + 14 + idx * 16
        out.append(f'<line x1="{WIDTH - MARGIN_R + 10}" x2="{WIDTH - MARGIN_R + 30}" y1="{ly}" y2="{ly}" stroke="{s.color}" stroke-width="2"/>')
        out.append(f'<text x="{WIDTH - MARGIN_R + 35}" y="{ly + 4}" font-size="11">{escape(s.name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def read_study_csv(path: str | Path) -> tuple[str, list[dict[str, str]]]:
    """Parse a schema-tagged CSV; returns (kind, rows). Errors carry the line number."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if not lines:
        raise InputError(f"{path}:1: empty file")
    first = lines[0].split()
    if not first or first[0] != SCHEMA:
        raise InputError(f"{path}:1: missing '{SCHEMA}' header")
    kind = next((tok.split("=", 1)[1] for tok in first[1:] if tok.startswith("kind=")), None)
    if kind is None:
        raise InputError(f"{path}:1: schema line has no kind=")
    if len(lines) < 3:
        raise InputError(f"{path}:{len(lines)}: no data rows")
    reader = csv.reader(lines[1:])
    header = next(reader)
    rows = []
    for lineno, raw in enumerate(reader, start=3):
        if len(raw) != len(header):
            raise InputError(f"{path}:{lineno}: expected {len(header)} fields, got {len(raw)}")
        rows.append(dict(zip(header, raw)))
    return kind, rows


def _num(row: dict[str, str], key: str, path: Path, lineno: int) -> float:
    try:
        return float(row[key])
    except (KeyError, ValueError) as exc:
        raise InputError(f"{path}:{lineno}: bad or missing value for {key!r}") from exc


def _convergence_svg(path: Path, rows: list[dict[str, str]]) -> str:
    seed = rows[0]["seed"]
    mine = [(i + 3, r) for i, r in enumerate(rows) if r["seed"] == seed]
    rel_cols = sorted((c for c in rows[0] if c.startswith("rel_bias_")), key=lambda c: int(c.rsplit("_", 1)[1]))
    its = [_num(r, "iteration", path, ln) for ln, r in mine]
    series = [
        Series(f"node {c.rsplit('_', 1)[1]}", its, [_num(r, c, path, ln) * 1e12 for ln, r in mine], PALETTE[k % len(PALETTE)], 1.0)
        for k, c in enumerate(rel_cols)
    ]
    series.append(Series("average", its, [_num(r, "average_bias", path, ln) * 1e12 for ln, r in mine], "#000000", 2.5))
    return render_svg(f"Bias relative to node 0 (seed {seed})", "iteration", "bias (ps)", series)


def _connectivity_svg(path: Path, rows: list[dict[str, str]]) -> str:
    pts = {}
    for i, r in enumerate(rows):
        pts[_num(r, "connectivity", path, i + 3)] = _num(r, "mean_iterations", path, i + 3)
    xs = sorted(pts)
    return render_svg(
        "Iterations to converge vs connectivity",
        "connectivity (C / max C)",
        "mean iterations",
        [Series("simulation", xs, [pts[x] for x in xs], PALETTE[0], 2.0)],
    )


def _snr_svg(path: Path, rows: list[dict[str, str]]) -> str:
    meas, bound = {}, {}
    for i, r in enumerate(rows):
        snr = _num(r, "snr_db", path, i + 3)
        meas[snr] = _num(r, "point_measured_std", path, i + 3) * 1e12
        bound[snr] = _num(r, "point_crlb_std", path, i + 3) * 1e12
    xs = sorted(meas)
    return render_svg(
        "Offset precision vs SNR",
        "per-sample SNR (dB)",
        "std (ps)",
        [Series("measured", xs, [meas[x] for x in xs], PALETTE[0], 2.0), Series("CRLB", xs, [bound[x] for x in xs], PALETTE[3], 2.0)],
        log_y=True,
    )


_RENDERERS = {"convergence": _convergence_svg, "connectivity": _connectivity_svg, "snr": _snr_svg}


def emit_plots(csv_paths: Sequence[str | Path], out_dir: str | Path) -> list[Path]:
    """One SVG per CSV, named after the CSV. Nothing is written if any input fails to parse."""
    rendered = []
    for p in csv_paths:
        p = Path(p)
        kind, rows = read_study_csv(p)
        if kind not in _RENDERERS:
            raise InputError(f"{p}:1: unknown study kind {kind!r}")
        rendered.append((p, _RENDERERS[kind](p, rows)))
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for p, svg in rendered:
        target = out_dir / (p.stem + ".svg")
        target.write_text(svg)
        written.append(target)
    return written
