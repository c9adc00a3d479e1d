"""Deterministic artifact emitters: CSV at 17 significant digits
(round-trip exact), JSON summaries, config manifests and a minimal SVG
line plotter (polyline + axes, no plotting dependency).

Nothing here embeds wall-clock state; identical inputs produce
byte-identical files.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, is_dataclass

from .experiments import ExperimentReport


def fmt_value(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int,)):
        return str(x)
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return f"{x:.17g}"
    return str(x)


def write_rows_csv(columns, rows, fh):
    """Rows are mappings or dataclasses; missing keys serialize empty."""
    fh.write(",".join(columns) + "\n")
    for row in rows:
        if is_dataclass(row):
            row = asdict(row)
        fh.write(",".join(fmt_value(row.get(c)) for c in columns) + "\n")


def save_rows_csv(columns, rows, path):
    with open(path, "w", encoding="utf-8") as fh:
        write_rows_csv(columns, rows, fh)


COVER_COLUMNS = ["replica", "delta", "N", "M", "L", "Y", "MG", "NG"]
RENEWAL_COLUMNS = ["delta", "n", "U_hat", "se_U", "var_hat", "m3_hat",
                   "a", "b", "closed_form_U"]
DIAG_COLUMNS = ["delta", "u_or_lambda", "g", "R", "tR", "delta_lambda",
                "bound", "empirical_p"]


def cover_row(result):
    return {"replica": result.replica, "delta": result.delta,
            "N": result.N, "M": result.M, "L": result.L, "Y": result.Y,
            "MG": result.M_G, "NG": result.N_G}


def renewal_row(est, normalizers=None):
    row = {"delta": est.delta, "n": est.n_samples, "U_hat": est.U_hat,
           "se_U": est.se_U, "var_hat": est.var_hat, "m3_hat": est.m3_hat,
           "closed_form_U": est.closed_form_U}
    if normalizers is not None:
        row["a"] = normalizers.a
        row["b"] = normalizers.b
    return row


def write_report_csv(report: ExperimentReport, path):
    save_rows_csv(report.columns, report.rows, path)


def write_summary_json(report: ExperimentReport, path):
    payload = {
        "kind": report.kind,
        "verdict": "PASS" if report.verdict else "FAIL",
        "rows": report.rows,
        "banners": report.banners,
        "provenance": report.provenance,
        "extras": report.extras,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=fmt_value)
        fh.write("\n")


def write_manifest(payload: dict, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=fmt_value)
        fh.write("\n")


_SVG_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def svg_line_plot(path, x, series, labels, target=None, title="",
                  xlabel="log10(delta)", ylabel=""):
    """One polyline per series over shared x; optional horizontal
    target line.  Fixed 640x420 canvas."""
    width, height = 640, 420
    ml, mr, mt, mb = 70, 20, 40, 50
    pw, ph = width - ml - mr, height - mt - mb
    xs = list(map(float, x))
    ys_all = [v for s in series for v in s]
    if target is not None:
        ys_all = ys_all + [target]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys_all), max(ys_all)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    pad = 0.06 * (y_hi - y_lo)
    y_lo -= pad
    y_hi += pad

    def px(v):
        return ml + pw * (v - x_lo) / (x_hi - x_lo)

    def py(v):
        return mt + ph * (1.0 - (v - y_lo) / (y_hi - y_lo))

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
           f'height="{height}" viewBox="0 0 {width} {height}">',
           '<rect width="100%" height="100%" fill="white"/>',
           f'<text x="{width/2:.1f}" y="22" text-anchor="middle" '
           f'font-size="15" font-family="sans-serif">{title}</text>']
    # axes
    out.append(f'<line x1="{ml}" y1="{mt+ph}" x2="{ml+pw}" y2="{mt+ph}" '
               'stroke="black" stroke-width="1"/>')
    out.append(f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt+ph}" '
               'stroke="black" stroke-width="1"/>')
    for frac in (0.0, 0.5, 1.0):
        xv = x_lo + frac * (x_hi - x_lo)
        yv = y_lo + frac * (y_hi - y_lo)
        out.append(f'<text x="{px(xv):.1f}" y="{mt+ph+18}" '
                   f'text-anchor="middle" font-size="11" '
                   f'font-family="sans-serif">{xv:.3g}</text>')
        out.append(f'<text x="{ml-8}" y="{py(yv)+4:.1f}" text-anchor="end" '
                   f'font-size="11" font-family="sans-serif">{yv:.4g}</text>')
    out.append(f'<text x="{ml+pw/2:.1f}" y="{height-12}" '
               f'text-anchor="middle" font-size="12" '
               f'font-family="sans-serif">{xlabel}</text>')
    out.append(f'<text x="16" y="{mt+ph/2:.1f}" text-anchor="middle" '
               f'font-size="12" font-family="sans-serif" '
               f'transform="rotate(-90 16 {mt+ph/2:.1f})">{ylabel}</text>')
    if target is not None:
        out.append(f'<line x1="{ml}" y1="{py(target):.2f}" x2="{ml+pw}" '
                   f'y2="{py(target):.2f}" stroke="#888" '
                   'stroke-dasharray="6,4" stroke-width="1"/>')
    for i, (ys, label) in enumerate(zip(series, labels)):
        color = _SVG_COLORS[i % len(_SVG_COLORS)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(xs, ys))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                   'stroke-width="1.8"/>')
        for a, b in zip(xs, ys):
            out.append(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="3" '
                       f'fill="{color}"/>')
        out.append(f'<text x="{ml+pw-6}" y="{mt+16+14*i}" text-anchor="end" '
                   f'font-size="12" font-family="sans-serif" '
                   f'fill="{color}">{label}</text>')
    out.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")
