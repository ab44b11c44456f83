"""Table and heatmap emitters for condition summaries.

Tables are architecture x perturbation grids, one per (dataset, method),
as CSV or JSON. Values are rounded half-up (3 decimals for scores, 1 for
retention percentages); dagger-flagged cells carry the marker inline in
CSV and a boolean in JSON, and retention below 0.1% renders as "<0.1"
with the raw value preserved in JSON. Heatmaps are rendered directly with
Pillow so identical inputs produce byte-identical PNGs.
"""

from __future__ import annotations

import json
import csv
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

from PIL import Image, ImageDraw, ImageFont

from .aggregate import ConditionSummary
from .invariance import DAGGER_THRESHOLD_PCT, RetentionReport

PERTURBATION_ORDER = ("rotation", "translation", "brightness", "noise", "jpeg")

# 5-stop linear color ramp over [0, 1] (dark violet -> blue -> teal -> green
# -> yellow); values outside are clipped.
_RAMP = (
    (0.00, (68, 1, 84)),
    (0.25, (59, 82, 139)),
    (0.50, (33, 145, 140)),
    (0.75, (94, 201, 98)),
    (1.00, (253, 231, 37)),
)


@dataclass(frozen=True)
class ReportSpec:
    format: str = "csv"
    score_decimals: int = 3
    retention_decimals: int = 1
    dagger_marker: str = "†"

    def __post_init__(self):
        if self.format not in ("csv", "json", "heatmap-png"):
            raise ValueError(f"unknown report format {self.format!r}")
        if self.score_decimals < 0 or self.retention_decimals < 0:
            raise ValueError("rounding must be >= 0 decimal places")


def round_half_up(value: float, decimals: int) -> str:
    """Decimal string of ``value`` rounded half-up at ``decimals`` places.

    Rounding applies to the shortest decimal representation of the float,
    so 0.7217 renders as "0.722" rather than chasing binary residue.
    """
    quantum = Decimal(1).scaleb(-decimals)
    return str(Decimal(repr(float(value))).quantize(quantum, rounding=ROUND_HALF_UP))


def render_score(value: float, dagger: bool, spec: ReportSpec = ReportSpec()) -> str:
    rendered = round_half_up(value, spec.score_decimals)
    return rendered + (spec.dagger_marker if dagger else "")


def render_retention(value: float, spec: ReportSpec = ReportSpec()) -> str:
    if value < DAGGER_THRESHOLD_PCT:
        return "<0.1"
    return round_half_up(value, spec.retention_decimals)


def _grid(rows_in_order, columns):
    """Preserve first-appearance row order; fix columns to canonical order."""
    seen = []
    for name in rows_in_order:
        if name not in seen:
            seen.append(name)
    present = [c for c in PERTURBATION_ORDER if c in columns]
    present += sorted(c for c in columns if c not in PERTURBATION_ORDER)
    return seen, present


def emit_table(
    summaries: list[ConditionSummary],
    path,
    spec: ReportSpec = ReportSpec(),
    value: str = "composite",
) -> Path:
    """Write an architecture x perturbation grid of one score component.

    ``summaries`` should cover a single (dataset, method); gaps in the grid
    render as empty cells.
    """
    path = Path(path)
    cells = {(s.model, s.perturbation): s for s in summaries}
    rows, columns = _grid(
        (s.model for s in summaries), {s.perturbation for s in summaries}
    )

    if spec.format == "csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["architecture", *columns])
            for model in rows:
                line = [model]
                for column in columns:
                    cell = cells.get((model, column))
                    line.append("" if cell is None else render_score(
                        cell.mean[value], cell.dagger, spec))
                writer.writerow(line)
        return path

    if spec.format == "json":
        payload = {
            "value": value,
            "score_decimals": spec.score_decimals,
            "columns": columns,
            "rows": [
                {
                    "architecture": model,
                    "cells": {
                        column: _json_cell(cells.get((model, column)), value, spec)
                        for column in columns
                    },
                }
                for model in rows
            ],
        }
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path

    raise ValueError(f"emit_table cannot write format {spec.format!r}")


def _json_cell(cell: ConditionSummary | None, value: str, spec: ReportSpec):
    if cell is None:
        return None
    return {
        "raw": cell.mean[value],
        "rendered": round_half_up(cell.mean[value], spec.score_decimals),
        "dagger": cell.dagger,
        "n_pairs": cell.n_pairs,
    }


def emit_retention_table(
    reports: list[RetentionReport],
    path,
    spec: ReportSpec = ReportSpec(),
) -> Path:
    """Architecture x perturbation grid of retention percentages (CSV).

    Cells below the dagger threshold render as "<0.1", mirroring how the
    published tables mark near-zero retention.
    """
    path = Path(path)
    cells = {(r.model, r.perturbation): r for r in reports}
    rows, columns = _grid((r.model for r in reports), {r.perturbation for r in reports})
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["architecture", *columns])
        for model in rows:
            line = [model]
            for column in columns:
                cell = cells.get((model, column))
                line.append("" if cell is None else render_retention(cell.retention_pct, spec))
            writer.writerow(line)
    return path


def colormap(value: float) -> tuple[int, int, int]:
    """Linear color for a score in [0, 1]; endpoints map to the ramp ends."""
    v = min(max(float(value), 0.0), 1.0)
    for (lo, lo_rgb), (hi, hi_rgb) in zip(_RAMP, _RAMP[1:]):
        if v <= hi:
            t = (v - lo) / (hi - lo)
            return tuple(round(a + t * (b - a)) for a, b in zip(lo_rgb, hi_rgb))
    return _RAMP[-1][1]


def _text_color(rgb: tuple[int, int, int]) -> tuple[int, int, int]:
    luma = 0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2]
    return (0, 0, 0) if luma > 140 else (255, 255, 255)


def emit_heatmap(
    summaries: list[ConditionSummary],
    path,
    spec: ReportSpec = ReportSpec(),
    value: str = "composite",
    cell_size: int = 224,
) -> Path:
    """Render the grid as an annotated PNG heatmap with a [0, 1] legend.

    Output is deterministic: fixed fonts, fixed geometry, no metadata.
    """
    path = Path(path)
    cells = {(s.model, s.perturbation): s for s in summaries}
    rows, columns = _grid(
        (s.model for s in summaries), {s.perturbation for s in summaries}
    )

    label_w = cell_size
    header_h = cell_size // 3
    legend_w = cell_size // 2
    width = label_w + len(columns) * cell_size + legend_w
    height = header_h + len(rows) * cell_size

    img = Image.new("RGB", (width, height), (255, 255, 255))
    draw = ImageDraw.Draw(img)
    font = ImageFont.load_default(size=max(12, cell_size // 9))
    small = ImageFont.load_default(size=max(10, cell_size // 14))

    def centered(box, text, fnt, fill):
        x0, y0, x1, y1 = box
        bb = draw.textbbox((0, 0), text, font=fnt)
        tw, th = bb[2] - bb[0], bb[3] - bb[1]
        draw.text(((x0 + x1 - tw) / 2 - bb[0], (y0 + y1 - th) / 2 - bb[1]), text,
                  font=fnt, fill=fill)

    for j, column in enumerate(columns):
        box = (label_w + j * cell_size, 0, label_w + (j + 1) * cell_size, header_h)
        centered(box, column, font, (0, 0, 0))

    for i, model in enumerate(rows):
        y0 = header_h + i * cell_size
        centered((0, y0, label_w, y0 + cell_size), model, font, (0, 0, 0))
        for j, column in enumerate(columns):
            x0 = label_w + j * cell_size
            box = (x0, y0, x0 + cell_size, y0 + cell_size)
            cell = cells.get((model, column))
            if cell is None:
                draw.rectangle(box, fill=(230, 230, 230), outline=(0, 0, 0))
                continue
            rgb = colormap(cell.mean[value])
            draw.rectangle(box, fill=rgb, outline=(0, 0, 0))
            centered(box, render_score(cell.mean[value], cell.dagger, spec),
                     font, _text_color(rgb))

    # legend: vertical ramp, 1.0 at the top
    lx0 = label_w + len(columns) * cell_size + legend_w // 4
    lx1 = lx0 + legend_w // 4
    ly0, ly1 = header_h, height - cell_size // 4
    for y in range(ly0, ly1):
        t = 1.0 - (y - ly0) / max(1, ly1 - 1 - ly0)
        draw.line([(lx0, y), (lx1, y)], fill=colormap(t))
    draw.rectangle((lx0, ly0, lx1, ly1 - 1), outline=(0, 0, 0))
    for tick in (0.0, 0.5, 1.0):
        y = ly1 - 1 - tick * (ly1 - 1 - ly0)
        draw.text((lx1 + 4, y - 5), f"{tick:.1f}", font=small, fill=(0, 0, 0))

    img.save(path, format="PNG")
    return path
