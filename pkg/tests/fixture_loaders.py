"""Loaders for the transcribed published-table fixtures under tests/fixtures.

The retention fixture keeps the tables' "<0.1" convention verbatim; loading
maps those cells to 0.0 retention with synthesized counts (total 10000), which
is exact for every printed percentage at one decimal place.
"""

import csv
from pathlib import Path

from fass.aggregate import ConditionSummary
from fass.invariance import RetentionReport

FIXTURES = Path(__file__).parent / "fixtures"

SYNTH_TOTAL = 10000


def load_retention_fixture(path=FIXTURES / "appendix_retention.csv"):
    reports = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            text = row["retention"]
            pct = 0.0 if text == "<0.1" else float(text)
            n_retained = round(pct * SYNTH_TOTAL / 100.0)
            reports.append(
                RetentionReport(
                    dataset=row["dataset"],
                    model=row["architecture"],
                    perturbation=row["perturbation"],
                    n_total=SYNTH_TOTAL,
                    n_retained=n_retained,
                )
            )
    return reports


def load_stability_fixture(path=FIXTURES / "appendix_stability.csv"):
    """Condition cells carrying only the composite mean (as published)."""
    cells = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            cells.append(
                ConditionSummary(
                    dataset=row["dataset"],
                    model=row["architecture"],
                    method=row["method"],
                    perturbation=row["perturbation"],
                    n_pairs=0,
                    mean={"composite": float(row["composite"])},
                    std={},
                    retention_pct=0.0 if row["dagger"] == "1" else 100.0,
                    dagger=row["dagger"] == "1",
                )
            )
    return cells
