"""Prediction-invariance filtering and retention diagnostics.

A pair is retained when the model's top-1 class is unchanged by the
perturbation; an optional confidence-shift threshold epsilon additionally
excludes pairs whose top-1 confidence moved by more than epsilon (disabled
by default, matching the argmax-only protocol). Stability is only ever
measured on retained pairs, and retention percentages are reported next to
every stability score so low-retention conditions cannot masquerade as
well-supported ones. Conditions retaining less than 0.1% of pairs carry a
dagger flag.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .tensor_io import PredictionRecord

logger = logging.getLogger(__name__)

# retention below this percentage marks a condition as dagger-flagged
DAGGER_THRESHOLD_PCT = 0.1


class MissingConfidence(ValueError):
    pass


@dataclass(frozen=True)
class FilterConfig:
    confidence_epsilon: float | None = None

    def __post_init__(self):
        eps = self.confidence_epsilon
        if eps is not None and not 0.0 <= eps <= 1.0:
            raise ValueError(f"confidence_epsilon must be in [0, 1], got {eps}")


@dataclass(frozen=True)
class RetentionReport:
    dataset: str
    model: str
    perturbation: str
    n_total: int
    n_retained: int

    @property
    def retention_pct(self) -> float:
        return 100.0 * self.n_retained / self.n_total

    @property
    def dagger(self) -> bool:
        return self.retention_pct < DAGGER_THRESHOLD_PCT

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.dataset, self.model, self.perturbation)


def is_retained(record: PredictionRecord, cfg: FilterConfig = FilterConfig()) -> bool:
    if record.class_original != record.class_perturbed:
        return False
    if cfg.confidence_epsilon is None:
        return True
    if record.conf_original is None or record.conf_perturbed is None:
        raise MissingConfidence(
            f"epsilon filtering requires confidences, missing for {record.key}"
        )
    return abs(record.conf_original - record.conf_perturbed) <= cfg.confidence_epsilon


def filter_pairs(
    records: list[PredictionRecord], cfg: FilterConfig = FilterConfig()
) -> tuple[list[str], list[str]]:
    """Partition records into (retained, excluded) image-id lists, input order."""
    retained, excluded = [], []
    for record in records:
        (retained if is_retained(record, cfg) else excluded).append(record.image_id)
    return retained, excluded


def retained_records(
    records: list[PredictionRecord], cfg: FilterConfig = FilterConfig()
) -> list[PredictionRecord]:
    return [r for r in records if is_retained(r, cfg)]


def retention_report(
    records: list[PredictionRecord], cfg: FilterConfig = FilterConfig()
) -> list[RetentionReport]:
    """One report per (dataset, model, perturbation) group, key-sorted.

    Percentages are kept at full float precision here; rounding is the
    report emitters' concern.
    """
    if not records:
        logger.warning("no prediction records: emitting no retention reports")
        return []
    groups: dict[tuple[str, str, str], list[PredictionRecord]] = {}
    for record in records:
        groups.setdefault((record.dataset, record.model, record.perturbation), []).append(record)
    reports = []
    for key in sorted(groups):
        members = groups[key]
        n_retained = sum(1 for r in members if is_retained(r, cfg))
        reports.append(
            RetentionReport(
                dataset=key[0],
                model=key[1],
                perturbation=key[2],
                n_total=len(members),
                n_retained=n_retained,
            )
        )
    return reports


# --- on-disk forms -----------------------------------------------------------

def write_retained_json(records: list[PredictionRecord], path, cfg=FilterConfig()) -> None:
    """Retained pairs as a JSON array of group-qualified ids (sorted)."""
    entries = [
        {
            "image_id": r.image_id,
            "dataset": r.dataset,
            "model": r.model,
            "perturbation": r.perturbation,
        }
        for r in retained_records(records, cfg)
    ]
    entries.sort(key=lambda e: (e["dataset"], e["model"], e["perturbation"], e["image_id"]))
    Path(path).write_text(json.dumps(entries, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_retained_json(path) -> set[tuple[str, str, str, str]]:
    """Retained keys as (dataset, model, perturbation, image_id) tuples."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return {
        (e["dataset"], e["model"], e["perturbation"], e["image_id"]) for e in data
    }


def write_retention_json(reports: list[RetentionReport], path) -> None:
    payload = [
        {
            "dataset": r.dataset,
            "model": r.model,
            "perturbation": r.perturbation,
            "n_total": r.n_total,
            "n_retained": r.n_retained,
            "retention_pct": r.retention_pct,
            "dagger": r.dagger,
        }
        for r in reports
    ]
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_retention_json(path) -> list[RetentionReport]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return [
        RetentionReport(
            dataset=e["dataset"],
            model=e["model"],
            perturbation=e["perturbation"],
            n_total=e["n_total"],
            n_retained=e["n_retained"],
        )
        for e in data
    ]


def write_retention_csv(reports: list[RetentionReport], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["dataset", "model", "perturbation", "n_total", "n_retained", "retention_pct", "dagger"]
        )
        for r in reports:
            writer.writerow(
                [r.dataset, r.model, r.perturbation, r.n_total, r.n_retained,
                 repr(r.retention_pct), int(r.dagger)]
            )
