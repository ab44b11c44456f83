"""Grouping of per-pair scores into condition, category, and retention tables.

A condition is one (dataset, model, method, perturbation) cell of the
evaluation grid. Per-condition summaries carry the mean and population
standard deviation of every score component, the matching retention
percentage, and a dagger flag for near-zero-retention cells. Rollups over
perturbation categories (geometric / photometric / compression) and over
retention axes support two weightings, because per-cell and per-pair
averages genuinely differ when retention varies by orders of magnitude:

* cell-unweighted: every condition cell counts equally (rollup default);
* pair-weighted: cells weighted by their pair counts, matching means taken
  over per-image scores (the pipeline default for new experiments).

Retention rollups additionally offer nonzero-cells, which drops
zero-retention cells instead of averaging them in as zeros.

All reductions sort by pair id (or cell key) first, so results never depend
on the order scores arrive in.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .invariance import RetentionReport
from .metrics import StabilityScore

logger = logging.getLogger(__name__)

COMPONENTS = ("ssim", "spearman_rescaled", "jaccard", "composite")

CATEGORIES = {
    "geometric": ("rotation", "translation"),
    "photometric": ("brightness", "noise"),
    "compression": ("jpeg",),
}

# LIME is excluded from category rollups by default: its sampling variance
# is a method property, not a perturbation property.
DEFAULT_ROLLUP_METHODS = frozenset({"ig", "gradshap", "gradcam"})

CELL_UNWEIGHTED = "cell-unweighted"
PAIR_WEIGHTED = "pair-weighted"
ALL_CELLS = "all-cells"
NONZERO_CELLS = "nonzero-cells"

CATEGORY_WEIGHTINGS = (CELL_UNWEIGHTED, PAIR_WEIGHTED)
RETENTION_WEIGHTINGS = (ALL_CELLS, NONZERO_CELLS, PAIR_WEIGHTED)


class ScoreForExcludedPair(RuntimeError):
    """A condition holds scores for more pairs than the filter retained."""


@dataclass(frozen=True)
class PairMeta:
    """Identity of one scored pair (the non-numeric half of a scores row)."""

    pair_id: str
    dataset: str
    model: str
    method: str
    perturbation: str
    image_id: str

    @property
    def condition(self) -> tuple[str, str, str, str]:
        return (self.dataset, self.model, self.method, self.perturbation)


@dataclass(frozen=True)
class ConditionSummary:
    dataset: str
    model: str
    method: str
    perturbation: str
    n_pairs: int
    mean: dict[str, float]
    std: dict[str, float]
    retention_pct: float
    dagger: bool
    degenerate_count: int = 0

    @property
    def key(self) -> tuple[str, str, str, str]:
        return (self.dataset, self.model, self.method, self.perturbation)


@dataclass(frozen=True)
class CategorySummary:
    category: str
    methods: tuple[str, ...]
    n_cells: int
    mean: dict[str, float]
    dagger_dominated: bool


@dataclass(frozen=True)
class RetentionRollup:
    axis: str
    value: str
    n_cells: int
    mean: float
    std: float
    min: float
    max: float


def summarize(
    scores: list[tuple[PairMeta, StabilityScore]],
    retention: list[RetentionReport],
) -> list[ConditionSummary]:
    """Reduce per-pair scores to per-condition means and population stds.

    Every condition must match a retention report on (dataset, model,
    perturbation), and its pair count must equal that report's retained
    count: a surplus means something scored an excluded pair, a deficit
    means retained pairs went unscored. Both are pipeline faults, not data.
    """
    by_report = {r.key: r for r in retention}
    groups: dict[tuple[str, str, str, str], list[tuple[PairMeta, StabilityScore]]] = {}
    for meta, score in scores:
        groups.setdefault(meta.condition, []).append((meta, score))

    summaries = []
    for condition in sorted(groups):
        members = sorted(groups[condition], key=lambda pair: pair[0].pair_id)
        dataset, model, method, perturbation = condition
        report = by_report.get((dataset, model, perturbation))
        if report is None:
            raise ScoreForExcludedPair(
                f"no retention report for condition {condition}: scores cannot be "
                "reconciled against the filter stage"
            )
        if len(members) > report.n_retained:
            raise ScoreForExcludedPair(
                f"{condition}: {len(members)} scored pairs but only "
                f"{report.n_retained} retained"
            )
        if len(members) < report.n_retained:
            raise ValueError(
                f"{condition}: {report.n_retained} retained pairs but only "
                f"{len(members)} scored"
            )
        mean, std = {}, {}
        for component in COMPONENTS:
            values = np.array([getattr(s, component) for _, s in members], dtype=np.float64)
            mean[component] = float(values.mean())
            std[component] = float(values.std())
        summaries.append(
            ConditionSummary(
                dataset=dataset,
                model=model,
                method=method,
                perturbation=perturbation,
                n_pairs=len(members),
                mean=mean,
                std=std,
                retention_pct=report.retention_pct,
                dagger=report.dagger,
                degenerate_count=sum(1 for _, s in members if s.degenerate),
            )
        )
    return summaries


def category_rollup(
    cells: list[ConditionSummary],
    methods: frozenset[str] | set[str] = DEFAULT_ROLLUP_METHODS,
    weighting: str = CELL_UNWEIGHTED,
) -> list[CategorySummary]:
    """Average condition cells within each perturbation category.

    Cells whose method is outside ``methods`` are ignored. A component's
    category mean covers the cells that carry that component (fixture cells
    transcribed from published tables may carry the composite only). Empty
    categories are omitted with a warning; a category whose every cell is
    dagger-flagged is emitted with dagger_dominated set.
    """
    if weighting not in CATEGORY_WEIGHTINGS:
        raise ValueError(f"weighting must be one of {CATEGORY_WEIGHTINGS}, got {weighting!r}")
    rollups = []
    for category, kinds in CATEGORIES.items():
        members = sorted(
            (c for c in cells if c.method in methods and c.perturbation in kinds),
            key=lambda c: c.key,
        )
        if not members:
            logger.warning("category %s has no cells; omitted", category)
            continue
        mean = {}
        for component in COMPONENTS:
            values = [c.mean[component] for c in members if component in c.mean]
            if not values:
                continue
            if weighting == PAIR_WEIGHTED:
                weights = [c.n_pairs for c in members if component in c.mean]
                mean[component] = float(np.average(values, weights=weights))
            else:
                mean[component] = float(np.mean(values))
        rollups.append(
            CategorySummary(
                category=category,
                methods=tuple(sorted(methods)),
                n_cells=len(members),
                mean=mean,
                dagger_dominated=all(c.dagger for c in members),
            )
        )
    return rollups


def retention_rollup(
    reports: list[RetentionReport],
    axis: str,
    weighting: str = ALL_CELLS,
) -> list[RetentionRollup]:
    """Mean / std / range of retention percentages along one axis.

    axis is "perturbation" or "dataset". all-cells averages every cell,
    nonzero-cells drops cells with zero retention, pair-weighted weights
    each cell by its total pair count (equivalent to pooling the raw
    retained/total counts).
    """
    if axis not in ("perturbation", "dataset"):
        raise ValueError(f"axis must be 'perturbation' or 'dataset', got {axis!r}")
    if weighting not in RETENTION_WEIGHTINGS:
        raise ValueError(f"weighting must be one of {RETENTION_WEIGHTINGS}, got {weighting!r}")
    if not reports:
        raise ValueError("no retention reports to roll up")

    groups: dict[str, list[RetentionReport]] = {}
    for report in reports:
        groups.setdefault(getattr(report, axis), []).append(report)

    rollups = []
    for value in sorted(groups):
        members = groups[value]
        if weighting == NONZERO_CELLS:
            members = [r for r in members if r.retention_pct > 0.0]
            if not members:
                logger.warning("%s=%s has no nonzero cells; omitted", axis, value)
                continue
        pcts = np.array([r.retention_pct for r in members], dtype=np.float64)
        if weighting == PAIR_WEIGHTED:
            weights = np.array([r.n_total for r in members], dtype=np.float64)
            mean = float(np.average(pcts, weights=weights))
            std = float(np.sqrt(np.average((pcts - mean) ** 2, weights=weights)))
        else:
            mean = float(pcts.mean())
            std = float(pcts.std())
        rollups.append(
            RetentionRollup(
                axis=axis,
                value=value,
                n_cells=len(members),
                mean=mean,
                std=std,
                min=float(pcts.min()),
                max=float(pcts.max()),
            )
        )
    return rollups


# --- scores CSV --------------------------------------------------------------

SCORES_HEADER = [
    "pair_id", "dataset", "model", "method", "perturbation", "image_id",
    "ssim", "spearman_raw", "spearman_rescaled", "jaccard", "composite", "flags",
]

# Fixed-width decimal keeps rows byte-stable across equivalent computations
# of the same score (pooled vs reference SSIM agree to ~1e-12).
SCORE_DECIMALS = 9


def format_score_value(value: float) -> str:
    return f"{value:.{SCORE_DECIMALS}f}"


def scores_row(meta: PairMeta, score: StabilityScore) -> list[str]:
    return [
        meta.pair_id, meta.dataset, meta.model, meta.method, meta.perturbation, meta.image_id,
        format_score_value(score.ssim),
        format_score_value(score.spearman_raw),
        format_score_value(score.spearman_rescaled),
        format_score_value(score.jaccard),
        format_score_value(score.composite),
        ";".join(sorted(score.degenerate_flags)),
    ]


def write_scores_csv(scores: list[tuple[PairMeta, StabilityScore]], path) -> None:
    """Write one row per scored pair, sorted by pair_id."""
    rows = sorted(scores, key=lambda pair: pair[0].pair_id)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SCORES_HEADER)
        for meta, score in rows:
            writer.writerow(scores_row(meta, score))


def read_scores_csv(path) -> list[tuple[PairMeta, StabilityScore]]:
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != SCORES_HEADER:
            raise ValueError(f"unexpected scores header {reader.fieldnames}")
        out = []
        for row in reader:
            meta = PairMeta(
                pair_id=row["pair_id"],
                dataset=row["dataset"],
                model=row["model"],
                method=row["method"],
                perturbation=row["perturbation"],
                image_id=row["image_id"],
            )
            flags = frozenset(f for f in row["flags"].split(";") if f)
            score = StabilityScore(
                ssim=float(row["ssim"]),
                spearman_raw=float(row["spearman_raw"]),
                spearman_rescaled=float(row["spearman_rescaled"]),
                jaccard=float(row["jaccard"]),
                composite=float(row["composite"]),
                degenerate_flags=flags,
            )
            out.append((meta, score))
    return out
