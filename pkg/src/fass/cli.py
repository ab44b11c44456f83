"""Command-line pipeline: perturb -> filter -> score -> aggregate -> report.

Each stage reads only the declared artifacts of the previous one, so an
external inference step (producing attributions and prediction records)
can slot in between perturb and filter. Exit codes: 0 success, 1 partial
failures recorded, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import aggregate as agg
from . import invariance, perturb, report, tensor_io
from .metrics import MetricConfig, score_pair

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_USAGE = 2

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


def _fail_usage(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_USAGE


def cmd_perturb(args) -> int:
    in_dir = Path(args.in_dir)
    out_dir = Path(args.out_dir)
    if not in_dir.is_dir():
        return _fail_usage(f"input directory {in_dir} does not exist")
    files = sorted(p for p in in_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not files:
        return _fail_usage(f"no images (png/jpeg) found in {in_dir}")
    out_dir.mkdir(parents=True, exist_ok=True)

    magnitude = args.magnitude
    if magnitude is None:
        magnitude = perturb.DEFAULT_MAGNITUDES[args.kind]

    sidecar = {
        "kind": args.kind,
        "magnitude": magnitude,
        "master_seed": args.seed,
        "images": {},
    }
    errors = []
    for path in files:
        image_id = path.stem
        try:
            img = tensor_io.read_image(path)
            seed = None
            if args.kind == "noise":
                seed = perturb.per_image_seed(args.seed, image_id)
            spec = perturb.PerturbationSpec(kind=args.kind, magnitude=magnitude,
                                            seed=seed or 0)
            out_path = out_dir / f"{image_id}.png"
            tensor_io.write_image(perturb.apply(spec, img), out_path)
            entry = {"source": str(path), "output": out_path.name}
            if seed is not None:
                entry["seed"] = seed
            sidecar["images"][image_id] = entry
        except (tensor_io.ImageReadError, ValueError, OSError) as exc:
            errors.append((path.name, str(exc)))

    (out_dir / "perturbation.json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"perturbed {len(sidecar['images'])} image(s) -> {out_dir} ({args.kind})")
    if errors:
        for name, message in errors:
            print(f"error: {name}: {message}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_filter(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        records = tensor_io.read_predictions(args.predictions)
        cfg = invariance.FilterConfig(confidence_epsilon=args.epsilon)
        reports = invariance.retention_report(records, cfg)
        invariance.write_retained_json(records, out_dir / "retained.json", cfg)
        invariance.write_retention_csv(reports, out_dir / "retention.csv")
        invariance.write_retention_json(reports, out_dir / "retention.json")
    except (tensor_io.SchemaError, tensor_io.DuplicateRecord,
            invariance.MissingConfidence, ValueError, OSError) as exc:
        return _fail_usage(str(exc))
    n_retained = sum(r.n_retained for r in reports)
    n_total = sum(r.n_total for r in reports)
    print(f"retained {n_retained}/{n_total} pair(s) across {len(reports)} condition(s)")
    return EXIT_OK


def _score_one(entry, attr_root: Path, cfg: MetricConfig):
    a1 = tensor_io.read_ften(attr_root / entry.original_attr_path)
    a2 = tensor_io.read_ften(attr_root / entry.perturbed_attr_path)
    meta = agg.PairMeta(
        pair_id=entry.pair_id,
        dataset=entry.dataset,
        model=entry.model,
        method=entry.method,
        perturbation=entry.perturbation,
        image_id=entry.image_id,
    )
    return meta, score_pair(a1, a2, cfg)


def cmd_score(args) -> int:
    attr_root = Path(args.attr_root)
    try:
        manifest = tensor_io.read_manifest(args.manifest)
        retained = invariance.read_retained_json(args.retained)
    except (tensor_io.SchemaError, tensor_io.DuplicateRecord, OSError,
            json.JSONDecodeError, KeyError) as exc:
        return _fail_usage(str(exc))

    to_score, skipped = [], 0
    for entry in manifest:
        if (entry.dataset, entry.model, entry.perturbation, entry.image_id) in retained:
            to_score.append(entry)
        else:
            skipped += 1

    cfg = MetricConfig(k=args.k)
    workers = int(os.environ.get("FASS_THREADS", "1"))
    results, errors = [], []

    def run(entry):
        try:
            return entry, _score_one(entry, attr_root, cfg), None
        except Exception as exc:  # error recorded per pair, scoring continues
            return entry, None, f"{type(exc).__name__}: {exc}"

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run, to_score))
    else:
        outcomes = [run(entry) for entry in to_score]
    for entry, scored, error in outcomes:
        if error is None:
            results.append(scored)
        else:
            errors.append((entry.pair_id, error))

    agg.write_scores_csv(results, args.out)
    print(f"scored {len(results)} pair(s), skipped {skipped} not retained, "
          f"{len(errors)} error(s) -> {args.out}")
    if errors:
        for pair_id, message in errors:
            print(f"error: {pair_id}: {message}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_aggregate(args) -> int:
    try:
        scores = agg.read_scores_csv(args.scores)
        reports = invariance.read_retention_json(args.retention)
        conditions = agg.summarize(scores, reports)
        methods = frozenset(args.methods) if args.methods else agg.DEFAULT_ROLLUP_METHODS
        categories = agg.category_rollup(conditions, methods, args.category_weighting)
        by_pert = agg.retention_rollup(reports, "perturbation", args.retention_weighting)
        by_dataset = agg.retention_rollup(reports, "dataset", args.retention_weighting)
    except (agg.ScoreForExcludedPair, ValueError, OSError) as exc:
        return _fail_usage(str(exc))

    summary = {
        "meta": {
            "std": "population",
            "category_weighting": args.category_weighting,
            "retention_weighting": args.retention_weighting,
            "rollup_methods": sorted(methods),
        },
        "conditions": [
            {
                "dataset": c.dataset, "model": c.model, "method": c.method,
                "perturbation": c.perturbation, "n_pairs": c.n_pairs,
                "mean": c.mean, "std": c.std,
                "retention_pct": c.retention_pct, "dagger": c.dagger,
                "degenerate_count": c.degenerate_count,
            }
            for c in conditions
        ],
        "categories": [
            {
                "category": c.category, "methods": list(c.methods),
                "n_cells": c.n_cells, "mean": c.mean,
                "dagger_dominated": c.dagger_dominated,
            }
            for c in categories
        ],
        "retention_by_perturbation": [vars(r) for r in by_pert],
        "retention_by_dataset": [vars(r) for r in by_dataset],
        "retention_reports": [
            {
                "dataset": r.dataset, "model": r.model, "perturbation": r.perturbation,
                "n_total": r.n_total, "n_retained": r.n_retained,
                "retention_pct": r.retention_pct, "dagger": r.dagger,
            }
            for r in reports
        ],
    }
    Path(args.out).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                              encoding="utf-8")
    print(f"aggregated {len(conditions)} condition(s) -> {args.out}")
    return EXIT_OK


def cmd_report(args) -> int:
    out_dir = Path(args.out_dir)
    try:
        summary = json.loads(Path(args.summary).read_text(encoding="utf-8"))
        conditions = [
            agg.ConditionSummary(
                dataset=c["dataset"], model=c["model"], method=c["method"],
                perturbation=c["perturbation"], n_pairs=c["n_pairs"],
                mean=c["mean"], std=c["std"], retention_pct=c["retention_pct"],
                dagger=c["dagger"], degenerate_count=c["degenerate_count"],
            )
            for c in summary["conditions"]
        ]
        reports = [
            invariance.RetentionReport(
                dataset=r["dataset"], model=r["model"], perturbation=r["perturbation"],
                n_total=r["n_total"], n_retained=r["n_retained"],
            )
            for r in summary["retention_reports"]
        ]
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        return _fail_usage(f"cannot load summary: {exc}")

    out_dir.mkdir(parents=True, exist_ok=True)
    spec_csv = report.ReportSpec(format="csv")
    spec_json = report.ReportSpec(format="json")
    written = []

    combos = sorted({(c.dataset, c.method) for c in conditions})
    for dataset, method in combos:
        cells = [c for c in conditions if c.dataset == dataset and c.method == method]
        stem = f"{dataset}_{method}_{args.value}"
        if args.format in ("csv", "all"):
            written.append(report.emit_table(cells, out_dir / f"{stem}.csv",
                                             spec_csv, args.value))
        if args.format in ("json", "all"):
            written.append(report.emit_table(cells, out_dir / f"{stem}.json",
                                             spec_json, args.value))
        if args.format in ("heatmap-png", "all"):
            written.append(report.emit_heatmap(cells, out_dir / f"{stem}.png",
                                               spec_csv, args.value, args.cell_size))

    for dataset in sorted({r.dataset for r in reports}):
        cells = [r for r in reports if r.dataset == dataset]
        written.append(report.emit_retention_table(
            cells, out_dir / f"retention_{dataset}.csv", spec_csv))

    print(f"wrote {len(written)} report file(s) -> {out_dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fass",
        description="Attribution stability evaluation pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("perturb", help="apply one perturbation to a directory of images")
    p.add_argument("--in", dest="in_dir", required=True, help="input image directory")
    p.add_argument("--out", dest="out_dir", required=True, help="output directory")
    p.add_argument("--kind", required=True, choices=perturb.PERTURBATION_KINDS)
    p.add_argument("--seed", type=int, default=0, help="master seed (noise only)")
    p.add_argument("--magnitude", type=float, default=None,
                   help="override the default magnitude")
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("filter", help="prediction-invariance filtering")
    p.add_argument("--predictions", required=True, help="predictions JSON")
    p.add_argument("--epsilon", type=float, default=None,
                   help="optional confidence-shift threshold")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("score", help="score retained attribution pairs")
    p.add_argument("--manifest", required=True, help="pair manifest JSON")
    p.add_argument("--retained", required=True, help="retained.json from the filter stage")
    p.add_argument("--attr-root", required=True, help="root for manifest FTEN paths")
    p.add_argument("--k", type=int, default=100, help="top-k size for the overlap metric")
    p.add_argument("--out", required=True, help="scores CSV path")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("aggregate", help="summarize scores into condition/category tables")
    p.add_argument("--scores", required=True, help="scores CSV")
    p.add_argument("--retention", required=True, help="retention JSON from the filter stage")
    p.add_argument("--out", required=True, help="summary JSON path")
    p.add_argument("--category-weighting", default=agg.PAIR_WEIGHTED,
                   choices=agg.CATEGORY_WEIGHTINGS)
    p.add_argument("--retention-weighting", default=agg.PAIR_WEIGHTED,
                   choices=agg.RETENTION_WEIGHTINGS)
    p.add_argument("--methods", nargs="*", default=None,
                   help="methods included in category rollups")
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("report", help="emit tables and heatmaps from a summary")
    p.add_argument("--summary", required=True, help="summary JSON from the aggregate stage")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--format", default="all", choices=("csv", "json", "heatmap-png", "all"))
    p.add_argument("--value", default="composite",
                   choices=("ssim", "spearman_rescaled", "jaccard", "composite"))
    p.add_argument("--cell-size", type=int, default=224)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "perturb" and args.magnitude is not None and args.kind in (
            "translation", "jpeg"):
        args.magnitude = int(args.magnitude)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
