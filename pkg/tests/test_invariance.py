"""Prediction-invariance filtering and retention reporting."""

import pytest

from fass.invariance import (
    FilterConfig,
    MissingConfidence,
    RetentionReport,
    filter_pairs,
    read_retained_json,
    read_retention_json,
    retention_report,
    write_retained_json,
    write_retention_json,
)
from fass.tensor_io import PredictionRecord

from .datagen import predictions_with_known_flips


def record(image_id, orig, pert, conf=None, perturbation="rotation", model="resnet50"):
    conf_o, conf_p = conf if conf else (None, None)
    return PredictionRecord(
        image_id=image_id, dataset="cifar10", model=model, perturbation=perturbation,
        class_original=orig, class_perturbed=pert,
        conf_original=conf_o, conf_perturbed=conf_p,
    )


def test_filter_basic_partition():
    records = [record(f"i{n}", a, b) for n, (a, b) in
               enumerate([(3, 3), (5, 1), (2, 2), (7, 7)])]
    retained, excluded = filter_pairs(records)
    assert retained == ["i0", "i2", "i3"]
    assert excluded == ["i1"]
    report = retention_report(records)[0]
    assert report.retention_pct == 75.0
    assert not report.dagger


def test_filter_all_flipped_gives_dagger():
    records = [record(f"i{n}", n, n + 1) for n in range(5)]
    retained, excluded = filter_pairs(records)
    assert retained == []
    assert len(excluded) == 5
    report = retention_report(records)[0]
    assert report.retention_pct == 0.0
    assert report.dagger


def test_epsilon_excludes_confidence_shift():
    rec = record("a", 3, 3, conf=(0.90, 0.80))
    cfg = FilterConfig(confidence_epsilon=0.05)
    retained, excluded = filter_pairs([rec], cfg)
    assert retained == [] and excluded == ["a"]
    # shift exactly at the threshold is kept (<=); dyadic values keep the
    # subtraction exact
    rec2 = record("b", 3, 3, conf=(0.75, 0.6875))
    assert filter_pairs([rec2], FilterConfig(confidence_epsilon=0.0625))[0] == ["b"]


def test_epsilon_without_confidences_raises():
    rec = record("a", 3, 3)
    with pytest.raises(MissingConfidence):
        filter_pairs([rec], FilterConfig(confidence_epsilon=0.05))


def test_epsilon_disabled_equivalent_to_one():
    records, _, _ = predictions_with_known_flips(n=200)
    disabled = filter_pairs(records, FilterConfig())
    eps_one = filter_pairs(records, FilterConfig(confidence_epsilon=1.0))
    assert disabled == eps_one


def test_filter_is_idempotent():
    records, _, _ = predictions_with_known_flips(n=200)
    retained_ids, _ = filter_pairs(records)
    retained_records = [r for r in records if r.image_id in set(retained_ids)]
    again, excluded = filter_pairs(retained_records)
    assert again == retained_ids
    assert excluded == []


def test_partition_covers_every_input():
    records, _, _ = predictions_with_known_flips(n=500)
    retained, excluded = filter_pairs(records)
    assert len(retained) + len(excluded) == len(records)
    assert set(retained) | set(excluded) == {r.image_id for r in records}
    assert set(retained) & set(excluded) == set()


def test_known_flip_fixture_exact_sets():
    records, expected_argmax, expected_eps = predictions_with_known_flips(n=1000)
    retained, _ = filter_pairs(records)
    assert retained == expected_argmax
    retained_eps, _ = filter_pairs(records, FilterConfig(confidence_epsilon=0.05))
    assert retained_eps == expected_eps


def test_retention_report_grouping():
    records = (
        [record(f"a{i}", 1, 1, perturbation="rotation") for i in range(3)]
        + [record("a3", 1, 2, perturbation="rotation")]
        + [record(f"b{i}", 1, 1, perturbation="noise") for i in range(2)]
    )
    reports = retention_report(records)
    assert [(r.perturbation, r.n_total, r.n_retained) for r in reports] == [
        ("noise", 2, 2), ("rotation", 4, 3)]


def test_retention_fixture_scale_percentage():
    # 372 retained of 1000 must report exactly 37.2%
    records = [record(f"i{n}", 1, 1 if n < 372 else 2) for n in range(1000)]
    report = retention_report(records)[0]
    assert report.retention_pct == pytest.approx(37.2)
    assert not report.dagger


def test_near_zero_retention_dagger_threshold():
    records = [record(f"i{n}", 1, 1 if n == 0 else 2) for n in range(2000)]
    report = retention_report(records)[0]
    assert report.retention_pct == 0.05
    assert report.dagger
    # exactly at 0.1% is NOT dagger (< comparison)
    records = [record(f"i{n}", 1, 1 if n == 0 else 2) for n in range(1000)]
    assert not retention_report(records)[0].dagger


def test_empty_records_warns_and_returns_nothing(caplog):
    with caplog.at_level("WARNING"):
        assert retention_report([]) == []
    assert "no prediction records" in caplog.text


def test_retained_and_retention_roundtrip(tmp_path):
    records, expected, _ = predictions_with_known_flips(n=100)
    write_retained_json(records, tmp_path / "retained.json")
    keys = read_retained_json(tmp_path / "retained.json")
    assert {k[3] for k in keys} == set(expected)

    reports = retention_report(records)
    write_retention_json(reports, tmp_path / "retention.json")
    assert read_retention_json(tmp_path / "retention.json") == reports


def test_filter_config_validation():
    with pytest.raises(ValueError):
        FilterConfig(confidence_epsilon=1.5)
    with pytest.raises(ValueError):
        FilterConfig(confidence_epsilon=-0.1)
