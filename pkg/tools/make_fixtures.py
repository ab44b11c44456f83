#!/usr/bin/env python3
"""Regenerate every checked-in test fixture.

Run from the repository root:

    python tools/make_fixtures.py

Outputs (all under tests/fixtures/):

* appendix_retention.csv / appendix_stability.csv - transcriptions of the
  published per-condition retention and composite-stability tables;
* photo.png - deterministic photo-like scene for the JPEG quality test,
  plus photo_q40.jpg, the pinned golden encode at quality 40;
* e2e/ - the 50-pair synthetic pipeline fixture: input images, attribution
  FTEN pairs, manifest, predictions, and oracle_scores.csv computed with
  the brute-force reference metrics (tests/oracles.py), never with the
  library's pooled/vectorized paths;
* golden_heatmap.png - pinned render of a 4x5 fixture grid.

Generation asserts that reference and library scores agree to every
emitted digit, so a rounding-boundary collision would fail loudly here
rather than flake in CI later.
"""

import csv
import json
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT))

from fass import aggregate as agg  # noqa: E402
from fass import metrics, perturb, report, tensor_io  # noqa: E402
from tests import oracles  # noqa: E402

FIX = ROOT / "tests" / "fixtures"

DATASETS = ("cifar10", "imagenet", "coco")
ARCHES = ("resnet50", "densenet121", "convnext_tiny", "vit_b16")
PERTS = ("rotation", "translation", "brightness", "noise", "jpeg")

# --- published tables, transcribed ------------------------------------------------
# retention (%) per dataset/architecture, columns in PERTS order
RETENTION = {
    "cifar10": {
        "resnet50": ("37.2", "0.6", "9.0", "26.9", "<0.1"),
        "densenet121": ("20.8", "<0.1", "<0.1", "12.1", "<0.1"),
        "convnext_tiny": ("45.3", "<0.1", "<0.1", "11.6", "<0.1"),
        "vit_b16": ("36.1", "<0.1", "<0.1", "29.2", "<0.1"),
    },
    "imagenet": {
        "resnet50": ("58.8", "<0.1", "<0.1", "70.1", "<0.1"),
        "densenet121": ("58.4", "<0.1", "<0.1", "70.5", "<0.1"),
        "convnext_tiny": ("68.3", "<0.1", "<0.1", "71.3", "<0.1"),
        "vit_b16": ("35.7", "<0.1", "<0.1", "73.0", "<0.1"),
    },
    "coco": {
        "resnet50": ("88.1", "<0.1", "<0.1", "74.3", "11.7"),
        "densenet121": ("51.7", "<0.1", "<0.1", "90.6", "<0.1"),
        "convnext_tiny": ("46.1", "<0.1", "<0.1", "62.8", "<0.1"),
        "vit_b16": ("45.4", "<0.1", "<0.1", "76.7", "0.3"),
    },
}

# composite stability per dataset/method/architecture, columns in PERTS order
STABILITY = {
    "cifar10": {
        "ig": {
            "resnet50": (0.422, 0.560, 0.470, 0.381, 0.528),
            "densenet121": (0.446, 0.532, 0.511, 0.380, 0.599),
            "convnext_tiny": (0.456, 0.581, 0.607, 0.439, 0.652),
            "vit_b16": (0.440, 0.542, 0.569, 0.470, 0.650),
        },
        "gradshap": {
            "resnet50": (0.423, 0.501, 0.425, 0.393, 0.468),
            "densenet121": (0.445, 0.491, 0.479, 0.384, 0.520),
            "convnext_tiny": (0.457, 0.536, 0.563, 0.441, 0.583),
            "vit_b16": (0.442, 0.517, 0.523, 0.463, 0.588),
        },
        "gradcam": {
            "resnet50": (0.450, 0.529, 0.643, 0.449, 0.703),
            "densenet121": (0.535, 0.523, 0.735, 0.553, 0.760),
            "convnext_tiny": (0.548, 0.834, 0.796, 0.645, 0.774),
            "vit_b16": (0.539, 0.667, 0.744, 0.598, 0.722),
        },
        "lime": {
            "resnet50": (0.282, 0.346, 0.346, 0.284, 0.350),
            "densenet121": (0.279, 0.339, 0.338, 0.273, 0.344),
            "convnext_tiny": (0.295, 0.362, 0.356, 0.288, 0.364),
            "vit_b16": (0.280, 0.368, 0.357, 0.287, 0.437),
        },
    },
    "imagenet": {
        "ig": {
            "resnet50": (0.471, 0.418, 0.502, 0.642, 0.541),
            "densenet121": (0.466, 0.409, 0.498, 0.642, 0.538),
            "convnext_tiny": (0.483, 0.432, 0.521, 0.613, 0.562),
            "vit_b16": (0.497, 0.448, 0.553, 0.768, 0.589),
        },
        "gradshap": {
            "resnet50": (0.470, 0.421, 0.472, 0.572, 0.492),
            "densenet121": (0.465, 0.412, 0.468, 0.572, 0.487),
            "convnext_tiny": (0.484, 0.438, 0.501, 0.568, 0.519),
            "vit_b16": (0.490, 0.443, 0.512, 0.626, 0.531),
        },
        "gradcam": {
            "resnet50": (0.726, 0.671, 0.821, 0.877, 0.853),
            "densenet121": (0.761, 0.703, 0.873, 0.915, 0.889),
            "convnext_tiny": (0.779, 0.724, 0.869, 0.897, 0.878),
            "vit_b16": (0.762, 0.712, 0.842, 0.822, 0.852),
        },
        "lime": {
            "resnet50": (0.410, 0.340, 0.390, 0.470, 0.430),
            "densenet121": (0.370, 0.360, 0.410, 0.490, 0.450),
            "convnext_tiny": (0.390, 0.350, 0.430, 0.470, 0.440),
            "vit_b16": (0.400, 0.380, 0.440, 0.570, 0.460),
        },
    },
    "coco": {
        "ig": {
            "resnet50": (0.446, 0.358, 0.472, 0.606, 0.405),
            "densenet121": (0.440, 0.340, 0.516, 0.585, 0.377),
            "convnext_tiny": (0.474, 0.390, 0.548, 0.597, 0.416),
            "vit_b16": (0.481, 0.405, 0.558, 0.755, 0.529),
        },
        "gradshap": {
            "resnet50": (0.445, 0.364, 0.425, 0.533, 0.391),
            "densenet121": (0.437, 0.339, 0.442, 0.519, 0.367),
            "convnext_tiny": (0.475, 0.393, 0.506, 0.568, 0.411),
            "vit_b16": (0.481, 0.404, 0.515, 0.647, 0.494),
        },
        "gradcam": {
            "resnet50": (0.645, 0.609, 0.676, 0.825, 0.662),
            "densenet121": (0.661, 0.595, 0.824, 0.829, 0.707),
            "convnext_tiny": (0.692, 0.545, 0.806, 0.838, 0.582),
            "vit_b16": (0.752, 0.716, 0.637, 0.849, 0.658),
        },
        "lime": {
            "resnet50": (0.427, 0.489, 0.529, 0.415, 0.512),
            "densenet121": (0.427, 0.466, 0.526, 0.432, 0.495),
            "convnext_tiny": (0.448, 0.492, 0.556, 0.422, 0.476),
            "vit_b16": (0.429, 0.445, 0.517, 0.413, 0.489),
        },
    },
}


def cell_dagger(dataset: str, arch: str, pert: str) -> bool:
    # dagger iff the matching retention cell prints "<0.1"
    return RETENTION[dataset][arch][PERTS.index(pert)] == "<0.1"


def write_table_fixtures():
    FIX.mkdir(parents=True, exist_ok=True)
    with open(FIX / "appendix_retention.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["dataset", "architecture", "perturbation", "retention"])
        for dataset in DATASETS:
            for arch in ARCHES:
                for pert, value in zip(PERTS, RETENTION[dataset][arch]):
                    writer.writerow([dataset, arch, pert, value])

    with open(FIX / "appendix_stability.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["dataset", "method", "architecture", "perturbation",
                         "composite", "dagger"])
        for dataset in DATASETS:
            for method in ("ig", "gradshap", "gradcam", "lime"):
                for arch in ARCHES:
                    for pert, value in zip(PERTS, STABILITY[dataset][method][arch]):
                        writer.writerow([dataset, method, arch, pert, f"{value:.3f}",
                                         int(cell_dagger(dataset, arch, pert))])
    print("wrote appendix_retention.csv, appendix_stability.csv")


# --- photo-like JPEG fixture --------------------------------------------------------

def make_photo(height=240, width=320):
    """Deterministic scene with smooth gradients, edges, and mild texture."""
    rng = np.random.default_rng(90210)
    y = np.linspace(0.0, 1.0, height)[:, None]
    x = np.linspace(0.0, 1.0, width)[None, :]

    sky_r = 0.45 + 0.35 * (1 - y)
    sky_g = 0.55 + 0.25 * (1 - y)
    sky_b = 0.75 + 0.20 * (1 - y)
    img = np.stack([sky_r + 0 * x, sky_g + 0 * x, sky_b + 0 * x])

    # sun disk
    cy, cx = 0.28, 0.72
    disk = ((y - cy) ** 2 + (x - cx) ** 2) < 0.006
    img[0][disk] = 0.98
    img[1][disk] = 0.90
    img[2][disk] = 0.55

    # rolling hills: dark green below a sinusoidal horizon
    horizon = 0.55 + 0.08 * np.sin(6.0 * np.pi * x) + 0.04 * np.sin(17.0 * x * np.pi)
    ground = y > horizon
    img[0][ground] = 0.20
    img[1][ground] = 0.38 + 0.12 * (y + 0 * x)[ground]
    img[2][ground] = 0.18

    # mild film-grain texture, smoothed to keep it photo-plausible
    grain = rng.normal(scale=1.0, size=(height + 8, width + 8))
    kernel = np.ones(9) / 9.0
    grain = np.apply_along_axis(lambda r: np.convolve(r, kernel, mode="valid"), 1, grain)
    grain = np.apply_along_axis(lambda c: np.convolve(c, kernel, mode="valid"), 0, grain)
    img += 0.035 * grain[np.newaxis, :, :]

    return np.clip(img, 0.0, 1.0)


def write_photo_fixtures():
    photo = make_photo()
    tensor_io.write_image(photo, FIX / "photo.png")
    img = tensor_io.read_image(FIX / "photo.png")
    encoded = perturb.jpeg_encode(img, 40)
    (FIX / "photo_q40.jpg").write_bytes(encoded)
    quality = oracles.psnr(img, perturb.jpeg_roundtrip(img, 40))
    print(f"wrote photo.png + photo_q40.jpg (q40 PSNR {quality:.2f} dB)")
    assert quality >= 25.0, "fixture photo must satisfy the quality bound"


# --- 50-pair end-to-end fixture -------------------------------------------------------

E2E_MODELS = ("modelA", "modelB")
E2E_IMAGES = tuple(f"img{i:03d}" for i in range(5))
# attribution damage level per perturbation: drives score spread
E2E_LEVELS = {"rotation": 1.3, "translation": 0.9, "brightness": 0.35,
              "noise": 0.55, "jpeg": 0.22}
# (model, perturbation, image) triples whose prediction flips
E2E_FLIPS = {
    ("modelA", "rotation", "img002"),
    ("modelA", "translation", "img000"),
    ("modelA", "translation", "img004"),
    ("modelA", "brightness", "img001"),
    ("modelA", "jpeg", "img003"),
    ("modelB", "rotation", "img001"),
    ("modelB", "noise", "img000"),
    ("modelB", "noise", "img003"),
    ("modelB", "jpeg", "img002"),
    ("modelB", "jpeg", "img004"),
}


def make_e2e_image(index, height=48, width=64):
    ys = np.linspace(0, 2 * np.pi, height)[:, None]
    xs = np.linspace(0, 2 * np.pi, width)[None, :]
    img = np.stack([
        0.5 + 0.45 * np.sin((index + 1) * xs + ys),
        0.5 + 0.45 * np.cos((index + 2) * ys - xs),
        0.5 + 0.45 * np.sin((index + 1) * (xs + ys) / 2.0),
    ])
    return np.clip(img, 0.0, 1.0)


def reference_score(a1, a2, k=100):
    """Score one pair with the brute-force reference implementations only."""
    a1 = np.asarray(a1, dtype=np.float64)
    a2 = np.asarray(a2, dtype=np.float64)

    def norm(a):
        lo, hi = a.min(), a.max()
        return np.zeros_like(a) if hi == lo else (a - lo) / (hi - lo)

    flags = set()
    if a1.max() == a1.min():
        flags.add("constant_map_a")
    if a2.max() == a2.min():
        flags.add("constant_map_b")

    s = oracles.ssim_reference(norm(a1), norm(a2))
    if flags:
        rho, rescaled = 0.0, 0.5
    else:
        rho = oracles.spearman_reference(a1, a2)
        rescaled = (rho + 1.0) / 2.0
    j = oracles.jaccard_reference(a1, a2, k)
    return metrics.StabilityScore(
        ssim=s, spearman_raw=rho, spearman_rescaled=rescaled, jaccard=j,
        composite=(s + rescaled + j) / 3.0, degenerate_flags=frozenset(flags),
    )


def write_e2e_fixture():
    e2e = FIX / "e2e"
    (e2e / "images").mkdir(parents=True, exist_ok=True)
    (e2e / "attrs").mkdir(parents=True, exist_ok=True)

    for i, image_id in enumerate(E2E_IMAGES):
        tensor_io.write_image(make_e2e_image(i), e2e / "images" / f"{image_id}.png")

    rng = np.random.default_rng(777)
    manifest, predictions, scored = [], [], []
    for model in E2E_MODELS:
        for pert in PERTS:
            for image_id in E2E_IMAGES:
                pair_id = f"{model}-{pert}-{image_id}"
                base = rng.normal(size=(3, 16, 16))
                if pair_id == "modelA-rotation-img000":
                    base = np.full((3, 16, 16), 0.25)  # degenerate original
                if pair_id == "modelB-brightness-img002":
                    twin = base.copy()  # identical pair: perfect stability
                else:
                    twin = base + E2E_LEVELS[pert] * rng.normal(size=(3, 16, 16))
                orig = base.astype(np.float32)
                pert_map = twin.astype(np.float32)
                orig_path = f"attrs/{pair_id}.orig.ften"
                pert_path = f"attrs/{pair_id}.pert.ften"
                tensor_io.write_ften(orig, e2e / orig_path)
                tensor_io.write_ften(pert_map, e2e / pert_path)
                manifest.append(tensor_io.PairManifestEntry(
                    pair_id=pair_id, dataset="synth", model=model, method="ig",
                    perturbation=pert, image_id=image_id,
                    original_attr_path=orig_path, perturbed_attr_path=pert_path,
                ))
                flipped = (model, pert, image_id) in E2E_FLIPS
                cls = int(rng.integers(0, 10))
                predictions.append({
                    "image_id": image_id, "dataset": "synth", "model": model,
                    "perturbation": pert, "class_original": cls,
                    "class_perturbed": cls + 1 if flipped else cls,
                    "conf_original": round(float(rng.uniform(0.5, 0.99)), 4),
                    "conf_perturbed": round(float(rng.uniform(0.5, 0.99)), 4),
                })
                if not flipped:
                    meta = agg.PairMeta(
                        pair_id=pair_id, dataset="synth", model=model, method="ig",
                        perturbation=pert, image_id=image_id,
                    )
                    ref = reference_score(orig, pert_map)
                    lib = metrics.score_pair(orig, pert_map)
                    for name in ("ssim", "spearman_raw", "spearman_rescaled",
                                 "jaccard", "composite"):
                        fmt_ref = agg.format_score_value(getattr(ref, name))
                        fmt_lib = agg.format_score_value(getattr(lib, name))
                        assert fmt_ref == fmt_lib, (
                            f"{pair_id} {name}: reference {fmt_ref} != library {fmt_lib}"
                        )
                    assert ref.degenerate_flags == lib.degenerate_flags
                    scored.append((meta, ref))

    tensor_io.write_manifest(manifest, e2e / "manifest.json")
    (e2e / "predictions.json").write_text(
        json.dumps(predictions, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    agg.write_scores_csv(scored, e2e / "oracle_scores.csv")
    print(f"wrote e2e fixture: {len(manifest)} pairs, {len(scored)} retained oracle rows")


# --- golden heatmap --------------------------------------------------------------------

def write_golden_heatmap():
    from tests.fixture_loaders import load_stability_fixture

    cells = [c for c in load_stability_fixture()
             if c.dataset == "cifar10" and c.method == "ig"]
    assert len(cells) == 20
    report.emit_heatmap(cells, FIX / "golden_heatmap.png",
                        report.ReportSpec(format="csv"), "composite", cell_size=224)
    print("wrote golden_heatmap.png")


if __name__ == "__main__":
    write_table_fixtures()
    write_photo_fixtures()
    write_e2e_fixture()
    write_golden_heatmap()
