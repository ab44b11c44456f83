"""The five deterministic image perturbations, plus channel normalization.

All perturbations operate on (3, H, W) float images in [0, 1] and return
images of the same shape and range. Every one is bit-deterministic given
(input, parameters, seed): rerunning a perturbation reproduces its output
exactly, which is what makes downstream stability scores reproducible.

Pinned conventions (the protocol fixes magnitudes but not every detail):

* rotation: counterclockwise positive, about the geometric center
  ((W-1)/2, (H-1)/2), bilinear interpolation, out-of-image samples are 0;
* translation: rightward, exposed left columns zero-filled;
* noise: numpy PCG64 generator, one float64 standard-normal draw per
  element in row-major (3, H, W) order;
* jpeg: baseline sequential libjpeg (via Pillow) with 4:2:0 chroma
  subsampling and the conventional 1-100 quality scale.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .tensor_io import check_image

ROTATION_DEGREES = 15.0
TRANSLATION_PIXELS = 20
BRIGHTNESS_FACTOR = 1.5
NOISE_SIGMA = 0.15
JPEG_QUALITY = 40

PERTURBATION_KINDS = ("rotation", "translation", "brightness", "noise", "jpeg")

DEFAULT_MAGNITUDES = {
    "rotation": ROTATION_DEGREES,
    "translation": TRANSLATION_PIXELS,
    "brightness": BRIGHTNESS_FACTOR,
    "noise": NOISE_SIGMA,
    "jpeg": JPEG_QUALITY,
}

# Canonical published ImageNet statistics; the protocol names the statistics
# but not the numbers, so they are configurable with this default.
IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


@dataclass(frozen=True)
class PerturbationSpec:
    """One perturbation kind with its magnitude and (for noise) seed."""

    kind: str
    magnitude: float | int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in PERTURBATION_KINDS:
            raise ValueError(f"unknown perturbation kind {self.kind!r}")
        if self.magnitude is None:
            object.__setattr__(self, "magnitude", DEFAULT_MAGNITUDES[self.kind])


@dataclass(frozen=True)
class ChannelStats:
    mean: tuple[float, float, float]
    std: tuple[float, float, float]

    def __post_init__(self):
        if len(self.mean) != 3 or len(self.std) != 3:
            raise ValueError("channel stats need exactly 3 entries")
        if any(s <= 0 for s in self.std):
            raise ValueError(f"std components must be strictly positive, got {self.std}")


IMAGENET_STATS = ChannelStats(mean=IMAGENET_MEAN, std=IMAGENET_STD)


def rotate(img: np.ndarray, degrees: float = ROTATION_DEGREES) -> np.ndarray:
    """Rotate counterclockwise about the image center, zero fill, no crop.

    Inverse-maps every output pixel to source coordinates and samples
    bilinearly; any of the four neighbors falling outside the image
    contributes 0, which is what leaves the exposed corners dark.
    """
    check_image(img)
    _, height, width = img.shape
    theta = np.deg2rad(degrees)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0

    ys, xs = np.mgrid[0:height, 0:width]
    dx = xs - cx
    dy = ys - cy
    src_x = cx + cos_t * dx - sin_t * dy
    src_y = cy + sin_t * dx + cos_t * dy

    x0 = np.floor(src_x).astype(np.int64)
    y0 = np.floor(src_y).astype(np.int64)
    fx = src_x - x0
    fy = src_y - y0

    out = np.empty_like(img)

    def sample(channel: np.ndarray, xi: np.ndarray, yi: np.ndarray) -> np.ndarray:
        inside = (xi >= 0) & (xi < width) & (yi >= 0) & (yi < height)
        values = np.zeros(xi.shape, dtype=img.dtype)
        values[inside] = channel[yi[inside], xi[inside]]
        return values

    for c in range(3):
        v00 = sample(img[c], x0, y0)
        v01 = sample(img[c], x0 + 1, y0)
        v10 = sample(img[c], x0, y0 + 1)
        v11 = sample(img[c], x0 + 1, y0 + 1)
        # nested lerp keeps constant regions exact (weights never re-sum)
        top = v00 + fx * (v01 - v00)
        bottom = v10 + fx * (v11 - v10)
        out[c] = top + fy * (bottom - top)
    return np.clip(out, 0.0, 1.0)


def translate(img: np.ndarray, dx: int = TRANSLATION_PIXELS) -> np.ndarray:
    """Shift content right by ``dx`` pixels; exposed left columns become 0."""
    check_image(img)
    width = img.shape[2]
    if not 0 <= dx < width:
        raise ValueError(f"dx must be in [0, {width}), got {dx}")
    out = np.zeros_like(img)
    if dx == 0:
        out[:] = img
    else:
        out[:, :, dx:] = img[:, :, :-dx]
    return out


def brightness(img: np.ndarray, factor: float = BRIGHTNESS_FACTOR) -> np.ndarray:
    """Scale intensities by ``factor`` and clamp to [0, 1]."""
    check_image(img)
    if factor <= 0:
        raise ValueError(f"factor must be positive, got {factor}")
    return np.clip(img * factor, 0.0, 1.0)


def gaussian_noise(img: np.ndarray, sigma: float = NOISE_SIGMA, seed: int = 0) -> np.ndarray:
    """Add zero-mean Gaussian noise with stddev ``sigma``, clamped to [0, 1].

    Noise comes from ``numpy.random.Generator(PCG64(seed))`` as a single
    float64 standard-normal draw shaped like the image, so identical
    (img, sigma, seed) always yields a bit-identical result.
    """
    check_image(img)
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    rng = np.random.Generator(np.random.PCG64(seed))
    noise = rng.standard_normal(img.shape)
    return np.clip(img + sigma * noise, 0.0, 1.0)


def jpeg_roundtrip(img: np.ndarray, quality: int = JPEG_QUALITY) -> np.ndarray:
    """Quantize to 8-bit, JPEG encode/decode at ``quality``, map back to [0, 1].

    Encoding is baseline sequential with 4:2:0 subsampling; quantization to
    8-bit is half-up (floor(v*255 + 0.5)). Identical input yields a
    byte-identical encoded stream.
    """
    encoded = jpeg_encode(img, quality)
    with Image.open(io.BytesIO(encoded)) as decoded:
        data = np.asarray(decoded.convert("RGB"), dtype=np.uint8)
    return np.transpose(data.astype(np.float64) / 255.0, (2, 0, 1))


def jpeg_encode(img: np.ndarray, quality: int = JPEG_QUALITY) -> bytes:
    """Return the baseline JPEG stream for ``img`` (the audit artifact)."""
    check_image(img)
    if not 1 <= quality <= 100:
        raise ValueError(f"quality must be in [1, 100], got {quality}")
    quantized = np.floor(img * 255.0 + 0.5).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(np.transpose(quantized, (1, 2, 0)), mode="RGB").save(
        buf, format="JPEG", quality=quality, subsampling=2
    )
    return buf.getvalue()


def normalize_channels(img: np.ndarray, stats: ChannelStats = IMAGENET_STATS) -> np.ndarray:
    """Per-channel (v - mean) / std; the result is no longer range-bounded."""
    check_image(img)
    mean = np.asarray(stats.mean, dtype=np.float64).reshape(3, 1, 1)
    std = np.asarray(stats.std, dtype=np.float64).reshape(3, 1, 1)
    return (img - mean) / std


def denormalize_channels(tensor: np.ndarray, stats: ChannelStats = IMAGENET_STATS) -> np.ndarray:
    """Inverse of normalize_channels."""
    mean = np.asarray(stats.mean, dtype=np.float64).reshape(3, 1, 1)
    std = np.asarray(stats.std, dtype=np.float64).reshape(3, 1, 1)
    return tensor * std + mean


def per_image_seed(master_seed: int, image_id: str) -> int:
    """Stable per-image noise seed: FNV-1a over master seed bytes + image id.

    Ties each image's noise stream to its id rather than to processing
    order, so shuffled or partial runs still reproduce the same pixels.
    """
    data = struct.pack("<Q", master_seed & 0xFFFFFFFFFFFFFFFF) + image_id.encode("utf-8")
    acc = 0xCBF29CE484222325
    for byte in data:
        acc ^= byte
        acc = (acc * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return acc


def apply(spec: PerturbationSpec, img: np.ndarray) -> np.ndarray:
    """Apply one perturbation described by ``spec``."""
    if spec.kind == "rotation":
        return rotate(img, float(spec.magnitude))
    if spec.kind == "translation":
        return translate(img, int(spec.magnitude))
    if spec.kind == "brightness":
        return brightness(img, float(spec.magnitude))
    if spec.kind == "noise":
        return gaussian_noise(img, float(spec.magnitude), spec.seed)
    if spec.kind == "jpeg":
        return jpeg_roundtrip(img, int(spec.magnitude))
    raise ValueError(f"unknown perturbation kind {spec.kind!r}")
