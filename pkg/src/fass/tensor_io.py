"""Tensor, image, and evaluation-record interchange.

Attribution tensors travel between pipeline stages as FTEN files, a
deliberately tiny binary format:

    bytes 0-3   magic  ``46 54 45 4E`` ("FTEN")
    byte  4     format version, currently ``01``
    byte  5     dtype code, ``01`` = float32 little-endian
    byte  6     number of dimensions
    then        one unsigned 32-bit LE integer per dimension
    then        payload, row-major float32 little-endian

Writes are byte-identical across runs and platforms for identical input,
so FTEN files can be diffed and checksummed. Reads validate the header
and reject non-finite payload values outright: a NaN that slips through
here would silently corrupt every downstream stability score.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

FTEN_MAGIC = b"FTEN"
FTEN_VERSION = 1
FTEN_DTYPE_FLOAT32 = 1

_HEADER = struct.Struct("<4sBBB")


class FtenError(Exception):
    """Base class for FTEN read failures; carries the offending byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class BadMagic(FtenError):
    pass


class UnsupportedVersion(FtenError):
    pass


class UnsupportedDtype(FtenError):
    pass


class TruncatedPayload(FtenError):
    pass


class NonFiniteValue(FtenError):
    pass


class ImageReadError(Exception):
    """Base class for image decoding failures."""


class UnsupportedFormat(ImageReadError):
    pass


class DecodeError(ImageReadError):
    pass


class SchemaError(ValueError):
    """A manifest or prediction record violates the JSON schema.

    ``path`` locates the fault in JSONPath-ish notation, e.g.
    ``$[3].class_perturbed``.
    """

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class DuplicateRecord(ValueError):
    pass


def write_ften(tensor: np.ndarray, path) -> None:
    """Write ``tensor`` to ``path`` in the FTEN format.

    The tensor must have at least one dimension, all dimensions positive,
    and contain only finite values; it is stored as row-major float32.
    """
    arr = np.asarray(tensor)
    if arr.ndim == 0 or any(d <= 0 for d in arr.shape):
        raise ValueError(f"tensor dims must be nonempty and positive, got {arr.shape}")
    arr = np.ascontiguousarray(arr, dtype=np.float32)
    if arr.ndim > 255:
        raise ValueError(f"too many dimensions for FTEN: {arr.ndim}")
    if not np.isfinite(arr).all():
        raise ValueError("refusing to write non-finite values")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(FTEN_MAGIC, FTEN_VERSION, FTEN_DTYPE_FLOAT32, arr.ndim))
        for dim in arr.shape:
            fh.write(struct.pack("<I", dim))
        fh.write(arr.astype("<f4", copy=False).tobytes())


def read_ften(path) -> np.ndarray:
    """Read an FTEN file back into a float32 array (inverse of write_ften)."""
    with open(path, "rb") as fh:
        raw = fh.read()

    if len(raw) < _HEADER.size:
        raise TruncatedPayload("file shorter than FTEN header", len(raw))
    magic, version, dtype, ndim = _HEADER.unpack_from(raw, 0)
    if magic != FTEN_MAGIC:
        raise BadMagic(f"expected magic {FTEN_MAGIC!r}, got {magic!r}", 0)
    if version != FTEN_VERSION:
        raise UnsupportedVersion(f"unsupported FTEN version {version}", 4)
    if dtype != FTEN_DTYPE_FLOAT32:
        raise UnsupportedDtype(f"unsupported dtype code {dtype}", 5)

    offset = _HEADER.size
    dims_end = offset + 4 * ndim
    if len(raw) < dims_end:
        raise TruncatedPayload("file ends inside the dimension list", len(raw))
    dims = struct.unpack_from(f"<{ndim}I", raw, offset)
    if ndim == 0 or any(d == 0 for d in dims):
        raise TruncatedPayload(f"invalid dims {dims}", offset)

    count = 1
    for d in dims:
        count *= d
    payload_end = dims_end + 4 * count
    if len(raw) != payload_end:
        raise TruncatedPayload(
            f"expected {payload_end} bytes total, got {len(raw)}", min(len(raw), payload_end)
        )

    arr = np.frombuffer(raw, dtype="<f4", count=count, offset=dims_end).reshape(dims)
    finite = np.isfinite(arr)
    if not finite.all():
        bad = int(np.flatnonzero(~finite.ravel())[0])
        raise NonFiniteValue(f"non-finite value at element {bad}", dims_end + 4 * bad)
    return arr.astype(np.float32)


def read_image(path) -> np.ndarray:
    """Decode a PNG or baseline JPEG into a (3, H, W) float array in [0, 1].

    8-bit channel value v maps to exactly v/255.0. Grayscale images are
    replicated across the three channels; paletted and alpha images are
    rejected (the evaluation protocol is RGB-only).
    """
    try:
        with Image.open(path) as img:
            if img.format not in ("PNG", "JPEG"):
                raise UnsupportedFormat(f"{path}: expected PNG or JPEG, got {img.format}")
            if img.mode not in ("RGB", "L"):
                raise UnsupportedFormat(
                    f"{path}: unsupported mode {img.mode!r} (RGB and grayscale only)"
                )
            mode = img.mode
            data = np.asarray(img, dtype=np.uint8)
    except UnidentifiedImageError as exc:
        raise UnsupportedFormat(f"{path}: {exc}") from exc
    except OSError as exc:
        raise DecodeError(f"{path}: {exc}") from exc

    values = data.astype(np.float64) / 255.0
    if mode == "L":
        return np.repeat(values[np.newaxis, :, :], 3, axis=0)
    return np.transpose(values, (2, 0, 1))


def write_image(img: np.ndarray, path) -> None:
    """Write a (3, H, W) [0, 1] image as an 8-bit RGB PNG.

    Quantization is half-up: v maps to floor(v*255 + 0.5). PNG keeps the
    quantized pixels lossless on disk.
    """
    check_image(img)
    quantized = np.floor(img * 255.0 + 0.5).astype(np.uint8)
    Image.fromarray(np.transpose(quantized, (1, 2, 0)), mode="RGB").save(path, format="PNG")


def check_image(img: np.ndarray) -> None:
    """Validate the (3, H, W), finite, [0, 1] image contract."""
    if img.ndim != 3 or img.shape[0] != 3:
        raise ValueError(f"image must be shaped (3, H, W), got {img.shape}")
    if not np.isfinite(img).all():
        raise ValueError("image contains non-finite values")
    if img.min() < 0.0 or img.max() > 1.0:
        raise ValueError(f"image values outside [0, 1]: [{img.min()}, {img.max()}]")


@dataclass(frozen=True)
class PairManifestEntry:
    """One (original, perturbed) attribution pair to be scored."""

    pair_id: str
    dataset: str
    model: str
    method: str
    perturbation: str
    image_id: str
    original_attr_path: str
    perturbed_attr_path: str

    @property
    def key(self) -> tuple[str, str, str, str, str]:
        return (self.dataset, self.model, self.method, self.perturbation, self.image_id)


@dataclass(frozen=True)
class PredictionRecord:
    """Top-1 predictions for one image under one perturbation."""

    image_id: str
    dataset: str
    model: str
    perturbation: str
    class_original: int
    class_perturbed: int
    conf_original: float | None = None
    conf_perturbed: float | None = None

    @property
    def key(self) -> tuple[str, str, str, str]:
        return (self.image_id, self.dataset, self.model, self.perturbation)


def _require(obj: dict, idx: int, field: str, types, label: str):
    if field not in obj:
        raise SchemaError(f"$[{idx}].{field}", "missing required field")
    value = obj[field]
    if isinstance(value, bool) or not isinstance(value, types):
        raise SchemaError(f"$[{idx}].{field}", f"expected {label}, got {type(value).__name__}")
    return value


def _require_str(obj, idx, field) -> str:
    value = _require(obj, idx, field, str, "string")
    if not value:
        raise SchemaError(f"$[{idx}].{field}", "must be nonempty")
    return value


def _load_json_array(path):
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, list):
        raise SchemaError("$", f"expected a JSON array, got {type(data).__name__}")
    return data


def read_predictions(path) -> list[PredictionRecord]:
    """Parse and validate a predictions JSON file.

    Rejects records with duplicate (image_id, dataset, model, perturbation)
    keys: silently keeping either copy would skew retention statistics.
    """
    records = []
    seen = set()
    for idx, obj in enumerate(_load_json_array(path)):
        if not isinstance(obj, dict):
            raise SchemaError(f"$[{idx}]", "expected an object")
        rec = PredictionRecord(
            image_id=_require_str(obj, idx, "image_id"),
            dataset=_require_str(obj, idx, "dataset"),
            model=_require_str(obj, idx, "model"),
            perturbation=_require_str(obj, idx, "perturbation"),
            class_original=_require(obj, idx, "class_original", int, "integer"),
            class_perturbed=_require(obj, idx, "class_perturbed", int, "integer"),
            conf_original=_optional_conf(obj, idx, "conf_original"),
            conf_perturbed=_optional_conf(obj, idx, "conf_perturbed"),
        )
        if rec.class_original < 0:
            raise SchemaError(f"$[{idx}].class_original", "must be >= 0")
        if rec.class_perturbed < 0:
            raise SchemaError(f"$[{idx}].class_perturbed", "must be >= 0")
        if rec.key in seen:
            raise DuplicateRecord(f"duplicate prediction record for {rec.key}")
        seen.add(rec.key)
        records.append(rec)
    return records


def _optional_conf(obj: dict, idx: int, field: str) -> float | None:
    if field not in obj or obj[field] is None:
        return None
    value = obj[field]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"$[{idx}].{field}", f"expected number, got {type(value).__name__}")
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise SchemaError(f"$[{idx}].{field}", f"confidence {value} outside [0, 1]")
    return value


def read_manifest(path) -> list[PairManifestEntry]:
    """Parse and validate a pair manifest JSON file."""
    entries = []
    seen_keys = set()
    seen_ids = set()
    for idx, obj in enumerate(_load_json_array(path)):
        if not isinstance(obj, dict):
            raise SchemaError(f"$[{idx}]", "expected an object")
        entry = PairManifestEntry(
            pair_id=_require_str(obj, idx, "pair_id"),
            dataset=_require_str(obj, idx, "dataset"),
            model=_require_str(obj, idx, "model"),
            method=_require_str(obj, idx, "method"),
            perturbation=_require_str(obj, idx, "perturbation"),
            image_id=_require_str(obj, idx, "image_id"),
            original_attr_path=_require_str(obj, idx, "original_attr_path"),
            perturbed_attr_path=_require_str(obj, idx, "perturbed_attr_path"),
        )
        if entry.key in seen_keys:
            raise DuplicateRecord(f"duplicate manifest entry for {entry.key}")
        if entry.pair_id in seen_ids:
            raise DuplicateRecord(f"duplicate pair_id {entry.pair_id!r}")
        seen_keys.add(entry.key)
        seen_ids.add(entry.pair_id)
        entries.append(entry)
    return entries


def write_manifest(entries: list[PairManifestEntry], path) -> None:
    payload = [
        {
            "pair_id": e.pair_id,
            "dataset": e.dataset,
            "model": e.model,
            "method": e.method,
            "perturbation": e.perturbation,
            "image_id": e.image_id,
            "original_attr_path": e.original_attr_path,
            "perturbed_attr_path": e.perturbed_attr_path,
        }
        for e in entries
    ]
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
