"""Pairwise stability metrics for attribution maps.

An attribution map is a (3, H, W) float tensor of per-pixel importance.
Given the maps for an original image and its perturbed twin, three
complementary similarities are computed:

* structural similarity (spatial coherence) on min-max normalized maps,
  with local statistics from an 11x11 average-pooling window, stride 1,
  zero padding 5;
* Spearman rank correlation (importance ordering) using ordinal ranks
  from a stable double argsort, rescaled to [0, 1] via (rho + 1) / 2;
* top-k Jaccard overlap (agreement among the k most important pixels),
  k = 100 by default.

The composite score is the exact unweighted mean of the three. Spearman
and Jaccard are computed on raw values: min-max normalization is strictly
increasing whenever it is defined, so rank and top-k statistics are
unaffected by it.

Constant maps make rank correlation meaningless; they are pinned to
rho = 0 (rescaled 0.5) and flagged rather than raised, so batch scoring
never aborts mid-run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import uniform_filter

DEFAULT_K = 100
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2
SSIM_WINDOW = 11

FLAG_CONSTANT_A = "constant_map_a"
FLAG_CONSTANT_B = "constant_map_b"


class DimMismatch(ValueError):
    pass


class KOutOfRange(ValueError):
    pass


@dataclass(frozen=True)
class MetricConfig:
    k: int = DEFAULT_K
    ssim_c1: float = SSIM_C1
    ssim_c2: float = SSIM_C2
    window: int = SSIM_WINDOW
    stride: int = 1

    @property
    def padding(self) -> int:
        return self.window // 2

    def __post_init__(self):
        if self.k < 1:
            raise KOutOfRange(f"k must be >= 1, got {self.k}")
        if self.window < 1 or self.window % 2 == 0:
            raise ValueError(f"window must be odd and positive, got {self.window}")
        if self.stride != 1:
            raise ValueError("only stride 1 is supported")


@dataclass(frozen=True)
class StabilityScore:
    """All component similarities for one attribution-map pair."""

    ssim: float
    spearman_raw: float
    spearman_rescaled: float
    jaccard: float
    composite: float
    degenerate_flags: frozenset[str] = field(default_factory=frozenset)

    @property
    def degenerate(self) -> bool:
        return bool(self.degenerate_flags)


def check_map(a: np.ndarray, min_hw: int | None = None) -> None:
    """Validate the (3, H, W) finite attribution-map contract."""
    if a.ndim != 3 or a.shape[0] != 3:
        raise ValueError(f"attribution map must be shaped (3, H, W), got {a.shape}")
    if min_hw is not None and (a.shape[1] < min_hw or a.shape[2] < min_hw):
        raise ValueError(f"map spatial dims {a.shape[1:]} below the {min_hw}x{min_hw} window")
    if not np.isfinite(a).all():
        raise ValueError("attribution map contains non-finite values")


def _check_same_dims(a1: np.ndarray, a2: np.ndarray) -> None:
    if a1.shape != a2.shape:
        raise DimMismatch(f"shape mismatch: {a1.shape} vs {a2.shape}")


def is_constant(a: np.ndarray) -> bool:
    return bool(a.max() == a.min())


def minmax_normalize(a: np.ndarray) -> np.ndarray:
    """Rescale the whole tensor to [0, 1]; constant maps become all zeros."""
    check_map(a)
    a = np.asarray(a, dtype=np.float64)
    lo = a.min()
    hi = a.max()
    if hi == lo:
        return np.zeros_like(a)
    return (a - lo) / (hi - lo)


def ssim_map(a1: np.ndarray, a2: np.ndarray, cfg: MetricConfig = MetricConfig()) -> np.ndarray:
    """Per-location, per-channel structural similarity (same shape as input).

    Local means come from average pooling over a window x window
    neighborhood with zero padding, so the divisor is always window**2 and
    border windows blend with zeros; that border behavior is part of the
    metric definition, not masked out. Variances are E[x^2] - E[x]^2 under
    the same pooling, clamped at >= 0 to absorb floating-point negatives.
    """
    check_map(a1, min_hw=cfg.window)
    check_map(a2, min_hw=cfg.window)
    _check_same_dims(a1, a2)
    x = np.asarray(a1, dtype=np.float64)
    y = np.asarray(a2, dtype=np.float64)

    size = (1, cfg.window, cfg.window)

    def pool(arr: np.ndarray) -> np.ndarray:
        return uniform_filter(arr, size=size, mode="constant", cval=0.0)

    mu_x = pool(x)
    mu_y = pool(y)
    var_x = np.maximum(pool(x * x) - mu_x * mu_x, 0.0)
    var_y = np.maximum(pool(y * y) - mu_y * mu_y, 0.0)
    cov = pool(x * y) - mu_x * mu_y

    c1, c2 = cfg.ssim_c1, cfg.ssim_c2
    numerator = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    denominator = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return numerator / denominator


def ssim(a1: np.ndarray, a2: np.ndarray, cfg: MetricConfig = MetricConfig()) -> float:
    """Mean structural similarity over all channels and locations."""
    return float(ssim_map(a1, a2, cfg).mean())


def _ordinal_ranks(flat: np.ndarray) -> np.ndarray:
    # double argsort with a stable sort: ties get ranks by ascending index
    order = np.argsort(flat, kind="stable")
    return np.argsort(order, kind="stable")


def rank_correlation(v1: np.ndarray, v2: np.ndarray) -> tuple[float, float]:
    """Spearman correlation of two flat value vectors: (raw, rescaled).

    Ranks are ordinal (stable double argsort), so both rank vectors are
    permutations of 0..n-1 and the Pearson correlation reduces to an exact
    integer expression; identical ordering gives exactly 1.0, a full
    reversal exactly -1.0, and the rescaled value is (rho + 1) / 2.
    """
    v1 = np.asarray(v1).ravel()
    v2 = np.asarray(v2).ravel()
    if v1.size != v2.size:
        raise DimMismatch(f"length mismatch: {v1.size} vs {v2.size}")
    if v1.size < 2:
        raise ValueError("rank correlation needs at least 2 elements")
    r1 = _ordinal_ranks(v1)
    r2 = _ordinal_ranks(v2)
    n = r1.size
    s12 = int(np.dot(r1, r2))
    numerator = 12 * s12 - 3 * n * (n - 1) ** 2
    denominator = n * (n * n - 1)
    rho = numerator / denominator
    return rho, (rho + 1.0) / 2.0


def spearman(a1: np.ndarray, a2: np.ndarray) -> tuple[float, float]:
    """Rank correlation of the flattened maps: (raw in [-1,1], rescaled [0,1]).

    A constant map has no meaningful ordering; such pairs are pinned to
    (0.0, 0.5) and the caller flags them as degenerate.
    """
    check_map(a1)
    check_map(a2)
    _check_same_dims(a1, a2)
    if is_constant(a1) or is_constant(a2):
        return 0.0, 0.5
    return rank_correlation(np.asarray(a1).ravel(), np.asarray(a2).ravel())


def topk_indices(a: np.ndarray, k: int) -> set[int]:
    """Flat indices of the k largest values; ties resolved by ascending index."""
    flat = np.asarray(a).ravel()
    if not 1 <= k <= flat.size:
        raise KOutOfRange(f"k must be in [1, {flat.size}], got {k}")
    order = np.argsort(-flat, kind="stable")
    return set(int(i) for i in order[:k])


def topk_jaccard(a1: np.ndarray, a2: np.ndarray, k: int = DEFAULT_K) -> float:
    """Intersection-over-union of the two maps' top-k index sets."""
    check_map(a1)
    check_map(a2)
    _check_same_dims(a1, a2)
    top1 = topk_indices(a1, k)
    top2 = topk_indices(a2, k)
    return len(top1 & top2) / len(top1 | top2)


def score_pair(
    a1: np.ndarray, a2: np.ndarray, cfg: MetricConfig = MetricConfig()
) -> StabilityScore:
    """Score one (original, perturbed) attribution pair on all components.

    SSIM sees the min-max normalized maps; Spearman and Jaccard see raw
    values. The composite is exactly (ssim + spearman_rescaled + jaccard)/3.
    """
    check_map(a1, min_hw=cfg.window)
    check_map(a2, min_hw=cfg.window)
    _check_same_dims(a1, a2)

    flags = set()
    if is_constant(a1):
        flags.add(FLAG_CONSTANT_A)
    if is_constant(a2):
        flags.add(FLAG_CONSTANT_B)

    s = ssim(minmax_normalize(a1), minmax_normalize(a2), cfg)
    rho, rescaled = spearman(a1, a2)
    j = topk_jaccard(a1, a2, cfg.k)
    return StabilityScore(
        ssim=s,
        spearman_raw=rho,
        spearman_rescaled=rescaled,
        jaccard=j,
        composite=(s + rescaled + j) / 3.0,
        degenerate_flags=frozenset(flags),
    )
