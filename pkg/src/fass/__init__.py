"""fass: attribution-map stability evaluation under image perturbations."""

from .aggregate import (
    CategorySummary,
    ConditionSummary,
    PairMeta,
    RetentionRollup,
    category_rollup,
    retention_rollup,
    summarize,
)
from .invariance import FilterConfig, RetentionReport, filter_pairs, retention_report
from .metrics import (
    MetricConfig,
    StabilityScore,
    minmax_normalize,
    score_pair,
    spearman,
    ssim,
    topk_jaccard,
)
from .perturb import (
    ChannelStats,
    PerturbationSpec,
    brightness,
    gaussian_noise,
    jpeg_roundtrip,
    normalize_channels,
    rotate,
    translate,
)
from .tensor_io import (
    PairManifestEntry,
    PredictionRecord,
    read_ften,
    read_image,
    read_manifest,
    read_predictions,
    write_ften,
)

__version__ = "0.1.0"
