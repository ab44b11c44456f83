"""Independent reference implementations used to cross-check the library.

Everything here is deliberately naive: explicit per-window loops, plain
set arithmetic, classical closed forms. Nothing imports from fass.metrics
or fass.perturb, so an error in the library cannot hide in its oracle.
"""

import math

import numpy as np

SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2


def ssim_reference(a1, a2, c1=SSIM_C1, c2=SSIM_C2, window=11):
    """Direct double-loop SSIM: one window sum per location, no pooling."""
    a1 = np.asarray(a1, dtype=np.float64)
    a2 = np.asarray(a2, dtype=np.float64)
    assert a1.shape == a2.shape and a1.ndim == 3
    pad = window // 2
    area = float(window * window)
    channels, height, width = a1.shape

    total = 0.0
    count = 0
    for c in range(channels):
        p1 = np.pad(a1[c], pad)
        p2 = np.pad(a2[c], pad)
        p11 = p1 * p1
        p22 = p2 * p2
        p12 = p1 * p2
        for y in range(height):
            for x in range(width):
                sl = (slice(y, y + window), slice(x, x + window))
                mu1 = p1[sl].sum() / area
                mu2 = p2[sl].sum() / area
                var1 = max(p11[sl].sum() / area - mu1 * mu1, 0.0)
                var2 = max(p22[sl].sum() / area - mu2 * mu2, 0.0)
                cov = p12[sl].sum() / area - mu1 * mu2
                value = ((2 * mu1 * mu2 + c1) * (2 * cov + c2)) / (
                    (mu1 * mu1 + mu2 * mu2 + c1) * (var1 + var2 + c2)
                )
                total += value
                count += 1
    return total / count


def topk_indices_reference(values, k):
    """Top-k by value, ties by ascending index, via a plain Python sort."""
    values = list(np.asarray(values).ravel())
    order = sorted(range(len(values)), key=lambda i: (-values[i], i))
    return set(order[:k])


def jaccard_reference(v1, v2, k):
    s1 = topk_indices_reference(v1, k)
    s2 = topk_indices_reference(v2, k)
    return len(s1 & s2) / len(s1 | s2)


def spearman_no_ties_reference(v1, v2):
    """Classical 1 - 6*sum(d^2)/(n(n^2-1)); valid only without ties."""
    v1 = list(np.asarray(v1).ravel())
    v2 = list(np.asarray(v2).ravel())
    n = len(v1)
    assert len(set(v1)) == n and len(set(v2)) == n, "closed form needs distinct values"
    r1 = _positions(v1)
    r2 = _positions(v2)
    d2 = sum((a - b) ** 2 for a, b in zip(r1, r2))
    return 1.0 - 6.0 * d2 / (n * (n * n - 1))


def spearman_reference(v1, v2):
    """Ordinal ranks by explicit sort, then a plain-float Pearson."""
    r1 = _positions(list(np.asarray(v1).ravel()))
    r2 = _positions(list(np.asarray(v2).ravel()))
    n = len(r1)
    m1 = sum(r1) / n
    m2 = sum(r2) / n
    cov = sum((a - m1) * (b - m2) for a, b in zip(r1, r2))
    s1 = math.sqrt(sum((a - m1) ** 2 for a in r1))
    s2 = math.sqrt(sum((b - m2) ** 2 for b in r2))
    return cov / (s1 * s2)


def _positions(values):
    order = sorted(range(len(values)), key=lambda i: (values[i], i))
    ranks = [0] * len(values)
    for position, index in enumerate(order):
        ranks[index] = position
    return ranks


def rotation_support_reference(height, width, degrees):
    """Classify output pixels of a rotation by bilinear support.

    Returns two boolean (H, W) masks: pixels whose four bilinear neighbors
    all fall inside the source image (value preserved exactly for a
    constant input), and pixels whose support lies entirely outside
    (exactly zero). Uses the same pinned geometry: center ((W-1)/2,
    (H-1)/2), counterclockwise positive.
    """
    theta = math.radians(degrees)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    full_inside = np.zeros((height, width), dtype=bool)
    full_outside = np.zeros((height, width), dtype=bool)
    for y in range(height):
        for x in range(width):
            sx = cx + cos_t * (x - cx) - sin_t * (y - cy)
            sy = cy + sin_t * (x - cx) + cos_t * (y - cy)
            x0, y0 = math.floor(sx), math.floor(sy)
            corners_inside = [
                0 <= xi < width and 0 <= yi < height
                for xi in (x0, x0 + 1)
                for yi in (y0, y0 + 1)
            ]
            full_inside[y, x] = all(corners_inside)
            # all four neighbors out of range => nothing to sample
            full_outside[y, x] = not any(corners_inside)
    return full_inside, full_outside


def psnr(reference, candidate, peak=1.0):
    reference = np.asarray(reference, dtype=np.float64)
    candidate = np.asarray(candidate, dtype=np.float64)
    mse = float(np.mean((reference - candidate) ** 2))
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)
