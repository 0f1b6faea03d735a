"""Statistical primitives: Wilcoxon signed-rank test and seeded label permutation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import norm, rankdata

from .errors import DataError

__all__ = ["SignedRankResult", "wilcoxon_signed_rank", "permute_labels", "EXACT_LIMIT"]

# Largest pair count for which the exact null distribution is computed; above
# it the normal approximation (tie + continuity corrected) takes over.
EXACT_LIMIT = 25


@dataclass(frozen=True)
class SignedRankResult:
    w_statistic: float
    n_effective: int
    p_value: float
    method: str  # "exact" | "normal_approx"

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p_value out of [0,1]: {self.p_value}")


def wilcoxon_signed_rank(a, b, sided: str = "two_sided") -> SignedRankResult:
    """Two-sided Wilcoxon signed-rank test on paired samples.

    Differences d = a - b; zero differences are discarded; |d| is ranked with
    average ranks for ties; the statistic is W = min(W+, W-). For up to
    EXACT_LIMIT nonzero pairs the p-value is exact over all 2^n equiprobable
    sign assignments (computed by counting, not sampling); beyond that a
    normal approximation with tie and continuity corrections is used. The
    two-sided p doubles the lower tail and is capped at 1.
    """
    if sided != "two_sided":
        raise ValueError(f"only the two_sided test is supported, got {sided!r}")
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DataError(f"paired samples must be equal-length 1-D vectors, got {a.shape} vs {b.shape}")
    if a.size < 1:
        raise DataError("wilcoxon_signed_rank requires at least one pair")

    d = a - b
    d = d[d != 0.0]
    n = d.size
    if n == 0:
        return SignedRankResult(w_statistic=0.0, n_effective=0, p_value=1.0, method="exact")

    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    w = min(w_plus, w_minus)

    if n <= EXACT_LIMIT:
        p = _exact_two_sided_p(ranks, w)
        return SignedRankResult(w_statistic=w, n_effective=n, p_value=p, method="exact")

    mu = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var -= (tie_counts.astype(np.float64) ** 3 - tie_counts).sum() / 48.0
    sigma = np.sqrt(var)
    # w <= mu by construction; +0.5 is the continuity correction toward mu.
    z = (w - mu + 0.5) / sigma
    p = min(1.0, 2.0 * float(norm.cdf(z)))
    return SignedRankResult(w_statistic=w, n_effective=n, p_value=p, method="normal_approx")


def _exact_two_sided_p(ranks: np.ndarray, w: float) -> float:
    """Exact two-sided p for W = min(W+, W-) from the null distribution of W+.

    W+ = sum of ranks with positive sign under 2^n equiprobable assignments.
    Doubled ranks are integers even with average-rank ties, so the
    distribution is tabulated by integer subset-sum counting. W+ is symmetric
    about n(n+1)/4, hence the two-sided p is 2 * P(W+ <= w), capped at 1.
    """
    r2 = np.rint(2.0 * ranks).astype(np.int64)
    total = int(r2.sum())  # == n(n+1)
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    upto = 0
    for r in r2:
        r = int(r)
        new = counts.copy()
        new[r : upto + r + 1] += counts[: upto + 1]
        counts = new
        upto += r
    count_le = counts[: int(round(2.0 * w)) + 1].sum()
    return min(1.0, 2.0 * count_le / 2.0 ** len(r2))


def permute_labels(y: Sequence, seed: int):
    """Uniform random permutation of y, driven solely by the integer seed.

    Uses NumPy's PCG64 generator, which has a documented, stable stream, so a
    given seed reproduces the same permutation everywhere. Returns the same
    container type as the input (ndarray, list, or tuple).
    """
    if len(y) == 0:
        raise DataError("permute_labels requires a nonempty label vector")
    perm = np.random.default_rng(seed).permutation(len(y))
    if isinstance(y, np.ndarray):
        return y[perm]
    items = [y[i] for i in perm]
    return tuple(items) if isinstance(y, tuple) else items
