"""Nonparametric tests for small within-subject designs.

Implemented directly rather than delegated: the test statistics are the
contract here (exact enumeration for small Wilcoxon samples, tie-corrected
Friedman), and scipy's variants make different tie/continuity choices.
scipy only supplies the chi-square and normal CDFs.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy.stats import chi2, norm, rankdata

from .errors import ConfigError, DegeneratePairs, IncompleteDesign

# exact sign-flip enumeration up to this many nonzero pairs, 2^12 = 4096 cases
EXACT_WILCOXON_LIMIT = 12


@dataclass(frozen=True)
class TestResult:
    __test__ = False  # not a pytest class, despite the name

    statistic: float
    p_raw: float
    p_adjusted: float | None = None
    comparison_label: str = ""

    def __post_init__(self):
        if not (0.0 <= self.p_raw <= 1.0):
            raise ConfigError(f"p_raw {self.p_raw} outside [0, 1]")
        if self.p_adjusted is not None and self.p_adjusted < self.p_raw - 1e-12:
            raise ConfigError("adjusted p below raw p")


def friedman(matrix) -> TestResult:
    """Friedman rank test across k related conditions.

    Rows are subjects, columns conditions. Values are ranked within each row
    with mid-ranks for ties, and the statistic uses the standard tie
    correction divisor. When every row is fully tied the data carry no
    ordering information at all: statistic 0, p 1.
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2:
        raise ConfigError("need a 2-d subjects x conditions matrix")
    n, k = m.shape
    if n < 2 or k < 2:
        raise ConfigError(f"need at least 2 rows and 2 columns, got {n}x{k}")
    if np.isnan(m).any():
        raise IncompleteDesign("matrix has missing cells")
    ranks = np.apply_along_axis(rankdata, 1, m)
    rank_sums = ranks.sum(axis=0)
    stat = 12.0 / (n * k * (k + 1)) * float(rank_sums @ rank_sums) - 3.0 * n * (k + 1)
    ties = 0.0
    for row in m:
        _, counts = np.unique(row, return_counts=True)
        ties += float(np.sum(counts**3 - counts))
    correction = 1.0 - ties / (n * k * (k * k - 1))
    if correction <= 0.0:
        return TestResult(0.0, 1.0)
    stat /= correction
    stat = max(stat, 0.0)
    return TestResult(float(stat), float(chi2.sf(stat, k - 1)))


def _wilcoxon_exact_p(ranks: np.ndarray, w_obs: float) -> float:
    """P(min(W+, W-) <= w_obs) over all 2^m equally likely sign patterns."""
    m = len(ranks)
    signs = np.array(list(product((0.0, 1.0), repeat=m)))
    w_plus = signs @ ranks
    total = float(ranks.sum())
    w_min = np.minimum(w_plus, total - w_plus)
    return float(np.count_nonzero(w_min <= w_obs + 1e-9) / len(signs))


def wilcoxon_signed_rank(a, b, label: str = "") -> TestResult:
    """Two-sided Wilcoxon signed-rank test on paired samples.

    Zero differences are dropped; all-zero input is degenerate rather than
    p = 1, because "no information" and "strong evidence of no difference"
    are different findings. Small samples get the exact permutation p;
    larger ones the normal approximation with tie and continuity
    corrections. Symmetric in its arguments by construction.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ConfigError("inputs must be 1-d and equally long")
    d = a - b
    d = d[d != 0.0]
    m = len(d)
    if m == 0:
        raise DegeneratePairs("all paired differences are zero")
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    w = min(w_plus, w_minus)
    if m <= EXACT_WILCOXON_LIMIT:
        p = _wilcoxon_exact_p(ranks, w)
    else:
        mu = m * (m + 1) / 4.0
        _, counts = np.unique(ranks, return_counts=True)
        tie_term = float(np.sum(counts**3 - counts)) / 48.0
        sigma = np.sqrt(m * (m + 1) * (2 * m + 1) / 24.0 - tie_term)
        if sigma == 0.0:
            raise DegeneratePairs("all differences tie into one rank group")
        z = (w - mu + 0.5) / sigma  # w <= mu, continuity pulls toward 0
        p = min(1.0, 2.0 * float(norm.cdf(z)))
    return TestResult(float(w), float(p), comparison_label=label)


def fdr_adjust(p_values) -> np.ndarray:
    """Benjamini-Hochberg step-up adjustment, order preserved.

    Sorted p(i) maps to q(i) = min over j >= i of min(1, p(j) * m / j).
    """
    p = np.asarray(p_values, dtype=float)
    if p.ndim != 1 or len(p) == 0:
        raise ConfigError("need a 1-d non-empty vector")
    if np.any(p < 0.0) or np.any(p > 1.0):
        raise ConfigError("p-values outside [0, 1]")
    m = len(p)
    order = np.argsort(p, kind="stable")
    q = p[order] * m / np.arange(1, m + 1)
    q = np.minimum.accumulate(q[::-1])[::-1]
    q = np.minimum(q, 1.0)
    out = np.empty(m)
    out[order] = q
    return out
