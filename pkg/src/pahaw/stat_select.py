"""Mann-Whitney U filtering and Spearman ranking of features against diagnosis."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from math import comb
from typing import NamedTuple

import numpy as np
from scipy.special import ndtr
from scipy.stats import rankdata

from .errors import ConstantLabels, EmptyGroup, NoSignificantFeatures
from .feature_matrix import FeatureMatrix, FeatureName

# exact null distribution is enumerated up to this many (a, b) pairs
EXACT_MAX_PAIRS = 64


class MannWhitneyResult(NamedTuple):
    u: float  # min(U_a, U_b)
    p: float  # two-sided
    u_a: float
    method: str


def _doubled_ranks(pooled: np.ndarray) -> np.ndarray:
    """Average ranks times two, which are always integers."""
    return np.rint(2 * rankdata(pooled, method="average")).astype(np.int64)


def _exact_p(ranks2: np.ndarray, n_a: int, observed2: int) -> float:
    """Two-sided permutation p of a doubled rank sum.

    Counts subsets of size ``n_a`` of the pooled (doubled) ranks whose sum
    lies at least as far from the null mean as the observed one.
    """
    n = len(ranks2)
    total = int(ranks2.sum())
    counts = np.zeros((n_a + 1, total + 1))
    counts[0, 0] = 1
    for r in ranks2:
        # descending k keeps each rank used at most once
        for k in range(min(n_a, n), 0, -1):
            counts[k, r:] += counts[k - 1, : total + 1 - r]
    dist = counts[n_a]
    mean2 = n_a * (n + 1)  # doubled null mean of the rank sum
    sums = np.arange(total + 1)
    extreme = np.abs(sums - mean2) >= abs(observed2 - mean2)
    return min(1.0, float(dist[extreme].sum()) / comb(n, n_a))


def _normal_p(u_a: float, n_a: int, n_b: int, tie_term: float) -> float:
    """Normal approximation with tie-corrected variance and continuity correction.

    ``tie_term`` is the sum of ``t**3 - t`` over tie groups of the pooled data.
    """
    n = n_a + n_b
    mu = n_a * n_b / 2.0
    var = n_a * n_b / 12.0 * ((n + 1) - tie_term / (n * (n - 1))) if n > 1 else 0.0
    if var <= 0:
        return 1.0
    z = max(abs(u_a - mu) - 0.5, 0.0) / np.sqrt(var)
    return float(min(1.0, 2.0 * ndtr(-z)))


def mann_whitney_u(group_a, group_b, method: str = "auto") -> MannWhitneyResult:
    """Two-sided Mann-Whitney U test with average ranks for ties.

    ``method="auto"`` enumerates the exact permutation distribution when
    ``len(a) * len(b) <= 64`` and uses the normal approximation otherwise.
    """
    a = np.asarray(group_a, dtype=float).ravel()
    b = np.asarray(group_b, dtype=float).ravel()
    if a.size == 0:
        raise EmptyGroup("a")
    if b.size == 0:
        raise EmptyGroup("b")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("Mann-Whitney inputs must be finite")
    if method not in ("auto", "exact", "normal"):
        raise ValueError(f"unknown method {method!r}")
    n_a, n_b = a.size, b.size
    pooled = np.concatenate([a, b])
    ranks2 = _doubled_ranks(pooled)
    rank_sum2 = int(ranks2[:n_a].sum())
    u_a = rank_sum2 / 2.0 - n_a * (n_a + 1) / 2.0
    u = min(u_a, n_a * n_b - u_a)

    if method == "auto":
        method = "exact" if n_a * n_b <= EXACT_MAX_PAIRS else "normal"
    if method == "exact":
        p = _exact_p(ranks2, n_a, rank_sum2)
    else:
        _, t = np.unique(pooled, return_counts=True)
        p = _normal_p(u_a, n_a, n_b, float((t.astype(float) ** 3 - t).sum()))
    return MannWhitneyResult(float(u), p, float(u_a), method)


def spearman_vs_label(feature_column, labels) -> float:
    """Spearman correlation between a feature and a binary label.

    A constant feature carries no ordering and gets 0.
    """
    x = np.asarray(feature_column, dtype=float)
    y = np.asarray(labels, dtype=float)
    if len(x) != len(y):
        raise ValueError("feature and labels differ in length")
    if len(x) < 3:
        raise ValueError("need at least 3 rows")
    if np.all(y == y[0]):
        raise ConstantLabels("labels are all equal")
    rx = rankdata(x) - (len(x) + 1) / 2.0
    ry = rankdata(y) - (len(y) + 1) / 2.0
    sxx = rx @ rx
    if sxx == 0:
        return 0.0
    return float(np.clip((rx @ ry) / np.sqrt(sxx * (ry @ ry)), -1.0, 1.0))


def column_tests(X: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mann-Whitney U, p and Spearman rho for every column of a complete matrix.

    Rows with ``labels == 1`` form the first group.  Equivalent to calling
    :func:`mann_whitney_u` and :func:`spearman_vs_label` per column.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(labels).astype(bool)
    n, d = X.shape
    n_a = int(y.sum())
    n_b = n - n_a
    if n_a == 0 or n_b == 0:
        raise ConstantLabels("both classes are required")
    if d == 0:
        return np.zeros(0), np.zeros(0), np.zeros(0)
    r_min = rankdata(X, method="min", axis=0)
    r_max = rankdata(X, method="max", axis=0)
    ranks = (r_min + r_max) / 2.0
    tie_term = ((r_max - r_min + 1) ** 2 - 1).sum(axis=0)  # == sum(t^3 - t) over groups

    u_a = ranks[y].sum(axis=0) - n_a * (n_a + 1) / 2.0
    u = np.minimum(u_a, n_a * n_b - u_a)
    if n_a * n_b <= EXACT_MAX_PAIRS:
        p = np.array([mann_whitney_u(X[y, j], X[~y, j]).p for j in range(d)])
    else:
        mu = n_a * n_b / 2.0
        var = n_a * n_b / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.maximum(np.abs(u_a - mu) - 0.5, 0.0) / np.sqrt(var)
        p = np.where(var > 0, np.minimum(1.0, 2.0 * ndtr(-z)), 1.0)

    rx = ranks - (n + 1) / 2.0
    ry = rankdata(y.astype(float)) - (n + 1) / 2.0
    sxx = (rx * rx).sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = (ry @ rx) / np.sqrt(sxx * (ry @ ry))
    rho = np.where(sxx > 0, np.clip(rho, -1.0, 1.0), 0.0)
    return u, p, rho


@dataclass(frozen=True)
class TestResult:
    feature: FeatureName
    u_statistic: float
    p_value: float
    spearman_rho: float
    pd_median: float
    h_median: float
    pd_std: float
    h_std: float

    __test__ = False  # not a pytest class


def _group_stats(v: np.ndarray) -> tuple[float, float]:
    v = v[np.isfinite(v)]
    if v.size == 0:
        return float("nan"), float("nan")
    return float(np.median(v)), float(v.std(ddof=1)) if v.size > 1 else 0.0


def score_features(m: FeatureMatrix) -> list[TestResult]:
    """Test every column; absent values are ignored per column."""
    X, y = m.values, m.labels.astype(bool)
    if y.all() or not y.any():
        raise ConstantLabels("both classes are required")
    complete = np.all(np.isfinite(X), axis=0)
    u = np.full(X.shape[1], np.nan)
    p = np.ones(X.shape[1])
    rho = np.zeros(X.shape[1])
    if complete.any():
        u[complete], p[complete], rho[complete] = column_tests(X[:, complete], y)
    for j in np.flatnonzero(~complete):
        ok = np.isfinite(X[:, j])
        xa, xb = X[ok & y, j], X[ok & ~y, j]
        if xa.size == 0 or xb.size == 0 or ok.sum() < 3:
            continue
        res = mann_whitney_u(xa, xb)
        u[j], p[j] = res.u, res.p
        rho[j] = spearman_vs_label(X[ok, j], y[ok].astype(float))
    out = []
    for j, col in enumerate(m.columns):
        pd_med, pd_std = _group_stats(X[y, j])
        h_med, h_std = _group_stats(X[~y, j])
        out.append(TestResult(col, float(u[j]), float(p[j]), float(rho[j]), pd_med, h_med, pd_std, h_std))
    return out


def select_and_rank(m: FeatureMatrix, alpha: float = 0.05) -> list[TestResult]:
    """Features with Mann-Whitney p < alpha, ordered by descending |rho|.

    Ties on |rho| fall back to canonical feature-name order.  No
    multiple-comparison correction is applied.
    """
    results = [r for r in score_features(m) if r.p_value < alpha]
    if not results:
        raise NoSignificantFeatures(alpha, len(m.columns))
    results.sort(key=lambda r: (-abs(r.spearman_rho), r.feature))
    return results


def significant_columns(X: np.ndarray, labels: np.ndarray, alpha: float = 0.05) -> np.ndarray:
    """Indices of complete-matrix columns passing the U test, most relevant first."""
    _, p, rho = column_tests(X, labels)
    idx = np.flatnonzero(p < alpha)
    # stable sort on column index keeps the canonical tie order
    return idx[np.argsort(-np.abs(rho[idx]), kind="stable")]


RANKING_HEADER = (
    "feature",
    "segment",
    "functional",
    "task",
    "abs_rho",
    "rho",
    "pd_median",
    "pd_std",
    "h_median",
    "h_std",
    "u_statistic",
    "p_value",
)


def ranking_csv(results: list[TestResult], top: int | None = None) -> str:
    """Ranked features in the column layout of a relevance table."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RANKING_HEADER)
    for r in results[:top] if top else results:
        f = r.feature
        w.writerow(
            [
                f.base,
                f.segment,
                "-" if f.functional == "none" else f.functional,
                f.task_id,
                f"{abs(r.spearman_rho):.4f}",
                f"{r.spearman_rho:.4f}",
                f"{r.pd_median:.4f}",
                f"{r.pd_std:.4f}",
                f"{r.h_median:.4f}",
                f"{r.h_std:.4f}",
                f"{r.u_statistic:g}",
                f"{r.p_value:.6g}",
            ]
        )
    return buf.getvalue()
