"""Statistical primitives for the distinguisher.

Everything here takes plain numbers or numpy arrays. The orchestration that
turns a FrequencyMap into a full AnalysisResult lives in ``analysis``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

AD_CRITICAL_VALUES = (0.576, 0.656, 0.787, 0.918, 1.092)
AD_SIG_LEVELS = (15.0, 10.0, 5.0, 2.5, 1.0)
SHAPIRO_MAX_N = 5000
SHAPIRO_SKIP_REASON = "Dataset too large for Shapiro-Wilk (N > 5000)"
FISHER_FLOOR = 1e-300
ALPHA_CAP = 0.15
GLOBAL_ANOMALY_P = 1e-3


def expected_probability(k_a: int, k_b: int) -> float:
    """Null probability of one specific (a, b) pair with k_a input and k_b output nibbles."""
    if k_a < 1 or k_b < 1:
        raise ValueError("nibble counts must be >= 1")
    return 1.0 / ((2 ** (4 * k_a) - 1) * 2 ** (4 * k_b))


def pair_space(k_a: int, k_b: int) -> int:
    return (2 ** (4 * k_a) - 1) * 2 ** (4 * k_b)


# ---------------------------------------------------------------- per-pair tests

def pair_pvalues(counts, trials: int, p_exp: float) -> np.ndarray:
    """Two-sided exact binomial p-values, doubling the smaller tail.

    Always exact: scipy evaluates the binomial tails through the regularized
    incomplete beta function, which stays fast and accurate at n ~ 10^7.
    """
    k = np.asarray(counts, dtype=np.float64)
    if np.any(k < 0) or np.any(k > trials):
        raise ValueError("counts must lie in [0, trials]")
    lower = sps.binom.cdf(k, trials, p_exp)
    upper = sps.binom.sf(k - 1, trials, p_exp)
    return np.minimum(1.0, 2.0 * np.minimum(lower, upper))


def pair_pvalue(count: int, trials: int, p_exp: float) -> float:
    return float(pair_pvalues([count], trials, p_exp)[0])


def bias_ratio(counts, trials: int, p_exp: float) -> np.ndarray:
    return (np.asarray(counts, dtype=np.float64) / trials) / p_exp


# ---------------------------------------------------------------- multiple testing

def _as_pvals(raw) -> np.ndarray:
    p = np.asarray(raw, dtype=np.float64)
    if p.ndim != 1:
        p = p.ravel()
    if np.any((p < 0) | (p > 1)):
        raise ValueError("p-values must lie in [0, 1]")
    return p


def benjamini_hochberg(raw) -> np.ndarray:
    p = _as_pvals(raw)
    m = len(p)
    if m == 0:
        return p.copy()
    order = np.argsort(p, kind="stable")
    scaled = p[order] * m / np.arange(1, m + 1)
    adj = np.minimum.accumulate(scaled[::-1])[::-1]
    out = np.empty(m)
    out[order] = np.minimum(adj, 1.0)
    return out


def holm(raw) -> np.ndarray:
    p = _as_pvals(raw)
    m = len(p)
    if m == 0:
        return p.copy()
    order = np.argsort(p, kind="stable")
    scaled = p[order] * (m - np.arange(m))
    adj = np.maximum.accumulate(scaled)
    out = np.empty(m)
    out[order] = np.minimum(adj, 1.0)
    return out


def bonferroni(raw) -> np.ndarray:
    p = _as_pvals(raw)
    return np.minimum(p * len(p), 1.0)


def adaptive_threshold(counts, alpha_base: float = 0.05, r: int = 9, eta: float = 0.1, cap: float = ALPHA_CAP) -> float:
    """alpha_base * (1 + eta*IQR/sqrt(n)) * (1 + max(0, (r-5)*0.1)), capped.

    n counts the nonzero entries; the IQR is taken over those same entries.
    """
    if not 0 < alpha_base < 1:
        raise ValueError("alpha_base must be in (0, 1)")
    c = np.asarray(counts, dtype=np.float64)
    c = c[c > 0]
    if len(c) == 0:
        iqr_term = 0.0
    else:
        q75, q25 = np.percentile(c, [75, 25])
        iqr_term = eta * (q75 - q25) / math.sqrt(len(c))
    alpha = alpha_base * (1 + iqr_term) * (1 + max(0.0, (r - 5) * 0.1))
    return min(alpha, cap)


# ---------------------------------------------------------------- divergence / goodness of fit

def kl_divergence(observed, expected) -> float:
    """Sum p ln(p/q) after normalizing both; 0*ln 0 is taken as 0."""
    p = np.asarray(observed, dtype=np.float64)
    q = np.asarray(expected, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError("observed and expected must have the same shape")
    p = p / p.sum()
    q = q / q.sum()
    support = p > 0
    if np.any(q[support] <= 0):
        raise ValueError("expected probability is zero where observed is positive")
    return float(max(0.0, np.sum(p[support] * np.log(p[support] / q[support]))))


@dataclass(frozen=True)
class GofResult:
    statistic: float
    pvalue: float
    dof: int
    max_cell: float = float("nan")


def _cells(counts, expected, n_cells):
    o = np.asarray(counts, dtype=np.float64)
    e = np.broadcast_to(np.asarray(expected, dtype=np.float64), o.shape)
    if np.any(e <= 0):
        raise ValueError("expected counts must be positive")
    n_cells = len(o) if n_cells is None else int(n_cells)
    if n_cells < len(o):
        raise ValueError("n_cells is smaller than the number of supplied counts")
    hidden = n_cells - len(o)
    if hidden and np.ndim(expected) != 0:
        raise ValueError("implicit zero cells need a scalar expected count")
    return o, e, n_cells, hidden, float(np.asarray(expected).ravel()[0]) if hidden else 0.0


def chi_square_suite(counts, expected, n_cells: int | None = None) -> GofResult:
    """Pearson chi-square. Cells beyond len(counts) (up to n_cells) are zero-count cells."""
    o, e, n_cells, hidden, e0 = _cells(counts, expected, n_cells)
    contrib = (o - e) ** 2 / e
    stat = float(contrib.sum() + hidden * e0)
    max_cell = float(max(contrib.max(initial=0.0), e0 if hidden else 0.0))
    dof = n_cells - 1
    p = float(sps.chi2.sf(stat, dof)) if dof > 0 else 1.0
    return GofResult(stat, p, dof, max_cell)


def chi_square_contributions(counts, expected) -> np.ndarray:
    o = np.asarray(counts, dtype=np.float64)
    return (o - expected) ** 2 / expected


def g_test(counts, expected, n_cells: int | None = None) -> GofResult:
    """G = 2 sum O ln(O/E); zero cells add nothing."""
    o, e, n_cells, _, _ = _cells(counts, expected, n_cells)
    pos = o > 0
    stat = float(max(0.0, 2.0 * np.sum(o[pos] * np.log(o[pos] / e[pos]))))
    dof = n_cells - 1
    p = float(sps.chi2.sf(stat, dof)) if dof > 0 else 1.0
    return GofResult(stat, p, dof)


# ---------------------------------------------------------------- distribution summary

@dataclass(frozen=True)
class DistributionSummary:
    n_pairs: int
    mean: float
    median: float
    std_dev: float
    max: int
    min: int
    skewness: float
    kurtosis: float
    kl_divergence: float
    max_chi2: float
    relative_entropy: float
    anderson_darling: tuple
    shapiro: tuple | None
    shapiro_skip_reason: str | None = None


def distribution_summary(counts, n_cells: int | None = None, expected: float | None = None) -> DistributionSummary:
    """Moments of the observed counts plus entropy and normality diagnostics.

    KL and relative entropy compare the normalized counts with the uniform
    distribution over ``n_cells`` cells (default: the observed cells).
    ``expected`` is the per-cell null count used for max chi-square; it
    defaults to the mean over all cells.
    """
    c = np.asarray(counts, dtype=np.float64)
    if len(c) == 0:
        raise ValueError("counts must be non-empty")
    n_cells = len(c) if n_cells is None else int(n_cells)
    if expected is None:
        expected = c.sum() / n_cells
    n = len(c)
    std = float(c.std(ddof=1)) if n > 1 else 0.0
    if std > 0:
        skew = float(sps.skew(c, bias=False)) if n > 2 else 0.0
        kurt = float(sps.kurtosis(c, fisher=True, bias=False)) if n > 3 else 0.0
    else:
        skew = kurt = 0.0

    p = c / c.sum()
    pos = p > 0
    entropy = float(-np.sum(p[pos] * np.log(p[pos])))
    kl = float(max(0.0, math.log(n_cells) - entropy))
    rel_entropy = entropy / math.log(n_cells) if n_cells > 1 else 1.0
    max_chi2 = chi_square_suite(c, expected, n_cells).max_cell

    if std > 0:
        ad_stat = float(sps.anderson(c, dist="norm").statistic)
    else:
        ad_stat = float("nan")
    ad = (ad_stat, AD_CRITICAL_VALUES, AD_SIG_LEVELS)

    shapiro, reason = None, None
    if n > SHAPIRO_MAX_N:
        reason = SHAPIRO_SKIP_REASON
    elif n < 3:
        reason = "Shapiro-Wilk needs at least 3 observations"
    elif std == 0:
        reason = "All counts identical"
    else:
        res = sps.shapiro(c)
        shapiro = (float(res.statistic), float(res.pvalue))

    return DistributionSummary(
        n_pairs=n,
        mean=float(c.mean()),
        median=float(np.median(c)),
        std_dev=std,
        max=int(c.max()),
        min=int(c.min()),
        skewness=skew,
        kurtosis=kurt,
        kl_divergence=kl,
        max_chi2=max_chi2,
        relative_entropy=min(1.0, max(0.0, rel_entropy)),
        anderson_darling=ad,
        shapiro=shapiro,
        shapiro_skip_reason=reason,
    )


# ---------------------------------------------------------------- sequential test

@dataclass(frozen=True)
class SPRTResult:
    decision: str  # accept_h1, accept_h0 or undecided
    n_at_decision: int
    llr_trace: tuple
    upper: float
    lower: float


def sprt_boundaries(alpha: float, beta: float) -> tuple[float, float]:
    if not (0 < alpha < 1 and 0 < beta < 1):
        raise ValueError("alpha and beta must be in (0, 1)")
    return math.log((1 - beta) / alpha), math.log(beta / (1 - alpha))


def sprt(batches, p0: float, p1: float | None = None, alpha: float = 0.05, beta: float = 0.2) -> SPRTResult:
    """Wald's test on Bernoulli data supplied as (hits, trials) batches.

    The log-likelihood ratio is checked against both boundaries after every
    batch, so a batch of size 1 gives the classic per-trial test.
    """
    p1 = 1.5 * p0 if p1 is None else p1
    if not 0 < p0 < 1 or not 0 < p1 < 1:
        raise ValueError("p0 and p1 must lie in (0, 1)")
    if p0 == p1:
        raise ValueError("p0 == p1 gives a test with no information")
    upper, lower = sprt_boundaries(alpha, beta)
    hit_w = math.log(p1 / p0)
    miss_w = math.log((1 - p1) / (1 - p0))
    llr, n, trace = 0.0, 0, []
    for hits, trials in batches:
        hits, trials = int(hits), int(trials)
        if not 0 <= hits <= trials:
            raise ValueError("each batch needs 0 <= hits <= trials")
        llr += hits * hit_w + (trials - hits) * miss_w
        n += trials
        trace.append(llr)
        if llr >= upper:
            return SPRTResult("accept_h1", n, tuple(trace), upper, lower)
        if llr <= lower:
            return SPRTResult("accept_h0", n, tuple(trace), upper, lower)
    return SPRTResult("undecided", n, tuple(trace), upper, lower)


# ---------------------------------------------------------------- aggregation / anomalies

def fisher_combine(pvals, floor: float = FISHER_FLOOR) -> tuple[float, float]:
    p = np.asarray(pvals, dtype=np.float64).ravel()
    if len(p) == 0:
        raise ValueError("need at least one p-value")
    if np.any((p < 0) | (p > 1)):
        raise ValueError("p-values must lie in [0, 1]")
    if np.any(p < floor):
        warnings.warn(f"p-values below {floor:g} clamped for Fisher's method", RuntimeWarning, stacklevel=2)
        p = np.maximum(p, floor)
    stat = float(-2.0 * np.sum(np.log(p)))
    return stat, float(sps.chi2.sf(stat, 2 * len(p)))


def bias_persistence(max_bias: float, r: int, factor: float = 5.0) -> tuple[float, float, bool]:
    if r < 1:
        raise ValueError("rounds must be >= 1")
    expected = 2.0 ** (-r / 3.0)
    ratio = max_bias / expected
    return expected, ratio, bool(ratio >= factor)


CATEGORIES = ("strong_bias", "moderate_bias", "weakly_significant", "combined_moderate")
FISHER_MIN_MEMBERS = 5


def categorize(bias, raw_p) -> dict[str, np.ndarray]:
    """Boolean membership arrays for each evidence category."""
    bias = np.asarray(bias, dtype=np.float64)
    raw_p = np.asarray(raw_p, dtype=np.float64)
    return {
        "strong_bias": bias > 1.4,
        "moderate_bias": (bias >= 1.2) & (bias <= 1.4),
        "weakly_significant": raw_p < 0.2,
        "combined_moderate": (bias > 1.3) & (raw_p < 0.1),
    }


@dataclass(frozen=True)
class CombinedEvidence:
    tallies: dict
    fisher: dict  # category -> (stat, combined p), only for categories with >= 5 members
    alert: bool
    alert_categories: tuple = ()


def combined_evidence(bias, raw_p, alpha: float) -> CombinedEvidence:
    members = categorize(bias, raw_p)
    tallies = {k: int(v.sum()) for k, v in members.items()}
    fisher = {}
    for name in CATEGORIES:
        if tallies[name] >= FISHER_MIN_MEMBERS:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                fisher[name] = fisher_combine(np.asarray(raw_p)[members[name]])
    firing = tuple(k for k, (_, p) in fisher.items() if p < alpha)
    return CombinedEvidence(tallies, fisher, bool(firing), firing)


# ---------------------------------------------------------------- clustering

@dataclass(frozen=True)
class Cluster:
    members: np.ndarray = field(repr=False)  # indices into the input arrays
    member_count: int = 0
    combined_p: float = 1.0
    avg_bias: float = 1.0


def _support(rows: np.ndarray) -> np.ndarray:
    """Bitmask of nonzero byte positions per row."""
    weights = (1 << np.arange(rows.shape[1], dtype=np.int64))
    return ((rows != 0).astype(np.int64) * weights).sum(axis=1)


def cluster_patterns(a, b, bias, raw_p, cut: float = 1.0, p_select: float = 0.05) -> list[Cluster]:
    """Single-linkage clusters of the pairs with raw p below ``p_select``.

    Distance between two pairs is the Hamming distance of their a/b byte
    supports plus |ln bias_1 - ln bias_2|; clusters are joined while that
    distance is <= cut. Results are sorted by combined p, then by size.
    If no pair qualifies, every pair goes into a single cluster with
    combined p 1.0.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    bias = np.asarray(bias, dtype=np.float64)
    raw_p = np.asarray(raw_p, dtype=np.float64)
    idx = np.nonzero(raw_p < p_select)[0]
    if len(idx) == 0:
        if len(bias) == 0:
            return []
        return [Cluster(np.arange(len(bias)), len(bias), 1.0, float(bias.mean()))]

    sup = (_support(a[idx]) << 16) | _support(b[idx])
    with np.errstate(divide="ignore"):
        lb = np.log(bias[idx])
    parent = np.arange(len(idx))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i, j):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)

    groups = {}
    for i, s in enumerate(sup.tolist()):
        groups.setdefault(s, []).append(i)

    # same support: in one dimension single linkage just chains sorted neighbours
    for members in groups.values():
        m = np.asarray(members)
        order = m[np.argsort(lb[m], kind="stable")]
        gaps = np.diff(lb[order])
        for k in np.nonzero(gaps <= cut)[0]:
            union(order[k], order[k + 1])

    # supports one bit apart only link when the remaining budget covers the bias gap
    slack = cut - 1.0
    if slack >= 0:
        keys = sorted(groups)
        for s in keys:
            for bit in range(32):
                t = s ^ (1 << bit)
                if t <= s or t not in groups:
                    continue
                ms, mt = np.asarray(groups[s]), np.asarray(groups[t])
                ls, lt = lb[ms], lb[mt]
                order = np.argsort(lt, kind="stable")
                lt_sorted = lt[order]
                pos = np.searchsorted(lt_sorted, ls)
                for i, p in zip(ms, pos):
                    for q in (p - 1, p):
                        if 0 <= q < len(lt_sorted) and abs(lt_sorted[q] - lb[i]) <= slack:
                            union(i, mt[order[q]])

    roots = np.array([find(i) for i in range(len(idx))])
    clusters = []
    for root in np.unique(roots):
        local = np.nonzero(roots == root)[0]
        members = idx[local]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            _, cp = fisher_combine(raw_p[members])
        clusters.append(Cluster(members, len(members), cp, float(bias[members].mean())))
    clusters.sort(key=lambda c: (c.combined_p, -c.member_count, int(c.members[0])))
    return clusters
