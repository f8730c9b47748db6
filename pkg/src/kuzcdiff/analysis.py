"""Turn a FrequencyMap into a full AnalysisResult."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import stats
from .sampler import ExperimentConfig, FrequencyMap, merge, run_trials


@dataclass(frozen=True)
class PairStatistics:
    a: bytes
    b: bytes
    count: int
    expected: float
    bias: float
    chi2: float
    raw_p: float
    fdr_p: float
    holm_p: float
    bonferroni_p: float
    categories: frozenset


@dataclass
class AnalysisResult:
    config: ExperimentConfig
    freq: FrequencyMap
    n_cells: int
    p_exp: float
    expected_count: float
    bias: np.ndarray
    chi2: np.ndarray
    raw_p: np.ndarray
    fdr_p: np.ndarray
    holm_p: np.ndarray
    bonferroni_p: np.ndarray
    distribution: stats.DistributionSummary
    chi2_gof: stats.GofResult
    g_test: stats.GofResult
    adaptive_alpha: float
    fdr_significant_count: int
    combined: stats.CombinedEvidence
    persistence: tuple
    clusters: list
    anomalies: frozenset
    sprt_outcome: stats.SPRTResult | None = None
    alpha_base: float = 0.05
    eta: float = 0.1
    categories: dict = field(default_factory=dict, repr=False)

    @property
    def max_bias(self) -> float:
        return float(self.bias.max()) if len(self.bias) else 0.0

    @property
    def min_fdr_p(self) -> float:
        return float(self.fdr_p.min()) if len(self.fdr_p) else 1.0

    @property
    def global_tests(self) -> dict:
        return {
            "chi2_gof": (self.chi2_gof.statistic, self.chi2_gof.pvalue),
            "g_test": (self.g_test.statistic, self.g_test.pvalue),
        }

    def fdr_significant(self) -> np.ndarray:
        """Indices of FDR-significant pairs, most significant first."""
        idx = np.nonzero(self.fdr_p < self.adaptive_alpha)[0]
        return idx[np.lexsort((idx, self.fdr_p[idx]))]

    def pair(self, i: int) -> PairStatistics:
        cats = frozenset(name for name, flags in self.categories.items() if flags[i])
        return PairStatistics(
            a=self.freq.a[i].tobytes(),
            b=self.freq.b[i].tobytes(),
            count=int(self.freq.counts[i]),
            expected=self.expected_count,
            bias=float(self.bias[i]),
            chi2=float(self.chi2[i]),
            raw_p=float(self.raw_p[i]),
            fdr_p=float(self.fdr_p[i]),
            holm_p=float(self.holm_p[i]),
            bonferroni_p=float(self.bonferroni_p[i]),
            categories=cats,
        )

    @property
    def pair_stats(self) -> list[PairStatistics]:
        return [self.pair(i) for i in range(len(self.bias))]


def analyze(
    freq: FrequencyMap,
    cfg: ExperimentConfig,
    alpha_base: float = 0.05,
    eta: float = 0.1,
    sprt_outcome: stats.SPRTResult | None = None,
) -> AnalysisResult:
    if len(freq) == 0 or freq.trials_used == 0:
        raise ValueError("frequency map is empty; nothing to analyze")
    masks = cfg.masks
    p_exp = stats.expected_probability(masks.k_in, masks.k_out)
    n_cells = stats.pair_space(masks.k_in, masks.k_out)
    n = freq.trials_used
    expected = n * p_exp
    counts = freq.counts

    bias = stats.bias_ratio(counts, n, p_exp)
    chi2 = stats.chi_square_contributions(counts, expected)
    raw_p = stats.pair_pvalues(counts, n, p_exp)
    fdr_p = stats.benjamini_hochberg(raw_p)
    holm_p = stats.holm(raw_p)
    bonf_p = stats.bonferroni(raw_p)

    dist = stats.distribution_summary(counts, n_cells=n_cells, expected=expected)
    gof = stats.chi_square_suite(counts, expected, n_cells)
    g = stats.g_test(counts, expected, n_cells)
    alpha = stats.adaptive_threshold(counts, alpha_base, cfg.rounds, eta)
    fdr_count = int(np.sum(fdr_p < alpha))
    combined = stats.combined_evidence(bias, raw_p, alpha)
    persistence = stats.bias_persistence(float(bias.max()), cfg.rounds)
    clusters = stats.cluster_patterns(freq.a, freq.b, bias, raw_p)

    anomalies = set()
    if g.pvalue < stats.GLOBAL_ANOMALY_P:
        anomalies.add("global_distribution")
    if persistence[2]:
        anomalies.add("bias_persistence")
    if combined.alert:
        anomalies.add("combined_significance")
    if fdr_count >= 1:
        anomalies.add("critical_alert")

    return AnalysisResult(
        config=cfg,
        freq=freq,
        n_cells=n_cells,
        p_exp=p_exp,
        expected_count=expected,
        bias=bias,
        chi2=chi2,
        raw_p=raw_p,
        fdr_p=fdr_p,
        holm_p=holm_p,
        bonferroni_p=bonf_p,
        distribution=dist,
        chi2_gof=gof,
        g_test=g,
        adaptive_alpha=alpha,
        fdr_significant_count=fdr_count,
        combined=combined,
        persistence=persistence,
        clusters=clusters,
        anomalies=frozenset(anomalies),
        sprt_outcome=sprt_outcome,
        alpha_base=alpha_base,
        eta=eta,
        categories=stats.categorize(bias, raw_p),
    )


@dataclass
class ScanResult:
    outcome: stats.SPRTResult
    candidate: tuple  # (a bytes, b bytes) chosen from the first batch
    candidate_count: int  # its count in the first batch
    freq: FrequencyMap  # every trial sampled, first batch included
    p0: float
    p1: float


def sequential_scan(
    cfg: ExperimentConfig,
    batch: int = 100_000,
    alpha: float = 0.05,
    beta: float = 0.2,
    p1_factor: float = 1.5,
    workers: int | None = None,
    finish_budget: bool = False,
) -> ScanResult:
    """Pick the most frequent pair in a first batch, then run an SPRT on fresh batches.

    Testing the candidate on the same trials that selected it would bias the
    test toward H1, so the first batch is used for selection only. With
    ``finish_budget`` the remaining trials up to cfg.trials are still sampled
    after an accept_h0 or undecided outcome (used by ``analyze --sprt``, which
    only stops early on accept_h1).
    """
    if batch <= 0:
        raise ValueError("batch size must be positive")
    total = cfg.trials
    first = run_trials(replace(cfg, trials=min(batch, total)), workers=workers)
    maps = [first]
    i = int(np.argmax(first.counts))
    candidate = (first.a[i].tobytes(), first.b[i].tobytes())
    p0 = stats.expected_probability(cfg.masks.k_in, cfg.masks.k_out)
    p1 = p1_factor * p0
    done = [first.total_trials]

    def batches():
        while done[0] < total:
            size = min(batch, total - done[0])
            fm = run_trials(replace(cfg, trials=size), workers=workers, start=done[0])
            maps.append(fm)
            done[0] += size
            yield fm[candidate], fm.trials_used

    outcome = stats.sprt(batches(), p0, p1, alpha, beta)
    if finish_budget and outcome.decision != "accept_h1" and done[0] < total:
        maps.append(run_trials(replace(cfg, trials=total - done[0]), workers=workers, start=done[0]))
    return ScanResult(outcome, candidate, int(first.counts[i]), merge(maps), p0, p1)
