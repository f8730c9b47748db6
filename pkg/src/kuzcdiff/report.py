"""Text reports, summary tables and JSON/CSV export."""

from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import AnalysisResult, analyze
from .sampler import ExperimentConfig, FrequencyMap

RULE = "=" * 80
FDR_MARK, CE_MARK = "FDR*", "CE*"
FDR_MARK_UNICODE, CE_MARK_UNICODE = "‡", "†"


def fmt_p(p: float) -> str:
    return f"{p:.2e}"


def fmt_bias(b: float) -> str:
    return f"{b:.1f}x"


def hex_state(row) -> str:
    return "0x" + bytes(row).hex()


def _pair_line(res: AnalysisResult, i: int, bias_digits: int = 2) -> str:
    return (
        f"{hex_state(res.freq.a[i])} -> {hex_state(res.freq.b[i])} "
        f"(Bias: {res.bias[i]:.{bias_digits}f}x, p: {res.raw_p[i]:.3f})"
    )


def _header_c(cfg: ExperimentConfig) -> str:
    return f"c={hex(cfg.c)}" if cfg.c is not None else f"c={cfg.c_label}"


def _by(values: np.ndarray, subset: np.ndarray | None = None, descending: bool = False) -> np.ndarray:
    """Indices sorted by value with index as tie-break, so output never depends on sort stability."""
    idx = np.arange(len(values)) if subset is None else np.asarray(subset)
    key = -values[idx] if descending else values[idx]
    return idx[np.lexsort((idx, key))]


def detailed_report(res: AnalysisResult) -> str:
    cfg = res.config
    d = res.distribution
    out = [
        RULE,
        f"DETAILED STATISTICAL ANALYSIS for {_header_c(cfg)}, {cfg.masks.name}",
        RULE,
        f"Rounds: {cfg.rounds}  Trials: {res.freq.total_trials:,} (used {res.freq.trials_used:,}, "
        f"skipped {res.freq.trials_skipped:,})  Seed: {cfg.seed}",
        f"Master key: {cfg.master_key.hex()}",
        "",
        "DISTRIBUTION PROPERTIES:",
        f"  Total unique pairs observed: {d.n_pairs:,}",
        f"  Possible pairs: {res.n_cells:,}  Expected count per pair: {res.expected_count:.2f}",
        f"  Mean/Median/Std Dev count: {d.mean:.2f} / {d.median:.2f} / {d.std_dev:.2f}",
        f"  Max/Min count: {d.max} / {d.min}",
        f"  Skewness/Kurtosis: {d.skewness:.3f} / {d.kurtosis:.3f}",
        "",
        "ENHANCED BIAS METRICS:",
        f"  KL Divergence: {d.kl_divergence:.6f}",
        f"  Max Chi-square: {d.max_chi2:.2f}",
        f"  Relative Entropy: {d.relative_entropy:.3f}",
        f"  Max Bias: {fmt_bias(res.max_bias)}",
        "",
        "NORMALITY TESTS (on the distribution of observed counts):",
    ]
    if d.shapiro is None:
        out.append(f"  Shapiro-Wilk Test: Skipped. Reason: {d.shapiro_skip_reason}")
    else:
        out.append(f"  Shapiro-Wilk Test: Statistic={d.shapiro[0]:.4f}, P-value={fmt_p(d.shapiro[1])}")
    ad_stat, crit, levels = d.anderson_darling
    out += [
        f"  Anderson-Darling Test: Statistic={ad_stat:.3f}",
        f"    Critical Values (Sig Levels): [{', '.join(f'{c:.3f}' for c in crit)}] "
        f"([{', '.join(f'{s:.1f}' for s in levels)}])",
        "    (Interpretation: Statistic > Critical Value at a given significance level suggests non-normal distribution)",
        "",
        "GOODNESS-OF-FIT TESTS (vs. Uniform Distribution):",
        f"  (Evaluates if the overall distribution of {res.n_cells:,} pairs is uniform. "
        f"Degrees of freedom: {res.chi2_gof.dof:,})",
        f"  Chi-square Test: Statistic={res.chi2_gof.statistic:,.2f}, P-value={res.chi2_gof.pvalue:.3e}",
        f"  G-test (Log-likelihood): Statistic={res.g_test.statistic:,.2f}, P-value={res.g_test.pvalue:.3e}",
        "    (Interpretation: A very small P-value, e.g., < 0.001, provides strong evidence that the cipher's",
        "     output for this configuration is not uniformly distributed as a whole.)",
        "",
        "CLUSTER ANALYSIS:",
    ]
    n_sig_clusters = sum(1 for c in res.clusters if c.combined_p < res.adaptive_alpha)
    out.append(f"  Found {len(res.clusters)} clusters, {n_sig_clusters} significant")
    for k, c in enumerate(res.clusters[:10], 1):
        out.append(f"  Cluster {k}: {c.member_count} members, combined p={c.combined_p:.3e}, avg bias={c.avg_bias:.2f}x")

    raw_sig = np.nonzero(res.raw_p < 0.05)[0]
    out += [
        "",
        "UNCORRECTED SIGNIFICANT PAIRS (raw p < 0.05, before FDR):",
        f"  Found {len(raw_sig)} pairs significant before correction",
    ]
    if len(raw_sig):
        out.append("  Top 5 by raw p-value:")
        for i in _by(res.raw_p, raw_sig)[:5]:
            out.append("    " + _pair_line(res, i))

    sig = res.fdr_significant()
    out += [
        "",
        f"SIGNIFICANT DIFFERENTIAL PAIRS (FDR-corrected p < {res.adaptive_alpha:.3e}):",
        "  (These are specific (Input Diff, Output Diff) pairs whose observed frequencies",
        "   are statistically different from expected, after multiple-test correction.)",
        f"  Found {len(sig)} significant pairs. Top 10 by corrected p-value:",
    ]
    if len(sig):
        out.append(f"  {'Input Diff (A)':<35}{'Output Diff (B)':<35}{'Obs Count':<11}{'Bias':<9}{'Corr P-val'}")
        out.append(f"  {'-' * 34} {'-' * 34} {'-' * 10} {'-' * 8} {'-' * 12}")
        for i in sig[:10]:
            out.append(
                f"  {hex_state(res.freq.a[i]):<35}{hex_state(res.freq.b[i]):<35}"
                f"{int(res.freq.counts[i]):<11}{fmt_bias(res.bias[i]):<9}{fmt_p(res.fdr_p[i])}"
            )

    if res.sprt_outcome is not None:
        s = res.sprt_outcome
        out += [
            "",
            "SEQUENTIAL TEST (SPRT):",
            f"  Decision: {s.decision} after {s.n_at_decision:,} trials",
            f"  Boundaries: A={s.upper:.4f}, B={s.lower:.4f}; final LLR={s.llr_trace[-1] if s.llr_trace else 0.0:.4f}",
        ]
    out.append(RULE)
    blocks = alerts(res)
    text = "\n".join(out) + "\n"
    if blocks:
        text += "\n" + "\n\n".join(blocks) + "\n"
    return text


def alerts(res: AnalysisResult) -> list[str]:
    """Alert blocks, one per anomaly flag, in a fixed order."""
    cfg = res.config
    where = f"   Config: {cfg.masks.name}, {_header_c(cfg)}"
    blocks = []
    if "global_distribution" in res.anomalies:
        blocks.append(
            "\n".join([
                f"GLOBAL DISTRIBUTION ANOMALY for {cfg.rounds} rounds",
                where,
                f"   G-test P-value={res.g_test.pvalue:.3e} (< 1e-03): output distribution is not uniform",
            ])
        )
    if "combined_significance" in res.anomalies:
        cm = res.categories["combined_moderate"]
        members = np.nonzero(cm)[0]
        lines = [
            f"COMBINED SIGNIFICANCE DETECTED for {cfg.rounds} rounds",
            where,
            f"   Found {len(members)} pairs with bias > 1.3 AND p < 0.1",
        ]
        for i in _by(res.bias, members, descending=True)[:3]:
            lines.append("     - " + _pair_line(res, i))
        for name in res.combined.alert_categories:
            stat, p = res.combined.fisher[name]
            lines.append(f"   Fisher combined p for {name} ({res.combined.tallies[name]} pairs): {fmt_p(p)}")
        blocks.append("\n".join(lines))
    if "bias_persistence" in res.anomalies:
        expected, ratio, _ = res.persistence
        blocks.append(
            "\n".join([
                f"BIAS PERSISTENCE ANOMALY for {cfg.rounds} rounds",
                where,
                f"   Observed bias: {res.max_bias:.2f}x vs Expected: {expected:.3f}x",
                f"   Ratio: {ratio:.1f}x higher than expected decay",
            ])
        )
    if "critical_alert" in res.anomalies:
        sig = res.fdr_significant()
        lines = [
            f"CRITICAL ALERT: Statistically significant characteristic found for {cfg.rounds} rounds!",
            where,
            f"   Found {res.fdr_significant_count} significant pairs (threshold: 1): Input->Output",
        ]
        for i in sig[:10]:
            lines.append(
                f"     {hex_state(res.freq.a[i])} -> {hex_state(res.freq.b[i])} "
                f"(Bias:{res.bias[i]:.1f}, p-val:{fmt_p(res.fdr_p[i])})"
            )
        blocks.append("\n".join(lines))
    return blocks


# ---------------------------------------------------------------- summary table

@dataclass(frozen=True)
class SummaryRow:
    marker: str  # "fdr_significant", "combined_evidence" or "none"
    rounds: int
    c: str
    config_name: str
    max_bias: float
    fdr_sig_count: int
    min_fdr_p: float


def summary_row(res: AnalysisResult) -> SummaryRow:
    if res.fdr_significant_count >= 1:
        marker = "fdr_significant"
    elif res.combined.alert:
        marker = "combined_evidence"
    else:
        marker = "none"
    return SummaryRow(marker, res.config.rounds, res.config.c_label, res.config.masks.name,
                      res.max_bias, res.fdr_significant_count, res.min_fdr_p)


def sort_rows(rows) -> list[SummaryRow]:
    return sorted(rows, key=lambda r: (r.min_fdr_p, r.c, r.config_name, r.rounds))


def _mark(marker: str, unicode: bool) -> str:
    if marker == "fdr_significant":
        return FDR_MARK_UNICODE if unicode else FDR_MARK
    if marker == "combined_evidence":
        return CE_MARK_UNICODE if unicode else CE_MARK
    return ""


def summary_table(rows, unicode: bool = False) -> str:
    fdr, ce = (FDR_MARK_UNICODE, CE_MARK_UNICODE) if unicode else (FDR_MARK, CE_MARK)
    head = f"{'Marker':<7}{'Rounds':<7}{'c':<7}{'Configuration':<30}{'Max Bias':<10}{'FDR Sig.':<10}{'Min FDR P-val'}"
    lines = [
        f"Legend: {fdr} significant after FDR correction; {ce} noteworthy by combined evidence (Fisher).",
        head,
        "-" * len(head),
    ]
    for r in sort_rows(rows):
        lines.append(
            f"{_mark(r.marker, unicode):<7}{r.rounds:<7}{r.c:<7}{r.config_name:<30}"
            f"{fmt_bias(r.max_bias):<10}{r.fdr_sig_count:<10}{fmt_p(r.min_fdr_p)}"
        )
    return "\n".join(lines) + "\n"


def summary_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["marker", "rounds", "c", "config_name", "max_bias", "fdr_sig_count", "min_fdr_p"])
    for r in sort_rows(rows):
        w.writerow([r.marker, r.rounds, r.c, r.config_name, repr(r.max_bias), r.fdr_sig_count, repr(r.min_fdr_p)])
    return buf.getvalue()


def summary_json(rows) -> str:
    return json.dumps([r.__dict__ for r in sort_rows(rows)], indent=1, sort_keys=True, default=_jsonable) + "\n"


# ---------------------------------------------------------------- export / import

def sanitize_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name.replace("->", "_to_"))


def file_stem(cfg: ExperimentConfig) -> str:
    return f"{cfg.rounds}r_{cfg.c_label}_{sanitize_name(cfg.masks.name)}"


def _jsonable(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return None if math.isnan(x) else x
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (frozenset, set)):
        return sorted(x)
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _floats(values) -> list:
    return [None if math.isnan(v) else v for v in np.asarray(values, dtype=np.float64).tolist()]


def result_document(res: AnalysisResult) -> dict:
    d = res.distribution
    doc = {
        "tool": "kuzcdiff",
        "version": __version__,
        "seed": res.config.seed,
        "config": res.config.to_dict(),
        "alpha_base": res.alpha_base,
        "eta": res.eta,
        "frequency_map": res.freq.to_json(),
        "pairs": {
            "expected": res.expected_count,
            "bias": _floats(res.bias),
            "chi2": _floats(res.chi2),
            "raw_p": _floats(res.raw_p),
            "fdr_p": _floats(res.fdr_p),
            "holm_p": _floats(res.holm_p),
            "bonferroni_p": _floats(res.bonferroni_p),
        },
        "distribution": {
            "n_pairs": d.n_pairs, "mean": d.mean, "median": d.median, "std_dev": d.std_dev,
            "max": d.max, "min": d.min, "skewness": d.skewness, "kurtosis": d.kurtosis,
            "kl_divergence": d.kl_divergence, "max_chi2": d.max_chi2, "relative_entropy": d.relative_entropy,
            "anderson_darling": {"statistic": _jsonable(d.anderson_darling[0]),
                                 "critical_values": list(d.anderson_darling[1]),
                                 "sig_levels": list(d.anderson_darling[2])},
            "shapiro": list(d.shapiro) if d.shapiro else None,
            "shapiro_skip_reason": d.shapiro_skip_reason,
        },
        "global_tests": {
            "n_cells": res.n_cells,
            "dof": res.chi2_gof.dof,
            "chi2_gof": [res.chi2_gof.statistic, res.chi2_gof.pvalue],
            "g_test": [res.g_test.statistic, res.g_test.pvalue],
        },
        "adaptive_alpha": res.adaptive_alpha,
        "fdr_significant_count": res.fdr_significant_count,
        "max_bias": res.max_bias,
        "min_fdr_p": res.min_fdr_p,
        "combined_evidence": {
            "tallies": res.combined.tallies,
            "fisher": {k: list(v) for k, v in res.combined.fisher.items()},
            "alert": res.combined.alert,
        },
        "bias_persistence": {"expected": res.persistence[0], "ratio": res.persistence[1], "flag": res.persistence[2]},
        "clusters": [
            {"member_count": c.member_count, "combined_p": c.combined_p, "avg_bias": c.avg_bias}
            for c in res.clusters
        ],
        "anomalies": sorted(res.anomalies),
        "sprt": None,
    }
    if res.sprt_outcome is not None:
        s = res.sprt_outcome
        doc["sprt"] = {"decision": s.decision, "n_at_decision": s.n_at_decision,
                       "llr_trace": list(s.llr_trace), "upper": s.upper, "lower": s.lower}
    return doc


def to_json(res: AnalysisResult) -> str:
    return json.dumps(result_document(res), indent=1, sort_keys=True, default=_jsonable) + "\n"


def to_csv(res: AnalysisResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["a", "b", "count", "expected", "bias", "chi2", "raw_p", "fdr_p", "holm_p", "bonferroni_p", "categories"])
    for i in range(len(res.bias)):
        cats = ";".join(sorted(k for k, v in res.categories.items() if v[i]))
        w.writerow([
            res.freq.a[i].tobytes().hex(), res.freq.b[i].tobytes().hex(), int(res.freq.counts[i]),
            repr(res.expected_count), repr(float(res.bias[i])), repr(float(res.chi2[i])),
            repr(float(res.raw_p[i])), repr(float(res.fdr_p[i])), repr(float(res.holm_p[i])),
            repr(float(res.bonferroni_p[i])), cats,
        ])
    return buf.getvalue()


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def export_results(res: AnalysisResult, out_dir) -> dict[str, Path]:
    """Write <stem>.txt, <stem>.json and <stem>.csv into out_dir."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror or exc}") from exc
    stem = file_stem(res.config)
    paths = {ext: out / f"{stem}.{ext}" for ext in ("txt", "json", "csv")}
    _write(paths["txt"], detailed_report(res))
    _write(paths["json"], to_json(res))
    _write(paths["csv"], to_csv(res))
    return paths


def load_results(path):
    """Read an exported JSON file back as (config, frequency map, alpha_base, eta)."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc
    cfg = ExperimentConfig.from_dict(doc["config"])
    return cfg, FrequencyMap.from_json(doc["frequency_map"]), doc["alpha_base"], doc["eta"]


def reanalyze(path) -> AnalysisResult:
    cfg, freq, alpha_base, eta = load_results(path)
    return analyze(freq, cfg, alpha_base, eta)
