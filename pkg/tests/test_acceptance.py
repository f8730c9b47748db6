"""Acceptance criteria, one test per criterion, each at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v`` (lines are repeated in the
terminal summary) or directly with ``python tests/test_acceptance.py``.
"""

import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from acceptance_log import record  # noqa: E402
from reference_spectra import SBOX_INNER_DELTA, SBOX_INV_INNER_DELTA  # noqa: E402

from kuzcdiff import stats  # noqa: E402
from kuzcdiff.analysis import analyze  # noqa: E402
from kuzcdiff.cdiff import full_spectrum, inner_cddt, invert_permutation, outer_cddt, verify_duality  # noqa: E402
from kuzcdiff.cipher import (  # noqa: E402
    SBOX, decrypt_blocks, encrypt, encrypt_blocks, key_schedule, key_schedule_many, master_key_from_hex,
    state_from_hex,
)
from kuzcdiff.gf256 import MUL, gf_inv  # noqa: E402
from kuzcdiff.report import detailed_report  # noqa: E402
from kuzcdiff.sampler import ExperimentConfig, byte_mask, run_trials  # noqa: E402

RFC_KEY = "8899aabbccddeeff0011223344556677fedcba98765432100123456789abcdef"
RFC_PT = "1122334455667700ffeeddccbbaa9988"
RFC_CT = "7f679d90bebc24305a468d42b9d4edcd"
RFC_ROUND_KEYS = [
    "8899aabbccddeeff0011223344556677", "fedcba98765432100123456789abcdef",
    "db31485315694343228d6aef8cc78c44", "3d4553d8e9cfec6815ebadc40a9ffd04",
    "57646468c44a5e28d3e59246f429f1ac", "bd079435165c6432b532e82834da581b",
    "51e640757e8745de705727265a0098b1", "5a7925017b9fdd3ed72a91a22286f984",
    "bb44e25378c73123a5f32f73cdb6e517", "72e9dd7416bcf45b755dbaa88e4a4043",
]
SEED = 2024

# every frequency map and analysis produced below, for the invariant criterion
RUN_MAPS = []
RUN_RESULTS = []


def sample(cfg, workers=1):
    fm = run_trials(cfg, workers=workers)
    RUN_MAPS.append((cfg.trials, fm))
    return fm


def analyzed(fm, cfg):
    res = analyze(fm, cfg)
    RUN_RESULTS.append(res)
    return res


def test_criterion_1_cipher():
    t0 = time.perf_counter()
    rk = key_schedule(master_key_from_hex(RFC_KEY))
    vec_ok = rk.hex() == RFC_ROUND_KEYS and encrypt(state_from_hex(RFC_PT), rk).hex() == RFC_CT
    rng = np.random.default_rng(SEED)
    keys = rng.integers(0, 256, size=(10_000, 32), dtype=np.uint8)
    blocks = rng.integers(0, 256, size=(10_000, 16), dtype=np.uint8)
    rks = key_schedule_many(keys)
    round_ok = all(
        np.array_equal(decrypt_blocks(encrypt_blocks(blocks, rks, r), rks, r), blocks) for r in range(1, 10)
    )
    elapsed = time.perf_counter() - t0
    ok = vec_ok and round_ok and elapsed < 10
    record(1, "cipher correctness", ok,
           f"RFC vectors {'ok' if vec_ok else 'MISMATCH'}, 10^4 pairs x 9 round counts round-trip "
           f"{'ok' if round_ok else 'FAILED'}, {elapsed:.2f}s (< 10s)")
    assert ok


def test_criterion_2_reference_tables():
    t0 = time.perf_counter()
    fwd = full_spectrum(SBOX, "inner")
    inv = full_spectrum(invert_permutation(SBOX), "inner")
    elapsed = time.perf_counter() - t0
    bad_f = [c for c in range(1, 256) if fwd[c] != SBOX_INNER_DELTA[c]]
    bad_i = [c for c in range(1, 256) if inv[c] != SBOX_INV_INNER_DELTA[c]]
    anchors = {1: 8, 2: 64, 3: 21, 4: 33, 0x91: 33, 0xBE: 21, 0xE1: 64}
    anchors_inv = {1: 8, 2: 9, 0xE1: 9}
    anchor_ok = all(fwd[c] == v for c, v in anchors.items()) and all(inv[c] == v for c, v in anchors_inv.items())
    ok = not bad_f and not bad_i and anchor_ok and elapsed < 60
    record(2, "c-differential uniformity tables", ok,
           f"S-box {255 - len(bad_f)}/255, inverse {255 - len(bad_i)}/255 exact, anchors "
           f"{'ok' if anchor_ok else 'MISMATCH'}, {elapsed:.2f}s (< 60s)")
    assert ok


def test_criterion_3_duality():
    t0 = time.perf_counter()
    perms = [SBOX] + [np.random.default_rng(seed).permutation(256) for seed in range(10)]
    results = [verify_duality(p) for p in perms]
    elapsed = time.perf_counter() - t0
    ok = all(results) and elapsed < 60
    record(3, "duality outer(F) == inner(F^-1)^T", ok,
           f"{sum(results)}/{len(results)} permutations exhaustive over c=1..255, {elapsed:.2f}s (< 60s)")
    assert ok


def test_criterion_4_expected_probability_model():
    masks = byte_mask(8, 8)
    space = stats.pair_space(masks.k_in, masks.k_out)
    cfg = ExperimentConfig.from_scalar(9, 0x04, masks, 5_000_000, SEED)
    t0 = time.perf_counter()
    fm = sample(cfg, workers=None)
    elapsed = time.perf_counter() - t0
    mean = fm.counts.mean()
    target = fm.trials_used / space
    rel = abs(mean - target) / target
    ok = space == 65280 and rel < 0.02
    record(4, "expected-probability model (5e6 trials, full scale)", ok,
           f"pair space {space:,}, observed pairs {len(fm):,}, mean count {mean:.2f} vs "
           f"trials_used/65280 = {target:.2f} (rel. diff {rel:.4%} < 2%), {elapsed:.0f}s")
    assert ok


def test_criterion_5_low_round_distinguisher():
    cfg = ExperimentConfig.from_scalar(1, 0x01, byte_mask(2, 2), 1_000_000, SEED)
    t0 = time.perf_counter()
    res = analyzed(sample(cfg, workers=None), cfg)
    elapsed = time.perf_counter() - t0
    ok = res.g_test.pvalue < 1e-10 and res.fdr_significant_count >= 500 and res.max_bias >= 5 and elapsed < 900
    record(5, "1-round c=0x01 byte_2 distinguisher (10^6 trials)", ok,
           f"G-test p={res.g_test.pvalue:.2e} (< 1e-10), FDR-significant {res.fdr_significant_count:,} (>= 500) "
           f"at alpha={res.adaptive_alpha:.4f}, max bias {res.max_bias:.2f} (>= 5), {elapsed:.0f}s")
    assert ok


def test_criterion_6_high_round_pipeline():
    cfg = ExperimentConfig.from_scalar(9, 0x04, byte_mask(8, 8), 500_000, SEED)
    t0 = time.perf_counter()
    fm = sample(cfg, workers=None)
    res = analyzed(fm, cfg)
    text = detailed_report(res)
    elapsed = time.perf_counter() - t0
    nz = fm.counts[fm.counts > 0]
    iqr = np.percentile(nz, 75) - np.percentile(nz, 25)
    alpha_formula = min(0.05 * 1.4 * (1 + 0.1 * iqr / math.sqrt(len(nz))), 0.15)
    sections = ["DISTRIBUTION PROPERTIES", "ENHANCED BIAS METRICS", "NORMALITY TESTS", "GOODNESS-OF-FIT TESTS",
                "CLUSTER ANALYSIS", "UNCORRECTED SIGNIFICANT PAIRS", "SIGNIFICANT DIFFERENTIAL PAIRS"]
    pos = [text.find(s) for s in sections]
    sections_ok = all(p >= 0 for p in pos) and pos == sorted(pos)
    bias_ok = 1.0 <= res.max_bias <= 3.0
    alpha_ok = res.adaptive_alpha == pytest.approx(alpha_formula, rel=1e-12)
    ok = bias_ok and alpha_ok and sections_ok and elapsed < 1800
    record(6, "9-round c=0x04 byte_8 pipeline (5e5 trials, seed-derived key)", ok,
           f"max bias {res.max_bias:.3f} in [1.0, 3.0]: {bias_ok}; adaptive alpha {res.adaptive_alpha:.5f} == "
           f"formula {alpha_formula:.5f}: {alpha_ok}; all report sections in order: {sections_ok}; {elapsed:.0f}s")
    assert ok


def test_criterion_7_statistical_primitives():
    from statsmodels.stats.multitest import multipletests

    a, b = stats.sprt_boundaries(0.05, 0.2)
    sprt_ok = abs(a - math.log(16)) < 1e-4 and abs(b - math.log(0.2 / 0.95)) < 1e-4
    _, ratio, _ = stats.bias_persistence(1.70, 9)
    persist_ok = abs(ratio - 13.6) <= 0.05
    vectors = [
        [0.01, 0.02, 0.03, 0.04, 0.05],
        [0.01, 0.04],
        [0.001, 0.2, 0.03, 0.03, 0.9, 0.04],
        [0.5, 0.5, 0.01],
        [1.0, 0.0001, 0.02, 0.7],
    ]
    corr_ok = all(
        np.allclose(fn(v), multipletests(v, method=m)[1], atol=1e-12)
        for v in vectors
        for m, fn in (("fdr_bh", stats.benjamini_hochberg), ("holm", stats.holm), ("bonferroni", stats.bonferroni))
    )
    corr_ok &= np.allclose(stats.benjamini_hochberg(vectors[0]), [0.05] * 5)
    corr_ok &= np.allclose(stats.holm([0.01, 0.04]), [0.02, 0.04])
    corr_ok &= np.allclose(stats.bonferroni([0.01, 0.2]), [0.02, 0.4])
    stat, p = stats.fisher_combine([0.05, 0.05])
    oracle = math.exp(-stat / 2) * (1 + stat / 2)  # chi-square(4) upper tail in closed form
    fisher_ok = abs(p - 0.0175) <= 0.0005 and abs(p - oracle) < 1e-12
    ok = sprt_ok and persist_ok and corr_ok and fisher_ok
    record(7, "statistical primitives", ok,
           f"SPRT A={a:.4f} B={b:.4f}; persistence ratio {ratio:.2f}; corrections on 5 vectors "
           f"{'ok' if corr_ok else 'MISMATCH'}; Fisher p={p:.5f}")
    assert ok


def test_criterion_8_parallel_determinism(tmp_path):
    from kuzcdiff.cli import main

    blobs = []
    for w in (1, 2, 8):
        out = tmp_path / f"w{w}"
        main(["analyze", "--rounds", "9", "--c", "04", "--mask", "byte_8", "--trials", "100000",
              "--seed", str(SEED), "--workers", str(w), "--out", str(out)])
        blobs.append((out / "9r_0x04_byte_8_in_to_byte_8_out.json").read_bytes())
    ok = blobs[0] == blobs[1] == blobs[2]
    record(8, "determinism under parallelism", ok,
           f"JSON exports with 1/2/8 workers byte-identical: {ok} ({len(blobs[0]):,} bytes)")
    assert ok


def test_criterion_9_invariants():
    gf_ok = np.array_equal(MUL, MUL.T) and all(MUL[a, gf_inv(a)] == 1 for a in range(1, 256))
    rows_ok = all(
        (build(SBOX, c).counts.sum(axis=1) == 256).all() for c in range(256) for build in (inner_cddt, outer_cddt)
    )
    if not RUN_MAPS:
        # run standalone: produce a few maps of our own
        for r in (1, 5):
            cfg = ExperimentConfig.from_scalar(r, 0x02, byte_mask(4, 4), 50_000, SEED)
            analyzed(sample(cfg), cfg)
    cons_ok = all(int(fm.counts.sum()) + fm.trials_skipped == n for n, fm in RUN_MAPS)
    order_ok = all(
        (r.raw_p <= r.fdr_p).all() and (r.fdr_p <= r.bonferroni_p).all()
        and (r.raw_p <= r.holm_p).all() and (r.holm_p <= r.bonferroni_p).all()
        for r in RUN_RESULTS
    )
    ok = gf_ok and rows_ok and cons_ok and order_ok
    record(9, "invariant suites", ok,
           f"GF commutativity/inverses {gf_ok}; cDDT row sums (256 c x 2 orientations) {rows_ok}; "
           f"conservation on {len(RUN_MAPS)} runs {cons_ok}; raw<=FDR<=Bonferroni on {len(RUN_RESULTS)} analyses {order_ok}")
    assert ok


if __name__ == "__main__":
    import tempfile

    failures = 0
    for name, fn in list(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                if "tmp_path" in fn.__code__.co_varnames[: fn.__code__.co_argcount]:
                    with tempfile.TemporaryDirectory() as d:
                        fn(Path(d))
                else:
                    fn()
            except AssertionError:
                failures += 1
    sys.exit(1 if failures else 0)
