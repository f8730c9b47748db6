"""Command-line entry point: ``kuzcdiff <subcommand> ...``.

Exit codes: 0 clean, 1 usage/configuration error (or a configuration that
failed while running), 2 at least one CRITICAL ALERT in an analyze run.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import __version__, report
from .analysis import analyze as run_analysis, sequential_scan
from .cdiff import INNER, OUTER, full_spectrum, invert_permutation, load_permutation_file
from .cipher import SBOX, decrypt, encrypt, key_schedule, master_key_from_hex, state_from_hex
from .sampler import (
    ExperimentConfig,
    MaskConfig,
    default_masks,
    default_workers,
    parse_mask,
    run_trials,
)

log = logging.getLogger("kuzcdiff")

EXIT_OK, EXIT_USAGE, EXIT_ALERT = 0, 1, 2
DEFAULT_C = (0x01, 0x02, 0x03, 0x04, 0x91, 0xBE, 0xE1)
DEFAULT_TRIALS = 5_000_000
DEFAULT_BATCH = 100_000


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _hex_byte(text: str) -> int:
    s = text.strip().lower()
    s = s[2:] if s.startswith("0x") else s
    try:
        v = int(s, 16)
    except ValueError:
        raise UsageError(f"c value {text!r} is not a hex byte") from None
    if not 0 <= v <= 255 or not s:
        raise UsageError(f"c value {text!r} is outside 00..ff")
    return v


@dataclass
class RunPlan:
    rounds_list: list = field(default_factory=lambda: [9])
    c_list: list = field(default_factory=lambda: list(DEFAULT_C))
    mask_list: list = field(default_factory=default_masks)
    trials: int = DEFAULT_TRIALS
    seed: int = 0
    master_key: bytes | None = None
    workers: int = 1
    alpha_base: float = 0.05
    eta: float = 0.1
    output_dir: Path = Path("results")
    c_scope: str = "all"
    c_vector: bytes | None = None
    sprt: bool = False
    batch: int = DEFAULT_BATCH
    fmt: str = "text"
    jobs: int = 1

    def validate(self):
        if not self.rounds_list or not self.c_list or not self.mask_list:
            raise UsageError("rounds, c and mask lists must all be non-empty")
        for r in self.rounds_list:
            if not 1 <= r <= 9:
                raise UsageError(f"rounds must be in 1..9, got {r}")
        if self.trials < 1:
            raise UsageError("trials must be >= 1")
        if self.workers < 1 or self.jobs < 1:
            raise UsageError("workers and jobs must be >= 1")
        if not 0 < self.alpha_base < 1:
            raise UsageError("alpha-base must be in (0, 1)")
        if self.eta < 0:
            raise UsageError("eta must be >= 0")
        if self.batch < 1:
            raise UsageError("batch must be >= 1")
        if self.c_scope not in ("all", "active"):
            raise UsageError("c-scope must be 'all' or 'active'")

    def configs(self) -> list[ExperimentConfig]:
        out = []
        for r in self.rounds_list:
            for c in self.c_list:
                for m in self.mask_list:
                    if self.c_vector is not None:
                        key = self.master_key
                        cfg = ExperimentConfig.from_scalar(r, 1, m, self.trials, self.seed, key)
                        cfg = replace(cfg, c_vector=self.c_vector, c=None)
                    else:
                        cfg = ExperimentConfig.from_scalar(r, c, m, self.trials, self.seed, self.master_key, self.c_scope)
                    out.append(cfg)
        return out


# ---------------------------------------------------------------- plan assembly

def _load_config_file(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    return data


_FILE_KEYS = {
    "rounds", "c", "masks", "trials", "seed", "key", "workers", "alpha_base", "eta",
    "out", "sprt", "batch", "format", "c_scope", "c_vector", "jobs",
}


def build_plan(args) -> RunPlan:
    """Merge the optional JSON config file with flags; flags win."""
    data = _load_config_file(args.config) if args.config else {}
    unknown = set(data) - _FILE_KEYS
    if unknown:
        raise UsageError(f"unknown config file keys: {', '.join(sorted(unknown))}")

    def pick(flag, key, default):
        v = getattr(args, flag)
        if v is not None:
            return v
        return data.get(key, default)

    def as_list(v):
        return v if isinstance(v, list) else [v]

    plan = RunPlan()
    try:
        plan.rounds_list = [int(r) for r in as_list(pick("rounds", "rounds", plan.rounds_list))]
        plan.c_list = [c if isinstance(c, int) else _hex_byte(str(c)) for c in as_list(pick("c", "c", plan.c_list))]
        masks = pick("mask", "masks", None)
        plan.mask_list = [m if isinstance(m, MaskConfig) else parse_mask(m) for m in as_list(masks)] if masks else default_masks()
        plan.trials = int(pick("trials", "trials", plan.trials))
        plan.seed = int(pick("seed", "seed", plan.seed))
        key = pick("key", "key", None)
        plan.master_key = master_key_from_hex(key) if key else None
        plan.workers = int(pick("workers", "workers", None) or default_workers())
        plan.alpha_base = float(pick("alpha_base", "alpha_base", plan.alpha_base))
        plan.eta = float(pick("eta", "eta", plan.eta))
        plan.output_dir = Path(pick("out", "out", str(plan.output_dir)))
        plan.c_scope = pick("c_scope", "c_scope", plan.c_scope)
        vec = pick("c_vector", "c_vector", None)
        plan.c_vector = state_from_hex(vec) if vec else None
        plan.sprt = bool(args.sprt or data.get("sprt", False))
        plan.batch = int(pick("batch", "batch", plan.batch))
        plan.fmt = pick("format", "format", plan.fmt)
        plan.jobs = int(pick("jobs", "jobs", plan.jobs))
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    if plan.fmt not in ("text", "json", "csv"):
        raise UsageError(f"format must be text, json or csv, got {plan.fmt!r}")
    if plan.c_vector is not None:
        plan.c_list = [None]
    plan.validate()
    return plan


# ---------------------------------------------------------------- analyze

def _run_one(cfg: ExperimentConfig, plan: RunPlan, workers: int):
    """Sample, analyze and export one configuration; returns (summary row, critical?)."""
    sprt_outcome = None
    if plan.sprt:
        scan = sequential_scan(cfg, batch=plan.batch, workers=workers, finish_budget=True)
        freq, sprt_outcome = scan.freq, scan.outcome
        cfg = replace(cfg, trials=freq.total_trials)
    else:
        freq = run_trials(cfg, workers=workers)
    res = run_analysis(freq, cfg, plan.alpha_base, plan.eta, sprt_outcome)
    report.export_results(res, plan.output_dir)
    return report.summary_row(res), "critical_alert" in res.anomalies, cfg.trials


def _run_one_job(args):
    cfg, plan = args
    try:
        return _run_one(cfg, plan, 1), None
    except Exception as exc:  # collected so one failure does not sink the matrix
        return None, f"{type(exc).__name__}: {exc}"


def cmd_analyze(args) -> int:
    plan = build_plan(args)
    configs = plan.configs()
    log.info("running %d configuration(s), %d trials each, %d worker(s)", len(configs), plan.trials, plan.workers)
    rows, failures, critical = [], [], False
    if plan.jobs > 1:
        with ProcessPoolExecutor(max_workers=plan.jobs) as pool:
            outcomes = list(pool.map(_run_one_job, [(c, plan) for c in configs]))
    else:
        outcomes = []
        for cfg in configs:
            try:
                outcomes.append((_run_one(cfg, plan, plan.workers), None))
            except Exception as exc:
                outcomes.append((None, f"{type(exc).__name__}: {exc}"))
    for cfg, (done, err) in zip(configs, outcomes):
        label = report.file_stem(cfg)
        if err is not None:
            failures.append((label, err))
            log.error("%s failed: %s", label, err)
            continue
        row, crit, used = done
        rows.append(row)
        critical |= crit
        if plan.sprt and used != cfg.trials:
            print(f"{label}: SPRT stopped early after {used:,} trials", file=sys.stderr)

    summary = {
        "text": report.summary_table(rows),
        "csv": report.summary_csv(rows),
        "json": report.summary_json(rows),
    }
    ext = {"text": "txt", "csv": "csv", "json": "json"}[plan.fmt]
    report._write(plan.output_dir / f"summary.{ext}", summary[plan.fmt])
    sys.stdout.write(summary[plan.fmt])
    for label, err in failures:
        print(f"FAILED {label}: {err}", file=sys.stderr)
    if failures:
        return EXIT_USAGE
    return EXIT_ALERT if critical else EXIT_OK


# ---------------------------------------------------------------- sprt-scan

def cmd_sprt_scan(args) -> int:
    plan = build_plan(args)
    if len(plan.rounds_list) != 1 or len(plan.c_list) != 1 or len(plan.mask_list) != 1:
        raise UsageError("sprt-scan takes exactly one rounds value, one c and one mask")
    cfg = plan.configs()[0]
    cfg = replace(cfg, trials=args.max_trials)
    scan = sequential_scan(cfg, batch=plan.batch, alpha=args.alpha, beta=args.beta,
                           p1_factor=args.p1_factor, workers=plan.workers)
    s = scan.outcome
    doc = {
        "config": cfg.to_dict(),
        "candidate": {"a": scan.candidate[0].hex(), "b": scan.candidate[1].hex(),
                      "first_batch_count": scan.candidate_count},
        "p0": scan.p0, "p1": scan.p1,
        "decision": s.decision,
        "trials_at_decision": s.n_at_decision,
        "trials_sampled": scan.freq.total_trials,
        "boundaries": [s.upper, s.lower],
        "llr_trace": list(s.llr_trace),
    }
    if plan.fmt == "json":
        sys.stdout.write(json.dumps(doc, indent=1) + "\n")
    elif plan.fmt == "csv":
        sys.stdout.write("batch,trials,llr\n")
        for k, llr in enumerate(s.llr_trace, 1):
            sys.stdout.write(f"{k},{min(plan.batch * (k + 1), scan.freq.total_trials)},{llr!r}\n")
    else:
        print(f"SPRT scan: {cfg.rounds} rounds, {cfg.c_label}, {cfg.masks.name}")
        print(f"  Candidate (from first {min(plan.batch, cfg.trials):,} trials): "
              f"0x{scan.candidate[0].hex()} -> 0x{scan.candidate[1].hex()} (count {scan.candidate_count})")
        print(f"  p0={scan.p0:.4e}  p1={scan.p1:.4e}  A={s.upper:.4f}  B={s.lower:.4f}")
        print(f"  Decision: {s.decision} after {s.n_at_decision:,} test trials "
              f"({scan.freq.total_trials:,} sampled of {cfg.trials:,} max)")
        for k, llr in enumerate(s.llr_trace, 1):
            print(f"    batch {k:>3}: LLR={llr:+.4f}")
    return EXIT_OK


# ---------------------------------------------------------------- cipher / tables

def cmd_crypt(args) -> int:
    try:
        key = master_key_from_hex(args.key)
        block = state_from_hex(args.block)
        if not 1 <= args.rounds <= 9:
            raise ValueError(f"rounds must be in 1..9, got {args.rounds}")
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rk = key_schedule(key)
    fn = encrypt if args.command == "encrypt" else decrypt
    print(fn(block, rk, args.rounds).hex())
    return EXIT_OK


def spectrum_text(spec: dict) -> str:
    """Five column groups of (decimal, hex, delta), 51 rows, like a printed table."""
    rows = 51
    lines = [" | ".join(["  c  hex   d"] * 5)]
    for i in range(rows):
        cells = []
        for g in range(5):
            c = 1 + i + g * rows
            cells.append(f"{c:3d} 0x{c:02x} {spec[c]:3d}")
        lines.append(" | ".join(cells))
    return "\n".join(lines) + "\n"


def cmd_cdu_table(args) -> int:
    if args.target == "sbox":
        perm = SBOX
    elif args.target == "sbox-inv":
        perm = invert_permutation(SBOX)
    else:
        try:
            perm = load_permutation_file(args.target)
        except OSError as exc:
            raise UsageError(f"cannot read {args.target}: {exc.strerror}") from None
        except ValueError as exc:
            raise UsageError(f"{args.target}: {exc}") from None
    spec = full_spectrum(perm, args.orientation)
    if args.format == "csv":
        sys.stdout.write("c_hex,delta\n" + "".join(f"0x{c:02x},{d}\n" for c, d in spec.items()))
    elif args.format == "json":
        sys.stdout.write(json.dumps({f"0x{c:02x}": d for c, d in spec.items()}, indent=1) + "\n")
    else:
        sys.stdout.write(spectrum_text(spec))
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _add_plan_flags(p: argparse.ArgumentParser, single: bool = False):
    p.add_argument("--config", help="JSON file with plan fields; flags override it")
    p.add_argument("--rounds", type=int, action=None if single else "append", help="rounds (1..9); repeatable")
    p.add_argument("--c", action="append", type=_hex_byte_arg, help="multiplier as a hex byte; repeatable")
    p.add_argument("--mask", action="append", help='mask name (e.g. byte_8, byte_0->byte_1) or "in=16,17;out=16,17"; repeatable')
    p.add_argument("--c-scope", choices=("all", "active"), default=None,
                   help="apply c to all 16 bytes (default) or only active input bytes (0x01 elsewhere)")
    p.add_argument("--c-vector", default=None, help="expert mode: full 16-byte multiplier vector as 32 hex chars")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--key", default=None, help="master key, 64 hex chars (default: derived from the seed)")
    p.add_argument("--workers", type=int, default=None, help="sampler processes (env KUZCDIFF_WORKERS)")
    p.add_argument("--alpha-base", type=float, default=None)
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--batch", type=int, default=None, help=f"SPRT batch size (default {DEFAULT_BATCH:,})")
    p.add_argument("--format", choices=("text", "json", "csv"), default=None)


def _hex_byte_arg(text: str) -> int:
    try:
        return _hex_byte(text)
    except UsageError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kuzcdiff", description="Truncated inner c-differential analysis of Kuznyechik.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name in ("encrypt", "decrypt"):
        p = sub.add_parser(name, help=f"{name} one block")
        p.add_argument("block", help="block as 32 hex chars")
        p.add_argument("--key", required=True, help="master key as 64 hex chars")
        p.add_argument("--rounds", type=int, default=9)
        p.set_defaults(func=cmd_crypt)

    p = sub.add_parser("cdu-table", help="c-differential uniformity spectrum of an 8-bit permutation")
    p.add_argument("--target", default="sbox", help="sbox, sbox-inv, or a file with 256 integers")
    p.add_argument("--orientation", choices=(INNER, OUTER), default=INNER)
    p.add_argument("--format", choices=("text", "csv", "json"), default="text")
    p.set_defaults(func=cmd_cdu_table)

    p = sub.add_parser("analyze", help="run the (rounds x c x mask) experiment matrix")
    _add_plan_flags(p)
    p.add_argument("--trials", type=int, default=None, help=f"trials per configuration (default {DEFAULT_TRIALS:,})")
    p.add_argument("--out", default=None, help="output directory (default ./results)")
    p.add_argument("--sprt", action="store_true", help="sample in batches and stop early once the SPRT accepts H1")
    p.add_argument("--jobs", type=int, default=None, help="configurations run in parallel (each with one worker)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sprt-scan", help="sequential test on one configuration")
    _add_plan_flags(p, single=True)
    p.add_argument("--max-trials", type=int, default=DEFAULT_TRIALS)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--beta", type=float, default=0.2)
    p.add_argument("--p1-factor", type=float, default=1.5, help="alternative rate as a multiple of P_exp")
    p.set_defaults(func=cmd_sprt_scan, trials=None, out=None, sprt=False, jobs=None)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"kuzcdiff: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"kuzcdiff: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
