"""Command-line front end.

Exit codes: 0 all checks passed, 1 usage error, 2 a statistical or
structural check failed, 3 capacity exceeded.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import bounds as B
from .coupling import BiasParams, CapacityError
from .enumeration import MAX_ENUM_LEN, enumerate_paths
from .offspring import OffspringDistribution, expected_epsilon, parse_spec
from .regeneration import RegenConfig
from .report import FAIL, INFO, PASS, Report, Row
from .sampling import (
    RunResult,
    run_replicas,
    run_until_segments,
    sample_conditioned,
    sample_y,
)
from .segments import (
    compare_tables,
    gap_estimator,
    lemma_audit,
    prob_table,
    rate_check,
    speed_gap,
    speed_regen,
)
from .stats import Estimate, combine

EXIT_OK, EXIT_USAGE, EXIT_STAT, EXIT_CAPACITY = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit with status 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _dist(text: str) -> OffspringDistribution:
    try:
        return parse_spec(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_common(p: argparse.ArgumentParser, steps: int, eps: float) -> None:
    p.add_argument("--dist", type=_dist, default=parse_spec("const:1"),
                   help='offspring law, "k1:w1,k2:w2,..." or "const:k"')
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--eps", type=float, default=eps)
    p.add_argument("--d", type=int, default=1, help="degree setting the integer walk's bias")
    p.add_argument("--steps", type=int, default=steps, help="steps per replica")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--regen-mode", choices=("strict", "nonstrict"), default="strict")
    p.add_argument("--margin", type=int, default=None, help="confirmation margin (levels)")
    _add_output(p)


def _add_output(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", type=Path, default=None, help="write OUT.csv and OUT.json")
    p.add_argument("--format", choices=("csv", "json"), default="csv", help="stdout format")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gwlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("bounds", help="closed-form bounds and thresholds")
    p.add_argument("--beta", type=float, nargs="+", default=None)
    p.add_argument("--beta-grid", type=float, nargs=3, metavar=("LO", "HI", "N"), default=None,
                   help="log-spaced grid of N values in [LO, HI]")
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--dist", type=_dist, default=parse_spec("const:1"))
    p.add_argument("--d", type=int, default=1)
    _add_output(p)

    p = sub.add_parser("simulate", help="speeds of both walks from replicated runs")
    _add_common(p, steps=10**6, eps=0.0)
    p.add_argument("--replicas", type=int, default=8)

    p = sub.add_parser("monotonicity", help="sign of the speed gap from regeneration segments")
    _add_common(p, steps=2**21, eps=1.0)
    p.add_argument("--segments", type=int, default=10**6)
    p.add_argument("--alpha", type=float, default=0.01, help="one-sided significance level")

    p = sub.add_parser("lemmas", help="audit of the lemma-level bounds")
    _add_common(p, steps=2**20, eps=1.0)
    p.add_argument("--segments", type=int, default=10**6)
    p.add_argument("--trials", type=int, default=10**5,
                   help="fresh runs for the unconditioned and rejection samples")

    p = sub.add_parser("rate", help="large-bias growth rate of the speed")
    _add_common(p, steps=2**21, eps=10.0)
    p.add_argument("--segments", type=int, default=10**6)

    p = sub.add_parser("enumerate", help="exhaustive tau_1 versus |B| table")
    p.add_argument("--max-len", type=int, default=16)
    p.add_argument("--mode", "--regen-mode", dest="mode", choices=("strict", "nonstrict"),
                   default="strict")
    _add_output(p)
    return parser


def _config(args) -> dict:
    cfg = {}
    for k, v in sorted(vars(args).items()):
        if k in ("out", "format", "func"):
            continue
        if isinstance(v, OffspringDistribution):
            v = v.to_spec()
        cfg[k] = v
    return cfg


def _params(args) -> BiasParams:
    if not args.d * args.beta > 1:
        raise UsageError(f"requires d*beta > 1, got d={args.d}, beta={args.beta}")
    if args.eps < 0:
        raise UsageError("eps must be nonnegative")
    if args.d > args.dist.min_degree:
        raise UsageError("--d exceeds the minimal offspring degree")
    if getattr(args, "steps", 1000) < 1000:
        raise UsageError("--steps must be at least 1000")
    return BiasParams(args.beta, args.eps, args.d)


def _regen(args) -> RegenConfig:
    return RegenConfig(args.regen_mode, args.margin)


def _seeds(master: int, run: RunResult) -> list:
    return [[master, r.index] for r in run.replicas]


def _invariant_rows(run: RunResult) -> list[Row]:
    return [Row(name, count, None, 0.0, None, PASS if count == 0 else FAIL)
            for name, count in sorted(run.invariants.items())]


def _est_row(name, est, target=None, nsigma=3.0) -> Row:
    if target is None:
        return Row(name, est.value, est.stderr, None, None, INFO)
    z = est.z(target)
    return Row(name, est.value, est.stderr, target, z, PASS if abs(z) <= nsigma else FAIL)


# ------------------------------------------------------------------ commands

def cmd_bounds(args) -> Report:
    if args.beta is None and args.beta_grid is None:
        raise UsageError("give --beta or --beta-grid")
    betas = list(args.beta or [])
    if args.beta_grid is not None:
        lo, hi, n = args.beta_grid
        if not (0 < lo < hi and n >= 2 and float(n).is_integer()):
            raise UsageError("--beta-grid needs 0 < LO < HI and integer N >= 2")
        betas += [float(b) for b in np.geomspace(lo, hi, int(n))]
    report = Report("bounds", _config(args))
    for beta in betas:
        if not args.d * beta > 1:
            raise UsageError(f"requires d*beta > 1, got d={args.d}, beta={beta}")
        r = B.bound_report(args.dist, beta, args.eps, args.d)
        group = f"beta={beta!r}"
        for name, value in r.as_dict().items():
            if name in ("beta", "eps", "d"):
                continue
            verdict = INFO
            if name == "C_paper" and value is not None:
                verdict = PASS if value < 1 else INFO
            if isinstance(value, bool):
                value = int(value)
            report.add(group, Row(name, value, verdict=verdict))
    for variant in ("paper", "direct"):
        t = B.threshold_search(args.d, variant)
        report.add("threshold", Row(f"{variant}/beta_star", t.beta, None, None, None,
                                    PASS if t.certified else FAIL))
        report.add("threshold", Row(f"{variant}/d_times_beta_star", t.beta * args.d))
    return report


def cmd_simulate(args) -> Report:
    params = _params(args)
    if args.replicas < 1:
        raise UsageError("--replicas must be >= 1")
    cfg = _regen(args)
    run = run_replicas(args.dist, params, args.steps, args.replicas, args.seed, cfg)
    report = Report("simulate", _config(args), _seeds(args.seed, run))
    summaries = run.summaries
    truth = {}
    if args.dist.is_point_mass:
        k = args.dist.ks[0]
        truth = {"beta": (k * params.beta - 1) / (k * params.beta + 1),
                 "beta_eps": (k * (params.beta + params.eps) - 1) / (k * (params.beta + params.eps) + 1)}
    for walk in ("beta", "beta_eps"):
        erg = combine([r.ergodic[walk] for r in run.replicas])
        reg = speed_regen(summaries, walk)
        report.add("speed", _est_row(f"{walk}/ergodic", erg, truth.get(walk)))
        report.add("speed", _est_row(f"{walk}/regeneration", reg, truth.get(walk)))
        se = math.hypot(erg.stderr, reg.stderr)
        diff = erg.value - reg.value
        z = diff / se if se > 0 else (0.0 if diff == 0 else math.inf)
        report.add("speed", Row(f"{walk}/ergodic_minus_regeneration", diff, se, 0.0, z,
                                PASS if abs(z) <= 3 else FAIL))
    report.add("speed", Row("segments", len(summaries)))
    report.extend("invariants", _invariant_rows(run))
    return report


def cmd_monotonicity(args) -> Report:
    params = _params(args)
    run = run_until_segments(args.dist, params, args.segments, args.steps, args.seed, _regen(args))
    s = run.summaries
    report = Report("monotonicity", _config(args), _seeds(args.seed, run))
    g = gap_estimator(s)
    report.add("gap", Row("E~[gain_gap]", g.value, g.stderr, 0.0, g.z(0.0),
                          PASS if g.p_value < args.alpha else FAIL))
    report.add("gap", Row("p_value_one_sided", g.p_value, None, args.alpha, None,
                          PASS if g.p_value < args.alpha else FAIL))
    sg = speed_gap(s)
    report.add("gap", Row("speed_gap", sg.value, sg.stderr))
    report.add("gap", Row("segments", len(s)))
    if B.tail_base(params.beta, params.d) < 1.0:
        c = B.C_of_beta(params.beta, params.d)
        report.add("gap", Row("C_paper", c, verdict=PASS if c < 1 else INFO))
    report.extend("invariants", _invariant_rows(run))
    return report


def cmd_lemmas(args) -> Report:
    params = _params(args)
    cfg = _regen(args)
    run = run_until_segments(args.dist, params, args.segments, args.steps, args.seed, cfg)
    s = run.summaries
    report = Report("lemmas", _config(args), _seeds(args.seed, run))
    ys = sample_y(params.y_bias, args.trials, np.random.SeedSequence([args.seed, 10**6]), cfg)
    report.extend("audit", lemma_audit(s, ys.unconditioned(), params.beta, params.eps,
                                       args.dist, d=params.d, mode=args.regen_mode))
    x = B.tail_base(params.beta, params.d)
    table = prob_table(s, tail_x=x)
    for row in table.rows.values():
        report.add("table/segments", Row(row.name, row.value, row.stderr, row.bound))
    cs = sample_conditioned(args.dist, params, args.trials,
                            np.random.SeedSequence([args.seed, 10**6 + 1]), cfg)
    acc = cs.acceptance
    se = math.sqrt(acc * (1 - acc) / cs.trials)
    report.add("cross_oracle", _est_row("zero_sr_acceptance", Estimate(acc, se, cs.trials, "rejection"),
                                        B.escape_probability(params.beta, params.d), nsigma=4.0))
    if len(cs.summaries) >= 100:
        report.extend("cross_oracle", compare_tables(prob_table(cs.summaries), table))
    report.extend("invariants", _invariant_rows(run))
    return report


def cmd_rate(args) -> Report:
    params = _params(args)
    if params.eps <= 0:
        raise UsageError("--eps must be positive")
    run = run_until_segments(args.dist, params, args.segments, args.steps, args.seed, _regen(args))
    report = Report("rate", _config(args), _seeds(args.seed, run))
    report.extend("rate", rate_check(run.summaries, params.beta, params.eps, args.dist))
    report.add("rate", Row("E[eps_Z]", expected_epsilon(args.dist, params.beta, params.eps)))
    report.extend("invariants", _invariant_rows(run))
    return report


def cmd_enumerate(args) -> Report:
    if not 1 <= args.max_len <= MAX_ENUM_LEN:
        raise UsageError(f"--max-len must be in 1..{MAX_ENUM_LEN}")
    res = enumerate_paths(args.max_len, args.mode)
    report = Report("enumerate", _config(args))
    for k, tau in sorted(res.max_tau().items()):
        report.add("max_tau_by_B", Row(f"B={k}", tau))
    for w in (3, 4):
        report.add("windows", Row(f"exceptions_{w}k+1", res.exceptions(w)))
    report.add("windows", Row("smallest_valid_window", res.smallest_valid_window()))
    report.add("windows", Row("prefixes_retained", len(res.tau)))
    return report


COMMANDS = {
    "bounds": cmd_bounds,
    "simulate": cmd_simulate,
    "monotonicity": cmd_monotonicity,
    "lemmas": cmd_lemmas,
    "rate": cmd_rate,
    "enumerate": cmd_enumerate,
}


def _write(report: Report, args, elapsed: float) -> None:
    text = report.to_json() if args.format == "json" else report.to_csv()
    sys.stdout.write(text)
    if args.out is not None:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.with_suffix(".csv").write_text(report.to_csv())
        out.with_suffix(".json").write_text(report.to_json())
        out.with_suffix(".timing.json").write_text(json.dumps({"elapsed_s": elapsed}) + "\n")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    t0 = time.perf_counter()
    try:
        report = COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"gwlab {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CapacityError as exc:
        print(f"gwlab {args.command}: capacity exceeded: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    _write(report, args, time.perf_counter() - t0)
    failed = report.failed
    for group, row in failed:
        print(f"FAILED {group}/{row.name}: value={row.value} bound={row.bound}", file=sys.stderr)
    return EXIT_STAT if failed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
