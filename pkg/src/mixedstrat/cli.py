"""Command-line front end: ``gen``, ``run``, ``report`` and ``analyze``."""
from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from . import experiment as ex
from . import markov
from .knapsack import read_instance
from .mutation import OperatorKind
from .strategy import ALGORITHM_IDS

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2

# Published verdicts for the special example instance, candidate vs. bitwise baseline.
PUBLISHED_SPECIAL_VERDICTS = {"psr": "equivalent", "psw": "inferior", "psv": "complementary"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> tuple[int, ...]:
    try:
        vals = tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("sizes must be positive integers")
    return vals


def _algo_list(text: str) -> tuple[str, ...]:
    vals = tuple(t.strip().lower() for t in text.split(",") if t.strip())
    bad = [v for v in vals if v not in ALGORITHM_IDS]
    if bad or not vals:
        raise argparse.ArgumentTypeError(f"unknown algorithm id(s) {bad}; choose from {','.join(ALGORITHM_IDS)}")
    return vals


def _u64(text: str) -> int:
    val = int(text)
    if not 0 <= val < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return val


def _plan_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=_u64, default=0, help="master seed (default 0)")
    p.add_argument("--sizes", type=_int_list, default=None, help="comma-separated item counts (default 100,250,500)")
    p.add_argument("--runs", type=int, default=None, help="runs per cell (default 10)")
    p.add_argument("--small", action="store_true", help="desk-scale preset: sizes 20,50,100 and 10 runs")


def _plan_from(args) -> ex.ExperimentPlan:
    sizes = args.sizes or (ex.SMALL_SIZES if args.small else ex.FULL_SIZES)
    kw = dict(sizes=sizes, master_seed=args.seed)
    if args.runs is not None:
        kw["runs_per_cell"] = args.runs
    for name, key in (("pop", "pop_size"), ("gens", "max_generations"), ("algos", "algorithms")):
        if getattr(args, name, None) is not None:
            kw[key] = getattr(args, name)
    repair = getattr(args, "repair", None)
    if repair and repair != "both":
        kw["repairs"] = (repair,)
    try:
        return ex.ExperimentPlan(**kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mixedstrat", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="write one instance file per (correlation, capacity, n)")
    _plan_args(g)
    g.add_argument("--out", required=True, help="output directory")

    r = sub.add_parser("run", help="run the experiment grid over an instance directory")
    r.add_argument("instances", help="directory written by 'gen'")
    _plan_args(r)
    r.add_argument("--pop", type=int, default=None, help="population size (default 10)")
    r.add_argument("--gens", type=int, default=None, help="generations per run (default 500)")
    r.add_argument("--repair", choices=("random", "greedy", "both"), default="both")
    r.add_argument("--algos", type=_algo_list, default=None, help="comma-separated algorithm ids")
    r.add_argument("--out", required=True, help="results CSV")
    r.add_argument("--quiet", action="store_true")

    rep = sub.add_parser("report", help="tabulate a results CSV and count wins")
    rep.add_argument("results", help="CSV written by 'run'")
    rep.add_argument("--out", default=None, help="also write the report here")

    a = sub.add_parser("analyze", help="exact hitting-time analysis of an operator pair on a small instance")
    src = a.add_mutually_exclusive_group(required=True)
    src.add_argument("--instance", help="instance file")
    src.add_argument("--special", type=int, metavar="N", help="use the special example instance with N items (item 1 worth N, the rest 1)")
    a.add_argument("candidate", type=str.lower, choices=[o.id for o in OperatorKind],
                   help="operator judged against the baseline (PS2)")
    a.add_argument("baseline", type=str.lower, choices=[o.id for o in OperatorKind],
                   help="reference operator whose hitting times are the distance (PS1)")
    a.add_argument("repair", nargs="?", choices=("random", "greedy", "both"), default="greedy")
    a.add_argument("--tol", type=float, default=markov.DEFAULT_TOL)
    a.add_argument("--out", default=None, help="write per-state CSV here (suffixed with the repair when 'both')")
    return parser


def cmd_gen(args) -> int:
    plan = _plan_from(args)
    paths = ex.generate_suite(plan, args.out)
    print(f"wrote {len(paths)} instance files to {args.out}")
    return EXIT_OK


def cmd_run(args) -> int:
    plan = _plan_from(args)
    progress = None if args.quiet else (lambda msg: print(msg, file=sys.stderr, flush=True))
    count = ex.write_results(ex.iter_runs(plan, args.instances, progress), args.out)
    print(f"wrote {count} rows to {args.out}")
    return EXIT_OK


def cmd_report(args) -> int:
    cells = ex.aggregate(ex.read_results(args.results))
    text = ex.format_report(cells, ex.summarize(cells))
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text)
    return EXIT_OK


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def analysis_report(pa: markov.PairAnalysis, candidate: str, baseline: str, repair: str,
                    published_verdict: str | None = None) -> str:
    space, cls = pa.space, pa.classification
    inst = space.instance
    lines = [
        f"instance: n={inst.n} capacity={inst.capacity} values={list(inst.values)} weights={list(inst.weights)}",
        f"repair: {repair}",
        f"states: {space.size} feasible, {len(space.optimal)} optimal "
        f"({', '.join(space.labels(space.optimal))})",
        f"pair: candidate={candidate} baseline={baseline} (distance = baseline hitting times)",
        f"verdict: {candidate} is {cls.verdict.value} to {baseline}",
    ]
    if published_verdict is not None:
        agree = "agrees" if published_verdict == cls.verdict.value else "DISAGREES"
        lines.append(f"published verdict: {published_verdict} ({agree})")
    labels = space.labels(space.nonoptimal)
    lines.append(f"witness states: {', '.join(labels[j] for j in cls.witnesses) or 'none'}")
    if pa.policy.warning:
        lines.append(f"policy: {pa.policy.warning}")
    lines.append("")
    lines.append(f"{'state':>{max(5, inst.n)}} {'m_ps1':>12} {'m_ps2':>12} {'delta_ps2':>12} {'p1':>4} {'m_ms':>12}")
    for row in pa.rows():
        lines.append(f"{row['state_bits']:>{max(5, inst.n)}} {_fmt(row['m_ps1']):>12} {_fmt(row['m_ps2']):>12} "
                     f"{_fmt(row['delta_ps2']):>12} {row['p1_policy']:>4.0f} {_fmt(row['m_ms']):>12}")
    s = pa.summary
    lines.append("")
    lines.append(f"average hitting time: ps1={_fmt(s['avg_ps1'])} ps2={_fmt(s['avg_ps2'])} ms={_fmt(s['avg_ms'])}")
    lines.append(f"maximum hitting time: ps1={_fmt(s['max_ps1'])} ps2={_fmt(s['max_ps2'])} ms={_fmt(s['max_ms'])}")
    if len(pa.m1):
        gain = pa.m1 - pa.m_mixed
        lines.append(f"mixed vs ps1: improves {int((gain > 0).sum())} of {len(gain)} states, "
                     f"largest gain {_fmt(gain.max())}, largest loss {_fmt(max(0.0, -gain.min()))}")
    return "\n".join(lines) + "\n"


def write_analysis_csv(pa: markov.PairAnalysis, path) -> None:
    cols = ("state_bits", "m_ps1", "m_ps2", "delta_ps2", "p1_policy", "m_ms")
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for row in pa.rows():
            w.writerow({k: (row[k] if k == "state_bits" else repr(float(row[k]))) for k in cols})


def cmd_analyze(args) -> int:
    if args.special is not None:
        if args.special < 2:
            raise UsageError("--special needs N >= 2")
        inst, _ = markov.special_instance(args.special)
    else:
        inst = read_instance(args.instance)
    limit = markov.state_limit()
    if inst.n > limit:
        raise markov.StateLimitError(
            f"n={inst.n} exceeds the exact-analysis limit of {limit}; try n <= {limit} "
            f"or set {markov.STATE_LIMIT_ENV}")
    published = None
    if args.special is not None and args.baseline == "psb":
        published = PUBLISHED_SPECIAL_VERDICTS.get(args.candidate)
    repairs = ("greedy", "random") if args.repair == "both" else (args.repair,)
    for i, repair in enumerate(repairs):
        pa = markov.analyze_pair(inst, OperatorKind.from_id(args.baseline),
                                 OperatorKind.from_id(args.candidate), repair, args.tol)
        if i:
            print()
        sys.stdout.write(analysis_report(pa, args.candidate, args.baseline, repair, published))
        if args.out:
            out = Path(args.out)
            if len(repairs) > 1:
                out = out.with_name(f"{out.stem}_{repair}{out.suffix}")
            write_analysis_csv(pa, out)
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "run": cmd_run, "report": cmd_report, "analyze": cmd_analyze}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"mixedstrat: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"mixedstrat: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
