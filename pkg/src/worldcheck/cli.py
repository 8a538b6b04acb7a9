"""Command-line entry point: ``worldcheck {check,sim,compile,cost,difftest}``.

Exit codes: 0 success/allow, 1 deny or test failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import costmodel
from .compiler import compile_policy, verify
from .config import load_config, load_policy, load_scenario
from .core import AccessRequest, ConfigError, Kind, Op
from .difftest import run_difftest
from .sim import latency_table, records_csv, run_scenario, table_csv

DEFAULT_SEED = 0
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _int(text: str) -> int:
    try:
        return int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None


def _int_list(text: str) -> list[int]:
    """Parse "8", "2-64", "2-128:2" or "4,8,16"."""
    out = []
    try:
        for part in text.split(","):
            if "-" in part:
                span, _, step = part.partition(":")
                a, b = (int(x, 0) for x in span.split("-", 1))
                out += list(range(a, b + 1, int(step or 1)))
            else:
                out.append(int(part, 0))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad range {text!r}; use N, A-B, A-B:STEP or N,M") from None
    if not out:
        raise argparse.ArgumentTypeError(f"empty range {text!r}")
    return out


def _emit(text: str, out: Optional[str]):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# -- subcommands --------------------------------------------------------------------

def cmd_check(args) -> int:
    image = load_config(args.config)
    try:
        req = AccessRequest(args.iid, Op.parse(args.op), args.addr, args.len)
    except ValueError as e:
        raise UsageError(str(e)) from None
    out = image.check(req, now=args.now)
    rule = "none" if out.matched_rule is None else str(out.matched_rule)
    err = out.error.value if out.error else "none"
    if args.format == "json":
        print(json.dumps({"decision": out.decision.value, "latency": out.latency_cycles,
                          "rule": out.matched_rule, "error": out.error.value if out.error else None}))
    else:
        print(f"decision={out.decision.value} latency={out.latency_cycles} rule={rule} error={err}")
    return EXIT_OK if out.allowed else EXIT_FAIL


def cmd_sim(args) -> int:
    grouping = tuple(args.group.split(","))
    csv_parts, table_parts, js = [], [], []
    for path in args.scenario:
        scenario = load_scenario(path)
        records = run_scenario(scenario)
        csv_parts.append(records_csv(records))
        rows = latency_table(records, grouping) if records else []
        if rows:
            table_parts.append(table_csv(rows, grouping, label=scenario.name))
        js.append({"scenario": scenario.name,
                   "records": list(csv.DictReader(io.StringIO(csv_parts[-1]))),
                   "latency": [{"group": list(r.group), "count": r.count, "min": r.min,
                                "max": r.max, "mean": r.mean} for r in rows]})
    if args.format == "json":
        _emit(json.dumps(js, indent=2) + "\n", args.output)
        return EXIT_OK
    # one header for the concatenated record CSV
    records_text = csv_parts[0] + "".join(p.split("\n", 1)[1] for p in csv_parts[1:])
    if table_parts:
        table = table_parts[0] + "".join(p.split("\n", 1)[1] for p in table_parts[1:])
    else:
        table = ""
    if args.output:
        Path(args.output).write_text(records_text)
        sys.stdout.write(table)
    else:
        sys.stdout.write(records_text)
        if table:
            sys.stdout.write("\n" + table)
    return EXIT_OK


def cmd_compile(args) -> int:
    policy = load_policy(args.policy)
    program = compile_policy(policy, args.backend, slots=args.slots, perm_entries=args.perm_entries,
                             k=args.k, entries=args.entries, style=args.style)
    text = program.to_json() if args.format == "json" else program.hexdump()
    _emit(text, args.output)
    for w in program.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if args.verify:
        report = verify(program, policy)
        for cx in report.counterexamples[:10]:
            print(f"counterexample: {cx}", file=sys.stderr)
        print(f"# verify probes={report.probes} counterexamples={len(report.counterexamples)}",
              file=sys.stderr)
        return EXIT_OK if report.ok else EXIT_FAIL
    return EXIT_OK


def cmd_cost(args) -> int:
    kinds = [Kind(b) for b in args.backends.split(",")]
    try:
        baseline = costmodel.CheckerConfigPoint(Kind(args.baseline_backend), args.baseline_rules,
                                                args.baseline_iids)
        rows = costmodel.sweep(kinds, args.rules, args.iids, baseline, args.overhead,
                               perm_entries=args.perm_entries)
    except ValueError as e:
        raise UsageError(str(e)) from None
    lines = []
    if Kind.SWC in kinds and len(args.iids) > 1:
        for other in (k for k in kinds if k in (Kind.PEWC, Kind.MWC)):
            for r in args.rules:
                x = costmodel.crossover(Kind.SWC, other, r, args.iids, perm_entries=args.perm_entries)
                lines.append((f"swc/{other.value}", r, x))
    if args.format == "json":
        print(json.dumps({
            "metric": costmodel.METRIC,
            "rows": [{"backend": row.point.kind.value, "rules": row.point.rules,
                      "iids": row.point.iids, "state_bits": row.report.state_bits,
                      "compare_units": row.report.compare_units, "impact": round(row.impact, 6)}
                     for row in rows],
            "crossovers": [{"pair": p, "rules": r, "iids": x} for p, r, x in lines]}, indent=2))
        return EXIT_OK
    text = costmodel.sweep_csv(rows)
    text += "".join(f"# crossover {p} rules={r} iids={'none' if x is None else x}\n"
                    for p, r, x in lines)
    _emit(text, args.output)
    return EXIT_OK


def cmd_difftest(args) -> int:
    if args.cases < 1:
        raise UsageError("--cases must be >= 1")
    kinds = list(Kind) if args.backend == "all" else [Kind(args.backend)]
    status = EXIT_OK
    for kind in kinds:
        res = run_difftest(kind, args.cases, args.seed, args.workers)
        verdict = "pass" if res.passed else "fail"
        print(f"difftest backend={kind.value} cases={res.cases} seed={res.seed} "
              f"mismatches={len(res.failures)} result={verdict}")
        if not res.passed:
            status = EXIT_FAIL
            print(f"first failing case: seed={res.seed} index={res.failures[0]}")
            print(res.counterexample)
    return status


# -- parser -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="worldcheck", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    backends = [k.value for k in Kind]

    c = sub.add_parser("check", help="evaluate one access against a configuration")
    c.add_argument("config")
    c.add_argument("--iid", type=_int, required=True)
    c.add_argument("--op", required=True, choices=["r", "w", "read", "write"])
    c.add_argument("--addr", type=_int, required=True)
    c.add_argument("--len", type=_int, default=4)
    c.add_argument("--now", type=_int, default=None, help="cycle of the check (default: settled)")
    c.add_argument("--format", choices=["text", "json"], default="text")
    c.set_defaults(func=cmd_check)

    s = sub.add_parser("sim", help="run one or more trace scenarios")
    s.add_argument("scenario", nargs="+")
    s.add_argument("-o", "--output", help="write the record CSV here; table goes to stdout")
    s.add_argument("--group", default="backend,op", help="latency table grouping keys")
    s.add_argument("--format", choices=["csv", "json"], default="csv")
    s.set_defaults(func=cmd_sim)

    m = sub.add_parser("compile", help="compile a policy to register writes")
    m.add_argument("policy")
    m.add_argument("--backend", required=True, choices=backends)
    m.add_argument("--style", choices=["auto", "tor", "napot", "se"], default="auto")
    m.add_argument("--slots", type=_int)
    m.add_argument("--perm-entries", type=_int, default=4)
    m.add_argument("--k", type=_int, default=4)
    m.add_argument("--entries", type=_int)
    m.add_argument("--verify", action="store_true", help="verify against the policy (exit 1 on mismatch)")
    m.add_argument("-o", "--output")
    m.add_argument("--format", choices=["hex", "json"], default="hex")
    m.set_defaults(func=cmd_compile)

    k = sub.add_parser("cost", help="resource-proxy sweep")
    k.add_argument("--backends", default="swc,pewc,mwc,iopmp")
    k.add_argument("--rules", type=_int_list, default=[8])
    k.add_argument("--iids", type=_int_list, default=[8])
    k.add_argument("--perm-entries", type=_int, default=4)
    k.add_argument("--overhead", type=float, default=costmodel.DEFAULT_OVERHEAD)
    k.add_argument("--baseline-backend", default=costmodel.DEFAULT_BASELINE.kind.value)
    k.add_argument("--baseline-rules", type=_int, default=costmodel.DEFAULT_BASELINE.rules)
    k.add_argument("--baseline-iids", type=_int, default=costmodel.DEFAULT_BASELINE.iids)
    k.add_argument("-o", "--output")
    k.add_argument("--format", choices=["csv", "json"], default="csv")
    k.set_defaults(func=cmd_cost)

    d = sub.add_parser("difftest", help="randomized backend-vs-oracle comparison")
    d.add_argument("--backend", choices=backends + ["all"], default="all")
    d.add_argument("--cases", type=_int, default=10000)
    d.add_argument("--seed", type=_int, default=DEFAULT_SEED)
    d.add_argument("--workers", type=_int, default=1)
    d.set_defaults(func=cmd_difftest)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UsageError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
