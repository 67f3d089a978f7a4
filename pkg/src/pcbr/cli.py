"""Command-line entry point: ``pcbr {bounds,plan,run,audit,sweep}``.

Exit status: 0 on success, 1 when an audit or round trip fails, 2 on
usage errors. The default output format can be set with ``PCBR_FORMAT``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

from . import audit, render
from .field import check_prime
from .params import ParameterError, bounds_report, derive_params
from .protocol import run_round_trip
from .scheme import build_canonical_plan

FORMATS = ("text", "json", "csv")


def parse_range(text: str) -> list[int]:
    """``"2..4"`` -> [2, 3, 4]; ``"2,5"`` -> [2, 5]; ``"3"`` -> [3]."""
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            values = list(range(int(lo), int(hi) + 1))
        else:
            values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad range {text!r}; use A..B or A,B,C")
    if not values:
        raise argparse.ArgumentTypeError(f"empty range {text!r}")
    return values


def prime(text: str) -> int:
    try:
        return check_prime(int(text))
    except ValueError:
        raise argparse.ArgumentTypeError(f"q must be prime, got {text}")


def prime_list(text: str) -> list[int]:
    values = [prime(v) for v in text.split(",") if v.strip()]
    if not values:
        raise argparse.ArgumentTypeError(f"empty range {text!r}")
    return values


def _rate_text(r: dict) -> str:
    return f"{r['num']}/{r['den']}"


def _csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue().rstrip("\n")


def cmd_bounds(args) -> tuple[str, int]:
    rep = bounds_report(args.N, args.K, args.D)
    if args.format == "json":
        return json.dumps(rep, indent=2), 0
    if args.format == "csv":
        flat = {k: (_rate_text(v) if k == "rate" else v) for k, v in rep.items()}
        return _csv([flat]), 0
    lines = [
        f"N={rep['N']} K={rep['K']} D={rep['D']}  (f={rep['f']}, g={rep['g']}, M={rep['M']}, E={rep['E']})",
        f"rate R = {_rate_text(rep['rate'])}",
        f"L_* = {rep['L_lower']}",
        f"L^* = {rep['L_upper']}",
        f"bounds {'tight' if rep['tight'] else 'not tight'} (gcd(N, K-D(g-1)) {'= 1' if rep['tight'] else '> 1'})",
        f"symbols per server = {rep['symbols_per_server']}",
    ]
    line = audit.comparison_line(args.N, args.K, args.D)
    if line:
        lines.append(line)
    return "\n".join(lines), 0


def cmd_plan(args) -> tuple[str, int]:
    p = derive_params(args.N, args.K, args.D)
    plan = build_canonical_plan(p, args.j)
    if args.format == "json":
        return render.plan_to_json(plan), 0
    if args.format == "csv":
        return render.plan_to_csv(plan).rstrip("\n"), 0
    return render.plan_table(plan), 0


def cmd_run(args) -> tuple[str, int]:
    rt = run_round_trip(args.N, args.K, args.D, args.j, args.q, args.seed)
    status = 0 if rt.ok else 1
    if args.format == "json":
        return json.dumps(rt.to_dict(), indent=2), status
    if args.format == "csv":
        return _csv([{"N": rt.N, "K": rt.K, "D": rt.D, "j": rt.j, "q": rt.q, "seed": rt.seed,
                      "rate": audit.fmt_rate(rt.rate), "ok": rt.ok, "oracle": rt.oracle}]), status
    return (f"rate {audit.fmt_rate(rt.rate)}, decode {'OK' if rt.decoded else 'FAILED'}, "
            f"oracle {'OK' if rt.oracle else 'FAILED'}"), status


def _report_output(report: audit.AuditReport, fmt: str, verbose: bool) -> tuple[str, int]:
    status = 0 if report.passed else 1
    if fmt == "json":
        return report.to_json(), status
    if fmt == "csv":
        rows = [c.to_dict() for c in report.checks]
        return _csv(rows), status
    return report.to_text(verbose=verbose), status


def cmd_audit(args) -> tuple[str, int]:
    report = audit.audit_point(args.N, args.K, args.D, args.q, args.seeds)
    if args.samples:
        report.extend(audit.audit_statistical_privacy_all(
            args.N, args.K, args.D, samples=args.samples, threshold=args.threshold, seed=args.seed))
    line = audit.comparison_line(args.N, args.K, args.D)
    if line:
        report.notes.append(line)
    return _report_output(report, args.format, verbose=True)


def cmd_sweep(args) -> tuple[str, int]:
    report = audit.sweep(args.N, args.K, args.q, args.seeds, workers=args.workers)
    if args.format == "text":
        grid = [c for c in report.checks if c.name == "grid"]
        lines = [f"{'PASS' if c.passed else 'FAIL'}  {c.params:<10} {c.evidence}" for c in grid]
        lines += [f"FAIL  {c.name} {c.params} {c.evidence}" for c in report.failures() if c.name != "grid"]
        lines += report.notes
        n_ok = sum(c.passed for c in report.checks)
        lines.append(f"overall: {'PASS' if report.passed else 'FAIL'} "
                     f"({len(grid)} grid points, {n_ok}/{len(report.checks)} checks)")
        return "\n".join(lines), 0 if report.passed else 1
    return _report_output(report, args.format, verbose=True)


def _point_args(sp, with_j=False, with_q=False):
    sp.add_argument("-N", "--N", type=int, required=True, help="number of servers")
    sp.add_argument("-K", "--K", type=int, required=True, help="number of messages")
    sp.add_argument("-D", "--D", type=int, required=True, help="demand block length")
    if with_j:
        sp.add_argument("-j", "--j", type=int, default=1, help="demand window index in [1:K-D+1]")
    if with_q:
        sp.add_argument("-q", "--q", type=prime, default=2, help="field size (prime)")


def build_parser() -> argparse.ArgumentParser:
    default_fmt = os.environ.get("PCBR_FORMAT", "text")
    if default_fmt not in FORMATS:
        default_fmt = "text"
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=FORMATS, default=default_fmt)
    common.add_argument("-o", "--output", help="write to this file instead of stdout")

    parser = argparse.ArgumentParser(prog="pcbr", description="Private contiguous-block retrieval toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("bounds", parents=[common], help="optimal rate and subpacketization bounds")
    _point_args(sp)
    sp.set_defaults(func=cmd_bounds)

    sp = sub.add_parser("plan", parents=[common], help="emit the query table for one demand window")
    _point_args(sp, with_j=True)
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("run", parents=[common], help="simulate one masked retrieval round")
    _point_args(sp, with_j=True, with_q=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("audit", parents=[common], help="all audits for one (N, K, D)")
    _point_args(sp)
    sp.add_argument("-q", "--q", type=prime_list, default=[2], help="comma-separated primes")
    sp.add_argument("--seeds", type=int, default=3, help="random stores per window and field")
    sp.add_argument("--samples", type=int, default=10000, help="statistical privacy samples (0 skips)")
    sp.add_argument("--threshold", type=float, default=0.05)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_audit)

    sp = sub.add_parser("sweep", parents=[common], help="audit a grid of (N, K, D)")
    sp.add_argument("--N", type=parse_range, default=[2, 3])
    sp.add_argument("--K", type=parse_range, default=list(range(3, 9)))
    sp.add_argument("--q", type=prime_list, default=[2, 3])
    sp.add_argument("--seeds", type=int, default=5)
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "audit" and args.samples and args.samples < 1000:
        parser.error("--samples must be 0 or at least 1000")
    try:
        if args.command in ("plan", "run"):
            p = derive_params(args.N, args.K, args.D)
            if not 1 <= args.j <= p.E:
                wins = ", ".join(f"W{i}=[{i}:{i + p.D - 1}]" for i in range(1, p.E + 1))
                raise ParameterError(f"j must be in [1:{p.E}]; valid windows: {wins}")
        text, status = args.func(args)
    except ParameterError as exc:
        print(f"pcbr {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        if "empty range" in str(exc):
            print(f"pcbr {args.command}: error: {exc}", file=sys.stderr)
            return 2
        raise
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
