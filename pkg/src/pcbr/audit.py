"""Auditors for correctness, privacy and the rate/subpacketization identities.

Privacy is certified structurally: per-server query shapes must be identical
for every demand window, and indices must never repeat within a server, so
that independent uniform per-message permutations make each server's view
demand-independent. :func:`audit_statistical_privacy` is only a sampling
regression guard on top of that.
"""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Callable, Iterable, Optional, Sequence

from .params import (
    Params, Regime, canonical_permutation, census_s1, census_s2, converse_bound,
    coprimality_tightness, derive_params, min_integral_L, optimal_rate,
    subpack_lower, subpack_upper, symbols_per_server,
)
from .protocol import run_round_trip
from .scheme import (
    QueryPlan, build_canonical_plan, build_partition, enumerate_supports,
    mask_plan, reduce_large_demand, server_shape,
)

# Best-known MPIR scheme for (N, K, D) = (2, 5, 2): rate and subpacketization.
# Display constants only; not derived here.
MPIR_REFERENCE = {(2, 5, 2): (Fraction(82, 135), 82)}


def fmt_rate(r: Fraction) -> str:
    return f"{r.numerator}/{r.denominator}"


@dataclass(frozen=True)
class Check:
    name: str
    params: str
    passed: bool
    evidence: str

    def to_dict(self) -> dict:
        return {"name": self.name, "params": self.params, "verdict": "pass" if self.passed else "fail",
                "evidence": self.evidence}


@dataclass
class AuditReport:
    checks: list[Check] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, params: str, passed: bool, evidence: str) -> bool:
        self.checks.append(Check(name, params, bool(passed), evidence))
        return bool(passed)

    def extend(self, other: AuditReport) -> AuditReport:
        self.checks.extend(other.checks)
        self.notes.extend(other.notes)
        return self

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {"overall": "pass" if self.passed else "fail",
                "checks": [c.to_dict() for c in self.checks], "notes": list(self.notes)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self, verbose: bool = True) -> str:
        lines = []
        shown = self.checks if verbose else self.failures()
        for c in shown:
            lines.append(f"{'PASS' if c.passed else 'FAIL'}  {c.name:<28} {c.params:<14} {c.evidence}")
        lines.extend(self.notes)
        n_ok = sum(c.passed for c in self.checks)
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'} ({n_ok}/{len(self.checks)} checks)")
        return "\n".join(lines)


def _tag(p: Params, j: Optional[int] = None) -> str:
    base = f"({p.N},{p.K},{p.D})"
    return base if j is None else f"{base} j={j}"


Builder = Callable[[Params, int], QueryPlan]


def audit_shape_privacy(N: int, K: int, D: int, builder: Builder = build_canonical_plan) -> AuditReport:
    p = derive_params(N, K, D)
    report = AuditReport()
    plans = [builder(p, j) for j in range(1, p.E + 1)]
    for n in range(1, N + 1):
        ref = server_shape(plans[0], n)
        diff = None
        for j, plan in enumerate(plans[1:], start=2):
            shape = server_shape(plan, n)
            if shape != ref:
                a, b = dict(ref), dict(shape)
                U = min(set(a) ^ set(b) | {u for u in a if a.get(u) != b.get(u)}, key=lambda u: (len(u), u))
                diff = f"W1 vs W{j}: support {list(U)} count {a.get(U, 0)} vs {b.get(U, 0)}"
                break
        evidence = diff or f"{len(ref)} supports, {sum(c for _, c in ref)} symbols identical across {p.E} windows"
        report.add("shape_privacy", f"{_tag(p)} s{n}", diff is None, evidence)
    return report


def expected_server_counts(p: Params) -> dict[int, int]:
    """Subpackets of each message that every server touches."""
    if p.regime is Regime.LARGE_D:
        return {i: p.N for i in range(1, p.K + 1)}
    part = build_partition(p)
    counts = {i: p.N ** (p.g - 1) for i in part.s1}
    counts.update({i: p.N**p.f for i in part.s2})
    return counts


def audit_index_discipline(plan: QueryPlan) -> AuditReport:
    p = plan.params
    report = AuditReport()
    tag = _tag(p, plan.demand_index)
    expected = expected_server_counts(p)
    for n, specs in enumerate(plan.servers, start=1):
        pairs = Counter((m, t) for s in specs for m, t in zip(s.support, s.indices))
        repeats = sorted(k for k, v in pairs.items() if v > 1)
        report.add("distinct_subpackets", f"{tag} s{n}", not repeats,
                   f"repeated (msg, idx) {repeats[:3]}" if repeats else f"{len(pairs)} distinct (msg, idx) pairs")
        per_msg = Counter(m for m, _ in pairs.elements())
        bad = {i: per_msg.get(i, 0) for i in expected if per_msg.get(i, 0) != expected[i]}
        report.add("per_message_counts", f"{tag} s{n}", not bad,
                   f"count mismatch {bad}" if bad else
                   "counts " + ",".join(f"{i}:{per_msg[i]}" for i in sorted(expected)))
    for d in plan.demand:
        used = sorted(s.index_of(d) for s in plan.all_symbols() if d in s.support)
        ok = used == list(range(1, plan.L + 1))
        report.add("demand_coverage", f"{tag} m{d}", ok,
                   f"indices 1..{plan.L} each once" if ok else f"{len(used)} uses, {len(set(used))} distinct of {plan.L}")
    return report


MaskFn = Callable[..., tuple]


def _server_features(plan: QueryPlan, samples: int, key: tuple, mask_fn: MaskFn) -> list[dict]:
    """Empirical distribution of every query coordinate, per server.

    A coordinate is either the support at a transmission position or the
    index of one message at that position. Whole-query outcomes are
    essentially never repeated, so distances are taken per coordinate.
    """
    counts = [defaultdict(Counter) for _ in plan.servers]
    for i in range(samples):
        masked, _ = mask_fn(plan, key + (i,))
        for n, specs in enumerate(masked.servers):
            c = counts[n]
            for pos, s in enumerate(specs):
                c[(pos, 0)][s.support] += 1
                for m, t in zip(s.support, s.indices):
                    c[(pos, m)][t] += 1
    return counts


def _max_tv(a: dict, b: dict, samples: int) -> tuple[float, tuple]:
    worst, where = 0.0, None
    for feat in sorted(set(a) | set(b)):
        ca, cb = a.get(feat, Counter()), b.get(feat, Counter())
        tv = sum(abs(ca[x] - cb[x]) for x in set(ca) | set(cb)) / (2 * samples)
        if where is None or tv > worst:
            worst, where = tv, feat
    return worst, where


def _tv_check(report, p, j1, j2, n, samples, threshold, fa, fb):
    tv, (pos, m) = _max_tv(fa[n - 1], fb[n - 1], samples)
    coord = f"pos {pos} support" if m == 0 else f"pos {pos} msg {m}"
    report.add("statistical_privacy", f"{_tag(p)} s{n}", tv <= threshold,
               f"W{j1} vs W{j2}: max TV {tv:.4f} at {coord} (threshold {threshold}, {samples} samples)")


def audit_statistical_privacy(N: int, K: int, D: int, j: int, j2: int, server: int,
                              samples: int = 10000, threshold: float = 0.05, seed: int = 0,
                              mask_fn: MaskFn = mask_plan) -> AuditReport:
    if samples < 1000:
        raise ValueError("statistical privacy needs at least 1000 samples")
    p = derive_params(N, K, D)
    fa = _server_features(build_canonical_plan(p, j), samples, (seed, j, 0), mask_fn)
    fb = _server_features(build_canonical_plan(p, j2), samples, (seed, j2, 1 if j == j2 else 0), mask_fn)
    report = AuditReport()
    _tv_check(report, p, j, j2, server, samples, threshold, fa, fb)
    return report


def audit_statistical_privacy_all(N: int, K: int, D: int, samples: int = 10000, threshold: float = 0.05,
                                  seed: int = 0, mask_fn: MaskFn = mask_plan) -> AuditReport:
    """Every demand pair and every server, sampling each window once."""
    p = derive_params(N, K, D)
    feats = {j: _server_features(build_canonical_plan(p, j), samples, (seed, j, 0), mask_fn)
             for j in range(1, p.E + 1)}
    report = AuditReport()
    for j1, j2 in combinations(range(1, p.E + 1), 2):
        for n in range(1, N + 1):
            _tv_check(report, p, j1, j2, n, samples, threshold, feats[j1], feats[j2])
    return report


def _support_census(p: Params) -> tuple[int, str]:
    if p.regime is Regime.LARGE_D:
        red = reduce_large_demand(p, 1).params
        sub_total = sum(enumerate_supports(build_partition(red), red).values())
        phase1 = (2 * p.D - p.K) * p.N
        expected = census_s1(red) + census_s2(red)
        ok = sub_total == expected
        return phase1 + sub_total, (f"phase1 {phase1} + reduced {sub_total} (binomial {expected})"
                                    + ("" if ok else " MISMATCH"))
    part = build_partition(p)
    T = enumerate_supports(part, p)
    s1 = sum(t for U, t in T.items() if set(U) <= part.s1)
    s2 = sum(t for U, t in T.items() if set(U) <= part.s2)
    ok = s1 == census_s1(p) and s2 == census_s2(p)
    return s1 + s2, (f"S1 {s1} (binomial {census_s1(p)}) + S2 {s2} (binomial {census_s2(p)})"
                     + ("" if ok else " MISMATCH"))


def audit_rate_and_bounds(N: int, K: int, D: int) -> AuditReport:
    p = derive_params(N, K, D)
    tag = _tag(p)
    report = AuditReport()
    R = optimal_rate(N, K, D)

    plan = build_canonical_plan(p, 1)
    sizes = {len(s) for s in plan.servers}
    achieved = Fraction(D * p.L, N * max(sizes))
    report.add("rate", tag, len(sizes) == 1 and achieved == R,
               f"achieved {fmt_rate(achieved)} vs optimal {fmt_rate(R)}")

    per_server = Fraction(D * p.L) / (N * R)
    scan = min_integral_L(N, K, D)
    lo, hi = subpack_lower(N, K, D), subpack_upper(N, K, D)
    report.add("integrality", tag, per_server.denominator == 1 and scan == lo,
               f"D*L/(N*R) = {per_server} at L={p.L}; minimal integral L by scan = {scan}, L_lower = {lo}")

    report.add("lower_divides_upper", tag, hi % lo == 0, f"L_lower {lo} | L_upper {hi}")

    tight = coprimality_tightness(N, K, D)
    report.add("coprime_tightness", tag, (not tight) or lo == hi,
               f"gcd(N, M)={'1' if tight else '>1'}; bounds {lo} vs {hi}")

    pi = canonical_permutation(N, K, D)
    cb = converse_bound(N, K, D, pi)
    report.add("converse", tag, cb == R, f"converse at pi={pi} = {fmt_rate(cb)}")

    total, evidence = _support_census(p)
    sps = symbols_per_server(N, K, D)
    report.add("census", tag, total == sps == max(sizes) and "MISMATCH" not in evidence,
               f"{evidence} = {total}; symbols/server {sps}")
    return report


def comparison_line(N: int, K: int, D: int) -> Optional[str]:
    p = derive_params(N, K, D)
    R = optimal_rate(N, K, D)
    ref = MPIR_REFERENCE.get((N, K, D))
    if ref is not None:
        return f"({N},{K},{D}): {fmt_rate(R)} @ L={p.L} vs MPIR {fmt_rate(ref[0])} @ L={ref[1]}"
    if K % D == 0:
        mpir_L = Fraction(N ** (K - D + 1), D)
        return f"({N},{K},{D}): {fmt_rate(R)} @ L={p.L} vs rate-optimal MPIR needs L >= {mpir_L}"
    return None


def audit_point(N: int, K: int, D: int, q_list: Sequence[int] = (2,), seeds: int = 1,
                builder: Builder = build_canonical_plan) -> AuditReport:
    """Structural audits plus round trips for one (N, K, D)."""
    p = derive_params(N, K, D)
    report = audit_rate_and_bounds(N, K, D)
    report.extend(audit_shape_privacy(N, K, D, builder))
    for j in range(1, p.E + 1):
        report.extend(audit_index_discipline(builder(p, j)))
    for j in range(1, p.E + 1):
        for q in q_list:
            n_ok = n_oracle = 0
            for s in range(seeds):
                rt = run_round_trip(N, K, D, j, q, s, check_oracle=(s == 0))
                n_ok += rt.decoded
                n_oracle += rt.oracle
            report.add("round_trip", f"{_tag(p, j)} q={q}", n_ok == seeds and n_oracle == seeds,
                       f"decoded {n_ok}/{seeds} stores, oracle {'OK' if n_oracle == seeds else 'FAIL'}")
    return report


def _grid(N_range: Iterable[int], K_range: Iterable[int]) -> list[tuple[int, int, int]]:
    N_range, K_range = list(N_range), list(K_range)
    if not N_range or not K_range:
        raise ValueError("empty range")
    return [(N, K, D) for N in N_range for K in K_range for D in range(2, K)]


def _sweep_one(args) -> AuditReport:
    (N, K, D), q_list, seeds = args
    report = audit_point(N, K, D, q_list, seeds)
    p = derive_params(N, K, D)
    report.add("grid", _tag(p), report.passed,
               f"rate {fmt_rate(optimal_rate(N, K, D))} @ L={p.L}, L_lower={subpack_lower(N, K, D)}")
    line = comparison_line(N, K, D)
    if line is not None and (N, K, D) in MPIR_REFERENCE:
        report.notes.append(line)
    return report


def sweep(N_range: Iterable[int], K_range: Iterable[int], q_list: Sequence[int] = (2, 3),
          seeds: int = 5, workers: int = 1) -> AuditReport:
    """Run every audit and round trip over the grid; results are in grid order."""
    if not q_list:
        raise ValueError("empty range")
    if seeds < 1:
        raise ValueError("seeds must be >= 1")
    grid = _grid(N_range, K_range)
    if not grid:
        raise ValueError("empty range")
    jobs = [(point, tuple(q_list), seeds) for point in grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_sweep_one, jobs))
    else:
        parts = [_sweep_one(job) for job in jobs]
    report = AuditReport()
    for part in parts:
        report.extend(part)
    return report
