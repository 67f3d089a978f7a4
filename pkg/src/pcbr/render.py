"""Text, JSON and CSV renderings of query plans."""

from __future__ import annotations

import csv
import io
import json
import string

from .scheme import QueryPlan, SymbolSpec


def message_name(i: int, K: int) -> str:
    return string.ascii_lowercase[i - 1] if K <= 26 else f"m{i}"


def symbol_text(s: SymbolSpec, K: int) -> str:
    if K <= 26:
        return "+".join(f"{message_name(m, K)}{t}" for m, t in zip(s.support, s.indices))
    return "+".join(f"m{m}[{t}]" for m, t in zip(s.support, s.indices))


def _section_title(k: int) -> str:
    return "singletons" if k == 1 else f"{k}-sums"


def _table(rows: list[list[str]], groups: list[str], n_servers: int) -> list[str]:
    headers = [f"Server {n}" for n in range(1, n_servers + 1)]
    width = max([len(h) for h in headers] + [len(c) for r in rows for c in r]) + 2
    rule = "+".join("-" * width for _ in headers)
    out = ["|".join(h.center(width) for h in headers), rule.replace("-", "=")]
    current = None
    for group, row in zip(groups, rows):
        if group != current:
            if current is not None:
                out.append(rule)
            out.append(f"[{group}]")
            current = group
        out.append("|".join(c.center(width) for c in row))
    return out


def plan_table(plan: QueryPlan) -> str:
    """Per-server query table, one symbol per row, grouped by sum size."""
    p = plan.params
    K = p.K
    demand = ", ".join(message_name(i, K) for i in plan.demand)
    members = ",".join(str(i) for i in plan.demand)
    lines = [f"Query table for W{plan.demand_index} = {{{members}}} (demand messages: {demand})",
             f"N={p.N} K={K} D={p.D} L={p.L}, {len(plan.servers[0])} symbols per server", ""]
    n_rows = len(plan.servers[0])
    start = plan.phase1_count
    if start:
        red = plan.reduction
        common = ", ".join(message_name(i, K) for i in red.common)
        lines.append(f"Phase 1: direct retrieval of common messages {common}")
        rows = [[symbol_text(plan.servers[n][r], K) for n in range(p.N)] for r in range(start)]
        lines += _table(rows, ["singletons"] * start, p.N)
        mapping = ", ".join(f"{a}->{message_name(b, K)}" for a, b in sorted(red.relabel_map.items()))
        lines += ["", f"Phase 2: reduced instance K={red.params.K} D={red.params.D} "
                      f"(reduced index -> message: {mapping})"]
    rows = [[symbol_text(plan.servers[n][r], K) for n in range(p.N)] for r in range(start, n_rows)]
    groups = [_section_title(plan.servers[0][r].k) for r in range(start, n_rows)]
    lines += _table(rows, groups, p.N)
    return "\n".join(lines)


def symbol_to_dict(s: SymbolSpec) -> dict:
    return {
        "support": list(s.support),
        "entries": {str(m): t for m, t in zip(s.support, s.indices)},
        "demand_entry": s.demand_entry,
        "side_info": None if s.side_info is None else {"server": s.side_info[0], "symbol": s.side_info[1]},
    }


def plan_to_dict(plan: QueryPlan) -> dict:
    out = {
        "params": plan.params.to_dict(),
        "demand_index": plan.demand_index,
        "servers": [[symbol_to_dict(s) for s in specs] for specs in plan.servers],
    }
    if plan.reduction is not None:
        red = plan.reduction
        out["phase1_count"] = plan.phase1_count
        out["common"] = list(red.common)
        out["relabel_map"] = {str(a): b for a, b in sorted(red.relabel_map.items())}
    return out


def plan_to_json(plan: QueryPlan) -> str:
    return json.dumps(plan_to_dict(plan), indent=2)


CSV_FIELDS = ["server", "k", "support", "entries", "demand_entry", "side_info"]


def plan_to_csv(plan: QueryPlan) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for s in plan.all_symbols():
        w.writerow([
            s.server, s.k,
            ";".join(map(str, s.support)),
            ";".join(f"{m}:{t}" for m, t in zip(s.support, s.indices)),
            "" if s.demand_entry is None else s.demand_entry,
            "" if s.side_info is None else f"{s.side_info[0]}:{s.side_info[1]}",
        ])
    return buf.getvalue()
