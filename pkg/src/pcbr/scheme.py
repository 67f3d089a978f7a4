"""Query construction.

For ``D <= K/2`` the messages are laid out in alternating S1/S2 blocks and
every admissible support is a set of same-position elements drawn from
distinct blocks of one side. Subpacket indices are then assigned in order
of increasing support size: interference-only symbols and every demand
subpacket get fresh indices, while the interference part of a
demand-bearing k-sum copies the indices of a (k-1)-sum fetched from another
server. Subtracting that (k-1)-sum at decode time exposes one demand
subpacket.

For ``D > K/2`` the 2D-K messages shared by all windows are downloaded
directly and the rest is handled by the small-demand construction on a
reduced instance.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Optional

import numpy as np

from .params import Params, ParameterError, Regime, _sub_params, window


class ConstructionError(RuntimeError):
    """Counting mismatch while indexing a plan; names the offending support."""


Support = tuple[int, ...]


@dataclass(frozen=True)
class Partition:
    s1_blocks: tuple[Support, ...]
    s2_blocks: tuple[Support, ...]

    @property
    def s1(self) -> frozenset[int]:
        return frozenset(i for b in self.s1_blocks for i in b)

    @property
    def s2(self) -> frozenset[int]:
        return frozenset(i for b in self.s2_blocks for i in b)


@dataclass(frozen=True)
class SymbolSpec:
    """One {0,1}-combination requested from one server.

    ``indices[t]`` is the subpacket index used for message ``support[t]``.
    ``side_info`` is ``(server, position)`` of the (k-1)-sum whose answer
    cancels the interference in this symbol.
    """

    server: int
    support: Support
    indices: tuple[int, ...]
    demand_entry: Optional[int] = None
    side_info: Optional[tuple[int, int]] = None

    @property
    def entries(self) -> dict[int, int]:
        return dict(zip(self.support, self.indices))

    @property
    def k(self) -> int:
        return len(self.support)

    def index_of(self, message: int) -> int:
        return self.indices[self.support.index(message)]


@dataclass(frozen=True)
class ReducedInstance:
    common: Support
    params: Params
    relabel_map: dict[int, int]  # reduced index -> original index
    demand_index: int


@dataclass(frozen=True)
class QueryPlan:
    params: Params
    demand_index: int
    servers: tuple[tuple[SymbolSpec, ...], ...]
    phase1_count: int = 0
    reduction: Optional[ReducedInstance] = field(default=None, compare=False)

    @property
    def demand(self) -> Support:
        return tuple(window(self.demand_index, self.params.D))

    @property
    def L(self) -> int:
        return self.params.L

    def server(self, n: int) -> tuple[SymbolSpec, ...]:
        return self.servers[n - 1]

    def symbol(self, n: int, position: int) -> SymbolSpec:
        return self.servers[n - 1][position]

    @property
    def phase1_symbols(self) -> tuple[tuple[SymbolSpec, ...], ...]:
        return tuple(s[: self.phase1_count] for s in self.servers)

    @property
    def relabel_map(self) -> Optional[dict[int, int]]:
        return None if self.reduction is None else self.reduction.relabel_map

    def all_symbols(self):
        for specs in self.servers:
            yield from specs


def demand_window(j: int, D: int, K: Optional[int] = None) -> Support:
    if j < 1 or (K is not None and j > K - D + 1):
        upper = "" if K is None else f", {K - D + 1}"
        raise ParameterError(f"demand index j={j} outside [1{upper}]")
    return tuple(window(j, D))


def _check_demand_index(p: Params, j: int) -> None:
    if not 1 <= j <= p.E:
        wins = ", ".join(f"W{i}=[{i}:{i + p.D - 1}]" for i in range(1, p.E + 1))
        raise ParameterError(f"demand index j={j} outside [1:{p.E}]; valid windows: {wins}")


def build_partition(p: Params) -> Partition:
    if p.regime is Regime.LARGE_D:
        raise ParameterError("build_partition needs D <= K/2; use reduce_large_demand first")
    s1, s2 = [], []
    start = 1
    for l in range(p.g):
        s1.append(tuple(range(start, start + p.M)))
        start += p.M
        if l < p.f and p.D > p.M:
            s2.append(tuple(range(start, start + p.D - p.M)))
            start += p.D - p.M
    assert start == p.K + 1
    return Partition(tuple(s1), tuple(s2))


def _chain_supports(blocks, width: int, D: int):
    """Same-position selections from distinct blocks, for every size k."""
    for k in range(1, len(blocks) + 1):
        for chosen in combinations(blocks, k):
            for pos in range(width):
                U = tuple(sorted(b[pos] for b in chosen))
                assert len({i % D for i in U}) == 1
                yield U


def enumerate_supports(partition: Partition, p: Params) -> dict[Support, int]:
    """Per-server multiplicity T_U of every support that is actually queried."""
    N = p.N
    plan: dict[Support, int] = {}
    for U in _chain_supports(partition.s1_blocks, p.M, p.D):
        plan[U] = (N - 1) ** (len(U) - 1)
    for U in _chain_supports(partition.s2_blocks, p.D - p.M, p.D):
        plan[U] = N * (N - 1) ** (len(U) - 1)
    return dict(sorted(plan.items(), key=lambda kv: (len(kv[0]), kv[0])))


def _build_small(p: Params, j: int) -> QueryPlan:
    supports = enumerate_supports(build_partition(p), p)
    demand = set(window(j, p.D))
    counters = Counter()

    def fresh(i: int) -> int:
        counters[i] += 1
        return counters[i]

    servers: list[list[SymbolSpec]] = [[] for _ in range(p.N)]
    # positions[U][n-1] -> positions of the copies of U in server n's list
    positions: dict[Support, list[list[int]]] = {}

    for U, T in supports.items():
        hit = demand.intersection(U)
        if len(hit) > 1:
            raise ConstructionError(f"support {U} holds {len(hit)} demand indices")
        d = hit.pop() if hit else None
        positions[U] = [[] for _ in range(p.N)]

        if d is None or len(U) == 1:
            for n in range(1, p.N + 1):
                for _ in range(T):
                    spec = SymbolSpec(n, U, tuple(fresh(i) for i in U), demand_entry=d)
                    positions[U][n - 1].append(len(servers[n - 1]))
                    servers[n - 1].append(spec)
            continue

        V = tuple(i for i in U if i != d)
        if V not in positions:
            raise ConstructionError(f"support {U}: no (k-1)-sums on {V} to cancel against")
        for n in range(1, p.N + 1):
            labels = [(m, pos) for m in range(1, p.N + 1) if m != n for pos in positions[V][m - 1]]
            if len(labels) != T:
                raise ConstructionError(
                    f"support {U} at server {n}: {len(labels)} side-information symbols for {T} copies")
            for m, pos in labels:
                src = servers[m - 1][pos]
                idx = tuple(fresh(i) if i == d else src.index_of(i) for i in U)
                spec = SymbolSpec(n, U, idx, demand_entry=d, side_info=(m, pos))
                positions[U][n - 1].append(len(servers[n - 1]))
                servers[n - 1].append(spec)

    for d in demand:
        if counters[d] != p.L:
            raise ConstructionError(f"demand message {d} received {counters[d]} indices, expected {p.L}")
    return QueryPlan(p, j, tuple(tuple(s) for s in servers))


def reduce_large_demand(p: Params, j: int) -> ReducedInstance:
    if p.regime is not Regime.LARGE_D:
        raise ParameterError("reduce_large_demand needs D > K/2")
    _check_demand_index(p, j)
    K, D = p.K, p.D
    common = tuple(range(K - D + 1, D + 1))
    reduced = _sub_params(p.N, 2 * K - 2 * D, K - D)
    shift = 2 * D - K
    relabel = {i: i for i in range(1, K - D + 1)}
    relabel.update({i - shift: i for i in range(D + 1, K + 1)})
    inverse = {orig: red for red, orig in relabel.items()}
    residual = sorted(inverse[i] for i in window(j, D) if i not in common)
    assert residual == list(range(residual[0], residual[0] + reduced.D)), residual
    return ReducedInstance(common, reduced, relabel, residual[0])


def _build_large(p: Params, j: int) -> QueryPlan:
    red = reduce_large_demand(p, j)
    sub = _build_small(red.params, red.demand_index)
    assert sub.L == p.L
    N = p.N
    relabel = red.relabel_map
    offset = len(red.common) * N
    servers = []
    for n in range(1, N + 1):
        specs = [SymbolSpec(n, (c,), ((n - 1) * N + t,), demand_entry=c)
                 for c in red.common for t in range(1, N + 1)]
        for spec in sub.server(n):
            specs.append(SymbolSpec(
                n,
                tuple(relabel[i] for i in spec.support),
                spec.indices,
                demand_entry=None if spec.demand_entry is None else relabel[spec.demand_entry],
                side_info=None if spec.side_info is None else (spec.side_info[0], spec.side_info[1] + offset),
            ))
        servers.append(tuple(specs))
    return QueryPlan(p, j, tuple(servers), phase1_count=offset, reduction=red)


def build_canonical_plan(p: Params, j: int) -> QueryPlan:
    """Deterministic, unmasked query plan for demand window ``W_j``."""
    _check_demand_index(p, j)
    if p.regime is Regime.LARGE_D:
        return _build_large(p, j)
    return _build_small(p, j)


Perms = tuple[tuple[int, ...], ...]


def identity_perms(K: int, L: int) -> Perms:
    return tuple(tuple(range(1, L + 1)) for _ in range(K))


def draw_perms(K: int, L: int, seed) -> Perms:
    rng = np.random.default_rng(seed)
    base = np.tile(np.arange(1, L + 1), (K, 1))
    return tuple(tuple(int(v) for v in row) for row in rng.permuted(base, axis=1))


def apply_perms(plan: QueryPlan, perms: Perms) -> QueryPlan:
    """Relabel every index: canonical index c of message i becomes perms[i-1][c-1]."""
    servers = tuple(
        tuple(replace(s, indices=tuple(perms[i - 1][c - 1] for i, c in zip(s.support, s.indices)))
              for s in specs)
        for specs in plan.servers
    )
    return replace(plan, servers=servers)


def mask_plan(plan: QueryPlan, seed=None, perms: Optional[Perms] = None) -> tuple[QueryPlan, Perms]:
    """Hide the plan behind one private uniform permutation per message.

    Pass ``perms`` to force a specific relabeling (e.g. identities in tests);
    otherwise they are drawn from ``seed``. The permutations stay with the
    user, who needs them to map decoded subpackets back to canonical slots.
    """
    K, L = plan.params.K, plan.L
    if perms is None:
        perms = draw_perms(K, L, seed)
    if len(perms) != K or any(sorted(p) != list(range(1, L + 1)) for p in perms):
        raise ValueError(f"perms must be {K} permutations of [1:{L}]")
    return apply_perms(plan, perms), perms


def server_shape(plan: QueryPlan, n: int) -> tuple[tuple[Support, int], ...]:
    """Demand-independent view of server n's query: sorted (support, count) pairs."""
    return tuple(sorted(Counter(s.support for s in plan.server(n)).items()))
