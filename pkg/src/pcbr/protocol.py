"""One retrieval round: servers answer, the user decodes.

The decoder follows the side-information links recorded in the plan.
:func:`oracle_decodable` ignores those links entirely and asks, by
Gaussian elimination over F_q, whether every demand subpacket lies in
the row space of the downloaded combinations.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .field import FieldElement, MessageStore, check_prime, generate_store
from .params import derive_params, optimal_rate
from .scheme import Perms, QueryPlan, SymbolSpec, build_canonical_plan, mask_plan


class DecodingError(RuntimeError):
    pass


@dataclass(frozen=True)
class Answer:
    server: int
    q: int
    values: tuple[int, ...]

    @property
    def elements(self) -> tuple[FieldElement, ...]:
        return tuple(FieldElement(v, self.q) for v in self.values)

    def to_dict(self) -> dict:
        return {"server": self.server, "values": list(self.values)}


@dataclass(frozen=True)
class DecodeResult:
    q: int
    recovered: dict[int, tuple[int, ...]]  # demand message -> its L subpackets, storage order
    exposed: dict[int, tuple[int, ...]]  # demand message -> canonical indices in decode order

    def matches(self, store: MessageStore) -> bool:
        return all(store.row(i) == row for i, row in self.recovered.items())


def answer_query(store: MessageStore, specs: Sequence[SymbolSpec]) -> Answer:
    """Evaluate one server's symbols against the store. Pure and deterministic."""
    if not specs:
        raise ValueError("empty query")
    servers = {s.server for s in specs}
    if len(servers) != 1:
        raise ValueError(f"query mixes servers {sorted(servers)}")
    values = []
    for s in specs:
        total = 0
        for m, t in zip(s.support, s.indices):
            total += store.symbol(m, t)
        values.append(total % store.q)
    return Answer(servers.pop(), store.q, tuple(values))


def answer_all(store: MessageStore, plan: QueryPlan) -> list[Answer]:
    return [answer_query(store, specs) for specs in plan.servers]


def decode(answers: Sequence[Answer], plan: QueryPlan, perms: Optional[Perms] = None) -> DecodeResult:
    """Recover every demand subpacket by direct reads and single subtractions.

    With ``perms`` the exposed indices are reported in the canonical frame
    (before masking); the recovered rows are always in storage order.
    """
    p = plan.params
    if len(answers) != p.N:
        raise DecodingError(f"expected {p.N} answers, got {len(answers)}")
    q = answers[0].q
    by_server = {a.server: a for a in answers}
    for n, specs in enumerate(plan.servers, start=1):
        if n not in by_server or len(by_server[n].values) != len(specs):
            raise DecodingError(f"answer from server {n} missing or of wrong length")

    demand = plan.demand
    got: dict[int, dict[int, int]] = {d: {} for d in demand}
    order: dict[int, list[int]] = {d: [] for d in demand}
    for n, specs in enumerate(plan.servers, start=1):
        for pos, spec in enumerate(specs):
            d = spec.demand_entry
            if d is None:
                continue
            value = by_server[n].values[pos]
            if spec.k > 1:
                if spec.side_info is None:
                    raise DecodingError(f"server {n} symbol {pos} {spec.support}: no side-information link")
                m, s = spec.side_info
                side = plan.symbol(m, s)
                rest = tuple(i for i in spec.support if i != d)
                if side.support != rest or any(side.index_of(i) != spec.index_of(i) for i in rest):
                    raise DecodingError(f"server {n} symbol {pos}: link to ({m}, {s}) does not cancel")
                value = (value - by_server[m].values[s]) % q
            t = spec.index_of(d)
            if t in got[d]:
                raise DecodingError(f"message {d} subpacket {t} exposed twice")
            got[d][t] = value
            order[d].append(t)

    L = plan.L
    recovered = {}
    for d in demand:
        if len(got[d]) != L:
            raise DecodingError(f"message {d}: recovered {len(got[d])} of {L} subpackets")
        recovered[d] = tuple(got[d][t] for t in range(1, L + 1))

    if perms is not None:
        inverse = {d: {real: c for c, real in enumerate(perms[d - 1], start=1)} for d in demand}
        exposed = {d: tuple(inverse[d][t] for t in order[d]) for d in demand}
    else:
        exposed = {d: tuple(order[d]) for d in demand}
    return DecodeResult(q, recovered, exposed)


def coefficient_matrix(plan: QueryPlan) -> np.ndarray:
    """0/1 matrix: one row per downloaded symbol, column (i-1)*L + (t-1) per subpacket."""
    L = plan.L
    rows = list(plan.all_symbols())
    A = np.zeros((len(rows), plan.params.K * L), dtype=np.int64)
    for r, s in enumerate(rows):
        for m, t in zip(s.support, s.indices):
            A[r, (m - 1) * L + (t - 1)] = 1
    return A


def row_reduce(A: np.ndarray, q: int) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form over F_q (q prime) and the pivot columns."""
    R = np.array(A, dtype=np.int64) % q
    n_rows, n_cols = R.shape
    pivots = []
    r = 0
    for c in range(n_cols):
        if r == n_rows:
            break
        nz = np.flatnonzero(R[r:, c])
        if nz.size == 0:
            continue
        p = r + int(nz[0])
        if p != r:
            R[[r, p]] = R[[p, r]]
        R[r] = R[r] * pow(int(R[r, c]), -1, q) % q
        col = R[:, c].copy()
        col[r] = 0
        hit = np.flatnonzero(col)
        if hit.size:
            R[hit] = (R[hit] - np.outer(col[hit], R[r])) % q
        pivots.append(c)
        r += 1
    return R, pivots


def in_row_space(rref: np.ndarray, pivots: Sequence[int], vectors: np.ndarray, q: int) -> np.ndarray:
    """Boolean per row of ``vectors``: does it lie in the span of ``rref``?"""
    V = np.array(vectors, dtype=np.int64) % q
    for r, c in enumerate(pivots):
        coef = V[:, c].copy()
        if coef.any():
            V = (V - np.outer(coef, rref[r])) % q
    return ~V.any(axis=1)


def oracle_decodable(plan: QueryPlan, q: int) -> bool:
    check_prime(q)
    A = coefficient_matrix(plan)
    L = plan.L
    cols = [(d - 1) * L + t for d in plan.demand for t in range(L)]
    targets = np.zeros((len(cols), A.shape[1]), dtype=np.int64)
    targets[np.arange(len(cols)), cols] = 1
    rref, pivots = row_reduce(A, q)
    return bool(in_row_space(rref, pivots, targets, q).all())


@dataclass(frozen=True)
class RoundTrip:
    N: int
    K: int
    D: int
    j: int
    q: int
    seed: int
    rate: Fraction
    decoded: bool
    oracle: bool

    @property
    def ok(self) -> bool:
        return self.decoded and self.oracle

    def to_dict(self) -> dict:
        return {
            "params": derive_params(self.N, self.K, self.D).to_dict() | {"j": self.j, "q": self.q, "seed": self.seed},
            "rate": {"num": self.rate.numerator, "den": self.rate.denominator},
            "ok": self.ok,
            "oracle": self.oracle,
        }


def run_round_trip(N: int, K: int, D: int, j: int, q: int, seed: int, *, check_oracle: bool = True) -> RoundTrip:
    """Build, mask, answer and decode one query; certify with the oracle."""
    check_prime(q)
    p = derive_params(N, K, D)
    plan = build_canonical_plan(p, j)
    mask_seed, store_seed = np.random.SeedSequence(seed).spawn(2)
    masked, perms = mask_plan(plan, mask_seed)
    store = generate_store(store_seed, q, K, p.L)

    sizes = {len(s) for s in masked.servers}
    if len(sizes) != 1:
        raise AssertionError(f"unbalanced download sizes {sorted(sizes)}")
    rate = Fraction(D * p.L, N * sizes.pop())
    assert rate == optimal_rate(N, K, D), f"achieved {rate} != optimal {optimal_rate(N, K, D)}"

    result = decode(answer_all(store, masked), masked, perms)
    oracle = oracle_decodable(masked, q) if check_oracle else True
    return RoundTrip(N, K, D, j, q, seed, rate, result.matches(store), oracle)
