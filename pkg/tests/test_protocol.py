from dataclasses import replace
from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pcbr.field import MessageStore, generate_store
from pcbr.params import derive_params, optimal_rate
from pcbr.protocol import (
    DecodingError, answer_all, answer_query, coefficient_matrix, decode, in_row_space,
    oracle_decodable, row_reduce, run_round_trip,
)
from pcbr.scheme import QueryPlan, SymbolSpec, build_canonical_plan, identity_perms, mask_plan


def plan_252(j=1):
    return build_canonical_plan(derive_params(2, 5, 2), j)


def drop_symbol(plan, n, pos):
    servers = list(plan.servers)
    servers[n - 1] = servers[n - 1][:pos] + servers[n - 1][pos + 1:]
    return replace(plan, servers=tuple(servers))


def test_answer_singleton_and_xor():
    store = MessageStore(2, [[1, 0, 1, 1], [0, 1, 1, 0]])
    specs = [SymbolSpec(1, (1,), (3,)), SymbolSpec(1, (1, 2), (1, 2)), SymbolSpec(1, (1, 2), (3, 3))]
    # a3 = 1; a1 ^ b2 = 1 ^ 1; a3 ^ b3 = 1 ^ 1
    assert answer_query(store, specs).values == (1, 0, 0)


def test_answer_values_are_field_sums():
    store = MessageStore(5, [[4, 3], [2, 1]])
    a = answer_query(store, [SymbolSpec(2, (1, 2), (1, 1)), SymbolSpec(2, (2,), (2,))])
    assert a.server == 2 and a.values == (1, 1)
    assert [e.value for e in a.elements] == [1, 1]
    assert a.to_dict() == {"server": 2, "values": [1, 1]}


def test_answer_zero_store():
    plan = plan_252()
    zero = MessageStore(3, np.zeros((5, 8), dtype=int))
    assert all(v == 0 for a in answer_all(zero, plan) for v in a.values)


def test_answer_rejects_bad_index():
    store = MessageStore(2, [[0, 1]])
    with pytest.raises(IndexError):
        answer_query(store, [SymbolSpec(1, (1,), (3,))])


@settings(max_examples=30, deadline=None)
@given(s1=st.integers(0, 2**32), s2=st.integers(0, 2**32), q=st.sampled_from([2, 3, 5]), j=st.integers(1, 4))
def test_answer_linearity(s1, s2, q, j):
    plan, _ = mask_plan(plan_252(j), s1 ^ s2)
    x, y = generate_store(s1, q, 5, 8), generate_store(s2, q, 5, 8)
    for ax, ay, axy in zip(answer_all(x, plan), answer_all(y, plan), answer_all(x + y, plan)):
        assert axy.values == tuple((u + v) % q for u, v in zip(ax.values, ay.values))


def test_table_one_subtractions():
    plan = plan_252(1)
    store = generate_store(5, 5, 5, 8)
    answers = answer_all(store, plan)
    s1 = plan.server(1)
    pos = next(i for i, s in enumerate(s1) if s.support == (1, 3))
    m, side = s1[pos].side_info
    assert (answers[0].values[pos] - answers[m - 1].values[side]) % 5 == store.symbol(1, 3)
    pos = next(i for i, s in enumerate(s1) if s.support == (1, 3, 5))
    m, side = s1[pos].side_info
    assert (answers[0].values[pos] - answers[m - 1].values[side]) % 5 == store.symbol(1, 7)


@pytest.mark.parametrize("j", [1, 2, 3, 4])
@pytest.mark.parametrize("q", [2, 3, 5])
def test_decode_recovers_demand_rows(j, q):
    plan = plan_252(j)
    masked, perms = mask_plan(plan, 100 + j)
    store = generate_store(j * 7 + q, q, 5, 8)
    result = decode(answer_all(store, masked), masked, perms)
    assert set(result.recovered) == set(plan.demand)
    assert result.matches(store)
    for d in plan.demand:
        assert sorted(result.exposed[d]) == list(range(1, 9))


def test_masking_neutrality():
    plan = plan_252(3)
    store = generate_store(9, 3, 5, 8)
    ident, perms0 = mask_plan(plan, perms=identity_perms(5, 8))
    rand, perms1 = mask_plan(plan, 1234)
    r0 = decode(answer_all(store, ident), ident, perms0)
    r1 = decode(answer_all(store, rand), rand, perms1)
    assert r0.recovered == r1.recovered
    assert r0.exposed == r1.exposed


def test_decode_missing_link_raises():
    plan = plan_252(1)
    servers = list(plan.servers)
    pos = next(i for i, s in enumerate(servers[0]) if s.support == (1, 3))
    servers[0] = servers[0][:pos] + (replace(servers[0][pos], side_info=None),) + servers[0][pos + 1:]
    broken = replace(plan, servers=tuple(servers))
    store = generate_store(0, 2, 5, 8)
    with pytest.raises(DecodingError, match=r"symbol \d+ \(1, 3\)"):
        decode(answer_all(store, broken), broken)


def test_coefficient_matrix_shape_and_rows():
    plan = plan_252()
    A = coefficient_matrix(plan)
    assert A.shape == (26, 40)
    specs = list(plan.all_symbols())
    for row, s in zip(A, specs):
        assert row.sum() == s.k
        for m, t in zip(s.support, s.indices):
            assert row[(m - 1) * 8 + t - 1] == 1


def brute_span_contains(A, v, q):
    """Enumerate every F_q combination of the rows (tiny matrices only)."""
    for coeffs in product(range(q), repeat=A.shape[0]):
        if np.array_equal(np.array(coeffs) @ A % q, v % q):
            return True
    return False


@settings(max_examples=60, deadline=None)
@given(data=st.data(), q=st.sampled_from([2, 3]))
def test_row_space_matches_brute_force(data, q):
    rows = data.draw(st.integers(1, 4))
    cols = data.draw(st.integers(1, 4))
    A = np.array(data.draw(st.lists(st.lists(st.integers(0, q - 1), min_size=cols, max_size=cols),
                                    min_size=rows, max_size=rows)))
    v = np.array(data.draw(st.lists(st.integers(0, q - 1), min_size=cols, max_size=cols)))
    rref, pivots = row_reduce(A, q)
    assert bool(in_row_space(rref, pivots, v[None, :], q)[0]) == brute_span_contains(A, v, q)


def test_row_reduce_rank():
    A = np.array([[1, 1, 0], [0, 1, 1], [1, 0, 1]])
    assert len(row_reduce(A, 2)[1]) == 2
    assert len(row_reduce(A, 3)[1]) == 3


@pytest.mark.parametrize("j", [1, 2, 3, 4])
def test_oracle_true_on_plans(j):
    assert oracle_decodable(plan_252(j), 2)
    assert oracle_decodable(mask_plan(plan_252(j), j)[0], 3)


def test_oracle_false_without_demand_symbol():
    plan = plan_252(1)
    pos = next(i for i, s in enumerate(plan.server(1)) if s.demand_entry is not None and s.k == 2)
    assert not oracle_decodable(drop_symbol(plan, 1, pos), 2)


def test_oracle_trivial_full_download():
    p = derive_params(2, 5, 2)
    specs = tuple(SymbolSpec(1, (m,), (t,)) for m in range(1, 6) for t in range(1, 9))
    full = QueryPlan(p, 1, (specs, ()))
    assert oracle_decodable(full, 2)


@pytest.mark.parametrize("N,K,D,j,q,rate", [
    (2, 5, 2, 1, 2, Fraction(8, 13)),
    (2, 5, 3, 1, 2, Fraction(3, 4)),
    (3, 7, 3, 2, 3, None),
])
def test_run_round_trip(N, K, D, j, q, rate):
    rt = run_round_trip(N, K, D, j, q, seed=17)
    assert rt.ok and rt.decoded and rt.oracle
    assert rt.rate == (rate or optimal_rate(N, K, D))
    assert rt.to_dict()["rate"] == {"num": rt.rate.numerator, "den": rt.rate.denominator}


def test_run_round_trip_is_deterministic():
    assert run_round_trip(2, 6, 2, 3, 3, 5) == run_round_trip(2, 6, 2, 3, 3, 5)


def test_demand_subpacket_coverage():
    p = derive_params(3, 7, 3)
    for j in range(1, p.E + 1):
        masked, perms = mask_plan(build_canonical_plan(p, j), j)
        store = generate_store(j, 2, 7, p.L)
        result = decode(answer_all(store, masked), masked, perms)
        assert sum(len(v) for v in result.exposed.values()) == p.D * p.L
        for d in masked.demand:
            assert sorted(result.exposed[d]) == list(range(1, p.L + 1))
