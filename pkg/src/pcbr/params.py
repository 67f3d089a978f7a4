"""Scheme parameters, the optimal rate and the subpacketization bounds.

Everything here is exact: rates are :class:`fractions.Fraction` values and
geometric sums are accumulated as integers.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from math import comb, gcd
from typing import Sequence


class ParameterError(ValueError):
    """An (N, K, D) triple or derived argument is out of range."""


class Regime(str, enum.Enum):
    SMALL_D = "SMALL_D"
    LARGE_D = "LARGE_D"


def geom(N: int, x: int) -> int:
    """Return 1 + N + ... + N^(x-1), i.e. (N^x - 1)/(N - 1) without division."""
    total, power = 0, 1
    for _ in range(x):
        total += power
        power *= N
    return total


@dataclass(frozen=True)
class Params:
    N: int
    K: int
    D: int

    def __post_init__(self):
        _validate(self.N, self.K, self.D, min_demand=1)

    @property
    def f(self) -> int:
        return self.K // self.D

    @property
    def g(self) -> int:
        return -(-self.K // self.D)

    @property
    def M(self) -> int:
        return self.K - self.D * (self.g - 1)

    @property
    def E(self) -> int:
        return self.K - self.D + 1

    @property
    def L(self) -> int:
        return self.N**self.g

    @property
    def regime(self) -> Regime:
        return Regime.LARGE_D if 2 * self.D > self.K else Regime.SMALL_D

    def to_dict(self) -> dict:
        return {
            "N": self.N, "K": self.K, "D": self.D,
            "f": self.f, "g": self.g, "M": self.M, "E": self.E, "L": self.L,
            "regime": self.regime.value,
        }


def _validate(N: int, K: int, D: int, min_demand: int = 2) -> None:
    for name, value in (("N", N), ("K", K), ("D", D)):
        if not isinstance(value, int) or isinstance(value, bool):
            raise ParameterError(f"{name} must be an integer, got {value!r}")
    if N < 2:
        raise ParameterError(f"N must be ≥ 2, got N={N}")
    if D < min_demand:
        raise ParameterError(f"D must be ≥ {min_demand}, got D={D}")
    if D > K - 1:
        raise ParameterError(f"D must be ≤ K−1, got D={D}, K={K}")


def derive_params(N: int, K: int, D: int) -> Params:
    """Validate a public (N, K, D) triple and derive f, g, M, E, L and the regime."""
    _validate(N, K, D)
    return Params(N, K, D)


def _sub_params(N: int, K: int, D: int) -> Params:
    # The large-demand reduction can produce D = 1 (when K = D + 1).
    _validate(N, K, D, min_demand=1)
    return Params(N, K, D)


def optimal_rate(N: int, K: int, D: int) -> Fraction:
    p = derive_params(N, K, D)
    return Fraction(D * N**p.f, D * N * geom(N, p.f) + K - D * p.f)


def subpack_upper(N: int, K: int, D: int) -> int:
    return derive_params(N, K, D).L


def subpack_lower(N: int, K: int, D: int) -> int:
    p = derive_params(N, K, D)
    Ng = N**p.g
    return Ng // gcd(Ng, D * geom(N, p.g) + K - D * p.g)


def coprimality_tightness(N: int, K: int, D: int) -> bool:
    """True when gcd(N, K - D(g-1)) = 1, in which case both bounds agree."""
    p = derive_params(N, K, D)
    tight = gcd(N, p.M) == 1
    if tight:
        lo, hi = subpack_lower(N, K, D), subpack_upper(N, K, D)
        assert lo == hi, f"coprime case but L_lower={lo} != L_upper={hi}"
    return tight


def window(j: int, D: int) -> range:
    return range(j, j + D)


def converse_bound(N: int, K: int, D: int, pi: Sequence[int]) -> Fraction:
    """Permutation-indexed converse on the rate.

    Windows are visited in the order ``pi``; each contributes the number of
    indices it adds to the running union, weighted by N^-(position-1).
    """
    p = derive_params(N, K, D)
    pi = tuple(pi)
    if sorted(pi) != list(range(1, p.E + 1)):
        raise ParameterError(f"pi must be a permutation of [1:{p.E}], got {pi}")
    covered: set[int] = set()
    total = Fraction(0)
    for pos, j in enumerate(pi):
        w = set(window(j, D))
        total += Fraction(len(w - covered), N**pos)
        covered |= w
    return D / total


def canonical_permutation(N: int, K: int, D: int) -> tuple[int, ...]:
    """Window order that makes :func:`converse_bound` equal the optimal rate.

    The first f windows tile [1:fD]; if D does not divide K the last window
    comes next and covers the K - fD leftovers. Remaining windows follow in
    ascending order. When D | K the tiling already covers [1:K] and the
    last-window rule would repeat window f, so it is skipped.
    """
    p = derive_params(N, K, D)
    order = [(j - 1) * D + 1 for j in range(1, p.f + 1)]
    if K % D:
        order.append(K - D + 1)
    used = set(order)
    order += [j for j in range(1, p.E + 1) if j not in used]
    pi = tuple(order)
    bound = converse_bound(N, K, D, pi)
    assert bound == optimal_rate(N, K, D), f"canonical converse {bound} != optimal rate"
    return pi


def symbols_per_server(N: int, K: int, D: int) -> int:
    p = derive_params(N, K, D)
    count = _symbols_per_server(p)
    # D*L/(N*R) must be exactly the per-server download.
    assert Fraction(D * p.L) / (N * optimal_rate(N, K, D)) == count
    return count


def _symbols_per_server(p: Params) -> int:
    N, K, D = p.N, p.K, p.D
    if p.regime is Regime.LARGE_D:
        return (2 * D - K) * N + (K - D) * (N + 1)
    return p.M * geom(N, p.g) + (D - p.M) * N * geom(N, p.f)


def census_s1(p: Params) -> int:
    """Per-server symbol count on S1 as the binomial sum over support sizes."""
    return p.M * sum(comb(p.g, k) * (p.N - 1) ** (k - 1) for k in range(1, p.g + 1))


def census_s2(p: Params) -> int:
    return (p.D - p.M) * p.N * sum(comb(p.f, k) * (p.N - 1) ** (k - 1) for k in range(1, p.f + 1))


def min_integral_L(N: int, K: int, D: int) -> int:
    """Smallest L >= 1 with D*L/(N*R) integral, found by direct scan."""
    rate = optimal_rate(N, K, D)
    L = 1
    while (Fraction(D * L) / (N * rate)).denominator != 1:
        L += 1
    return L


def bounds_report(N: int, K: int, D: int) -> dict:
    p = derive_params(N, K, D)
    rate = optimal_rate(N, K, D)
    return {
        "N": N, "K": K, "D": D, "f": p.f, "g": p.g, "M": p.M, "E": p.E,
        "rate": {"num": rate.numerator, "den": rate.denominator},
        "L_lower": subpack_lower(N, K, D),
        "L_upper": subpack_upper(N, K, D),
        "tight": coprimality_tightness(N, K, D),
        "symbols_per_server": symbols_per_server(N, K, D),
    }
