"""Prime-field arithmetic and message storage.

Only prime moduli are supported. The retrieval scheme uses {0,1}
coefficients exclusively, so addition and subtraction are all it needs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

SUPPORTED_PRIMES = (2, 3, 5, 7, 11)


class FieldMismatchError(ValueError):
    """Raised when two operands live in different fields."""


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n < 4:
        return True
    if n % 2 == 0:
        return False
    i = 3
    while i * i <= n:
        if n % i == 0:
            return False
        i += 2
    return True


def check_prime(q: int) -> int:
    if not is_prime(q):
        raise ValueError(f"q must be prime, got {q}")
    return q


@dataclass(frozen=True, slots=True)
class FieldElement:
    value: int
    modulus: int

    def __post_init__(self):
        if self.modulus < 2:
            raise ValueError(f"modulus must be >= 2, got {self.modulus}")
        if not 0 <= self.value < self.modulus:
            raise ValueError(f"value {self.value} outside [0, {self.modulus - 1}]")

    @classmethod
    def of(cls, value: int, q: int) -> FieldElement:
        """Build an element from any integer, reducing it mod ``q``."""
        return cls(int(value) % q, q)

    def __add__(self, other: FieldElement) -> FieldElement:
        return add(self, other)

    def __sub__(self, other: FieldElement) -> FieldElement:
        return sub(self, other)

    def __int__(self) -> int:
        return self.value


def _same_field(a: FieldElement, b: FieldElement) -> int:
    if a.modulus != b.modulus:
        raise FieldMismatchError(f"incompatible fields: F_{a.modulus} vs F_{b.modulus}")
    return a.modulus


def add(a: FieldElement, b: FieldElement) -> FieldElement:
    q = _same_field(a, b)
    return FieldElement((a.value + b.value) % q, q)


def sub(a: FieldElement, b: FieldElement) -> FieldElement:
    q = _same_field(a, b)
    return FieldElement((a.value - b.value) % q, q)


class MessageStore:
    """K messages of L subpackets each, held as a read-only ``(K, L)`` array.

    Messages and subpackets are addressed 1-based, matching the query
    plans: ``store.symbol(i, t)`` is subpacket ``t`` of message ``i``.
    """

    def __init__(self, q: int, data):
        check_prime(q)
        arr = np.array(data, dtype=np.int64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"store data must be a non-empty K x L grid, got shape {arr.shape}")
        if arr.min() < 0 or arr.max() >= q:
            raise ValueError(f"store values must lie in [0, {q - 1}]")
        arr.flags.writeable = False
        self.q = q
        self.data = arr

    @property
    def K(self) -> int:
        return self.data.shape[0]

    @property
    def L(self) -> int:
        return self.data.shape[1]

    def symbol(self, message: int, index: int) -> int:
        if not (1 <= message <= self.K and 1 <= index <= self.L):
            raise IndexError(f"subpacket ({message}, {index}) outside {self.K} x {self.L} store")
        return int(self.data[message - 1, index - 1])

    def element(self, message: int, index: int) -> FieldElement:
        return FieldElement(self.symbol(message, index), self.q)

    def row(self, message: int) -> tuple[int, ...]:
        return tuple(int(v) for v in self.data[message - 1])

    def __add__(self, other: MessageStore) -> MessageStore:
        if self.q != other.q:
            raise FieldMismatchError(f"incompatible fields: F_{self.q} vs F_{other.q}")
        if self.data.shape != other.data.shape:
            raise ValueError("store shapes differ")
        return MessageStore(self.q, (self.data + other.data) % self.q)

    def __eq__(self, other):
        if not isinstance(other, MessageStore):
            return NotImplemented
        return self.q == other.q and np.array_equal(self.data, other.data)

    def __repr__(self):
        return f"MessageStore(q={self.q}, K={self.K}, L={self.L})"

    def to_dict(self) -> dict:
        return {"q": self.q, "K": self.K, "L": self.L, "data": self.data.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj: dict) -> MessageStore:
        store = cls(int(obj["q"]), obj["data"])
        if (store.K, store.L) != (obj["K"], obj["L"]):
            raise ValueError("declared K/L do not match data dimensions")
        return store


def generate_store(seed: int, q: int, K: int, L: int) -> MessageStore:
    """Draw a uniformly random store with numpy's PCG64 generator.

    The same ``seed`` always yields the same store.
    """
    check_prime(q)
    if K < 1 or L < 1:
        raise ValueError(f"need K >= 1 and L >= 1, got K={K}, L={L}")
    rng = np.random.default_rng(seed)
    return MessageStore(q, rng.integers(0, q, size=(K, L)))
