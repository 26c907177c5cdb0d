"""Arithmetic in GF(2^N), polynomial basis, little-endian bitmasks.

Bit ``j`` of an element (or of a modulus) is the coefficient of ``x^j``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MAX_DEGREE = 63


class FieldError(ValueError):
    pass


def clmul(a: int, b: int) -> int:
    """Carry-less (GF(2)[x]) product of two bitmasks."""
    out = 0
    while b:
        if b & 1:
            out ^= a
        a <<= 1
        b >>= 1
    return out


def poly_mod(a: int, f: int) -> int:
    df = f.bit_length() - 1
    while a.bit_length() - 1 >= df:
        a ^= f << (a.bit_length() - 1 - df)
    return a


def poly_gcd(a: int, b: int) -> int:
    while b:
        a, b = b, poly_mod(a, b)
    return a


def _mulmod(a: int, b: int, f: int) -> int:
    return poly_mod(clmul(a, b), f)


def is_irreducible(f: int) -> bool:
    """Ben-Or test: f has no factor of degree d for every d <= deg/2."""
    n = f.bit_length() - 1
    if n < 1:
        return False
    if n == 1:
        return True
    if not f & 1:
        return False
    x = 0b10
    h = x
    for _ in range(n // 2):
        h = _mulmod(h, h, f)
        if poly_gcd(f, h ^ x) != 1:
            return False
    return True


@lru_cache(maxsize=None)
def find_modulus(degree: int) -> int:
    """Least (as an integer) irreducible polynomial of the given degree."""
    if not 1 <= degree <= MAX_DEGREE:
        raise FieldError(f"degree must be in [1, {MAX_DEGREE}], got {degree}")
    for f in range(1 << degree, 1 << (degree + 1)):
        if is_irreducible(f):
            return f
    raise AssertionError("unreachable: irreducible polynomials exist in every degree")


@dataclass(frozen=True)
class FieldSpec:
    degree: int
    modulus: int

    def __post_init__(self):
        if not 1 <= self.degree <= MAX_DEGREE:
            raise FieldError(f"degree must be in [1, {MAX_DEGREE}], got {self.degree}")
        if self.modulus.bit_length() - 1 != self.degree:
            raise FieldError(f"modulus {self.modulus:#b} does not have degree {self.degree}")
        if not is_irreducible(self.modulus):
            raise FieldError(f"modulus {self.modulus:#b} is reducible")

    @classmethod
    def of_degree(cls, degree: int) -> FieldSpec:
        return cls(degree, find_modulus(degree))

    @property
    def order(self) -> int:
        return 1 << self.degree

    def __call__(self, value: int) -> FieldElement:
        return FieldElement(self, value)

    def mul(self, a: int, b: int) -> int:
        """Raw product of two bitmasks; no range checks."""
        return poly_mod(clmul(a, b), self.modulus)

    def mul_array(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Elementwise product of uint64 arrays (shift-and-add with interleaved reduction)."""
        a = np.asarray(a, dtype=np.uint64).copy()
        b = np.asarray(b, dtype=np.uint64)
        a, b = np.broadcast_arrays(a, b)
        a = a.copy()
        out = np.zeros(a.shape, dtype=np.uint64)
        top = np.uint64(1 << (self.degree - 1))
        low = np.uint64(self.modulus ^ (1 << self.degree))
        one = np.uint64(1)
        for j in range(self.degree):
            bit = (b >> np.uint64(j)) & one
            out ^= a * bit
            carry = (a & top) != 0
            a = (a << one) & np.uint64((1 << self.degree) - 1)
            a[carry] ^= low
        return out

    def mul_table(self) -> np.ndarray:
        return _mul_table(self.degree, self.modulus)

    def to_dict(self) -> dict:
        return {"degree": self.degree, "modulus": self.modulus}

    @classmethod
    def from_dict(cls, d: dict) -> FieldSpec:
        modulus = d.get("modulus")
        if modulus is None:
            return cls.of_degree(int(d["degree"]))
        return cls(int(d["degree"]), int(modulus))


@lru_cache(maxsize=16)
def _mul_table(degree: int, modulus: int) -> np.ndarray:
    if degree > 10:
        raise FieldError("multiplication tables are only built for degree <= 10")
    spec = FieldSpec(degree, modulus)
    q = spec.order
    elems = np.arange(q, dtype=np.uint64)
    table = spec.mul_array(elems[:, None], elems[None, :])
    table.setflags(write=False)
    return table


@dataclass(frozen=True)
class FieldElement:
    field: FieldSpec
    value: int

    def __post_init__(self):
        if not 0 <= self.value < self.field.order:
            raise FieldError(f"value {self.value} out of range for GF(2^{self.field.degree})")

    def __add__(self, other: FieldElement) -> FieldElement:
        return ff_add(self, other)

    __sub__ = __add__

    def __mul__(self, other: FieldElement) -> FieldElement:
        return ff_mul(self, other, self.field)

    def __pow__(self, e: int) -> FieldElement:
        result = 1
        base = self.value
        while e:
            if e & 1:
                result = self.field.mul(result, base)
            base = self.field.mul(base, base)
            e >>= 1
        return FieldElement(self.field, result)

    def __int__(self) -> int:
        return self.value

    def __repr__(self):
        return f"GF(2^{self.field.degree})({self.value:#x})"


def ff_add(a: FieldElement, b: FieldElement) -> FieldElement:
    if a.field != b.field:
        raise FieldError("operands belong to different fields")
    return FieldElement(a.field, a.value ^ b.value)


def ff_mul(a: FieldElement, b: FieldElement, spec: FieldSpec | None = None) -> FieldElement:
    spec = spec or a.field
    if a.field != spec or b.field != spec:
        raise FieldError("operands belong to different fields")
    return FieldElement(spec, spec.mul(a.value, b.value))
