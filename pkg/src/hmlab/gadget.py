"""The GIP function over (F_q^r)^p, the truncated gadget, and extractor checks.

Indices are 0-based: rows ``i`` in ``range(p)``, blocks ``j`` in ``range(r)``.
A packed input stores element ``(i, j)`` at bit offset ``(i*r + j)*N``.
"""
from __future__ import annotations

import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._seeding import derive_seed, rng_for, splitmix64_array
from .gf2n import FieldSpec

ENUMERATION_LIMIT = 1 << 32
CHUNK = 1 << 16


class GadgetError(ValueError):
    pass


class ExtractorPremiseError(GadgetError):
    pass


class DegenerateCylinderError(GadgetError):
    pass


@dataclass(frozen=True)
class GIPSpec:
    """Shape of a bare GIP instance (no truncation): p rows of r elements of GF(2^N)."""
    p: int
    field: FieldSpec
    r: int

    def __post_init__(self):
        if self.p < 1 or self.r < 1:
            raise GadgetError(f"need p >= 1 and r >= 1, got p={self.p}, r={self.r}")

    @classmethod
    def build(cls, p: int, degree: int, r: int) -> GIPSpec:
        return cls(p, FieldSpec.of_degree(degree), r)

    @property
    def q(self) -> int:
        return self.field.order

    @property
    def degree(self) -> int:
        return self.field.degree

    @property
    def input_count(self) -> int:
        return 1 << (self.p * self.r * self.field.degree)


@dataclass(frozen=True)
class GadgetSpec:
    p: int
    field: FieldSpec
    r: int
    n0: int

    def __post_init__(self):
        if self.p < 1:
            raise GadgetError(f"p must be >= 1, got {self.p}")
        if self.r < 1:
            raise GadgetError(f"r must be >= 1, got {self.r}")
        if not 2 <= self.n0 <= self.field.degree:
            raise GadgetError(f"n0 must lie in [2, N={self.field.degree}], got {self.n0}")
        if self.n0 % 2:
            raise GadgetError(f"n0 must be even, got {self.n0}")

    @classmethod
    def build(cls, p: int, degree: int, r: int, n0: int) -> GadgetSpec:
        return cls(p, FieldSpec.of_degree(degree), r, n0)

    @property
    def q(self) -> int:
        return self.field.order

    @property
    def degree(self) -> int:
        return self.field.degree

    @property
    def m(self) -> int:
        return self.n0 // 2

    @property
    def players(self) -> int:
        return self.p + 1

    @property
    def row_bits(self) -> int:
        return self.r * self.field.degree

    @property
    def input_bits(self) -> int:
        return self.p * self.row_bits

    @property
    def input_count(self) -> int:
        return 1 << self.input_bits

    @property
    def gip(self) -> GIPSpec:
        return GIPSpec(self.p, self.field, self.r)

    def warnings(self) -> list[str]:
        """Soft hypotheses of the extractor bounds that this instantiation violates."""
        out = []
        k = self.players
        # k <= log2(n)/2 with n = N * 2^k reduces to k <= log2(N)
        if k > math.log2(self.field.degree):
            out.append(f"player count k={k} exceeds log2(N)={math.log2(self.field.degree):.3f}")
        if self.r < 2 ** (self.p + 1):
            out.append(f"r={self.r} below 2^(p+1)={2 ** (self.p + 1)} required by the disperser bound")
        return out

    def to_dict(self) -> dict:
        return {"p": self.p, "degree": self.field.degree, "modulus": self.field.modulus,
                "r": self.r, "n0": self.n0}

    @classmethod
    def from_dict(cls, d: dict) -> GadgetSpec:
        try:
            fld = FieldSpec.from_dict(d)
            return cls(int(d["p"]), fld, int(d["r"]), int(d["n0"]))
        except KeyError as exc:
            raise GadgetError(f"gadget config missing key {exc}") from None


@dataclass(frozen=True)
class GadgetInput:
    rows: tuple[tuple[int, ...], ...]

    def check(self, spec: GadgetSpec) -> None:
        if len(self.rows) != spec.p or any(len(row) != spec.r for row in self.rows):
            raise GadgetError(f"input shape does not match p={spec.p}, r={spec.r}")
        q = spec.q
        if any(not 0 <= v < q for row in self.rows for v in row):
            raise GadgetError("input element outside the field")

    def pack(self, spec: GadgetSpec) -> int:
        n = spec.degree
        out = 0
        for i, row in enumerate(self.rows):
            for j, v in enumerate(row):
                out |= v << ((i * spec.r + j) * n)
        return out

    @classmethod
    def unpack(cls, packed: int, spec: GadgetSpec) -> GadgetInput:
        n, mask = spec.degree, spec.q - 1
        return cls(tuple(
            tuple((packed >> ((i * spec.r + j) * n)) & mask for j in range(spec.r))
            for i in range(spec.p)
        ))

    def without_row(self, i: int, spec: GadgetSpec) -> int:
        """Packed bits of every row except ``i`` (what a player blind to row ``i`` sees)."""
        out, shift = 0, 0
        for k, row in enumerate(self.rows):
            if k == i:
                continue
            for v in row:
                out |= v << shift
                shift += spec.degree
        return out


def iter_inputs(spec: GadgetSpec) -> Iterator[GadgetInput]:
    for packed in range(spec.input_count):
        yield GadgetInput.unpack(packed, spec)


def eval_gip(inp: GadgetInput, spec: GadgetSpec) -> int:
    inp.check(spec)
    mul = spec.field.mul
    total = 0
    for j in range(spec.r):
        prod = inp.rows[0][j]
        for i in range(1, spec.p):
            prod = mul(prod, inp.rows[i][j])
        total ^= prod
    return total


def truncate(value: int, n0: int) -> tuple[int, ...]:
    return tuple((value >> j) & 1 for j in range(n0))


def eval_gadget(inp: GadgetInput, spec: GadgetSpec) -> tuple[int, ...]:
    """Low-order n0 bits of GIP; bit j of the output is bit j of the field element."""
    return truncate(eval_gip(inp, spec), spec.n0)


def unpack_array(packed: np.ndarray, spec: GIPSpec | GadgetSpec) -> np.ndarray:
    """Packed uint64 inputs -> (len, p, r) element array."""
    packed = np.asarray(packed, dtype=np.uint64)
    shifts = (np.arange(spec.p * spec.r, dtype=np.uint64) * np.uint64(spec.degree)).reshape(spec.p, spec.r)
    return (packed[:, None, None] >> shifts[None]) & np.uint64(spec.q - 1)


def gip_array(x: np.ndarray, spec: GIPSpec | GadgetSpec) -> np.ndarray:
    """GIP of a batch of inputs shaped (S, p, r)."""
    x = np.asarray(x, dtype=np.uint64)
    if spec.degree <= 10:
        table = spec.field.mul_table()
        prod = x[:, 0, :]
        for i in range(1, spec.p):
            prod = table[prod, x[:, i, :]]
    else:
        prod = x[:, 0, :]
        for i in range(1, spec.p):
            prod = spec.field.mul_array(prod, x[:, i, :])
    return np.bitwise_xor.reduce(prod, axis=1)


def all_gip_values(spec: GadgetSpec) -> np.ndarray:
    """GIP value of every input, indexed by packed input. Small domains only."""
    if spec.input_count > (1 << 24):
        raise GadgetError("domain too large to materialise; use gip_distribution_exact")
    packed = np.arange(spec.input_count, dtype=np.uint64)
    return gip_array(unpack_array(packed, spec), spec)


def all_gadget_outputs(spec: GadgetSpec) -> np.ndarray:
    return all_gip_values(spec) & np.uint64((1 << spec.n0) - 1)


def _gip_counts(spec: GIPSpec | GadgetSpec) -> np.ndarray:
    if spec.input_count > ENUMERATION_LIMIT:
        raise GadgetError(f"q^(r*p) = {spec.input_count} exceeds the enumeration limit 2^32")
    counts = np.zeros(spec.q, dtype=np.int64)
    for start in range(0, spec.input_count, 1 << 20):
        stop = min(start + (1 << 20), spec.input_count)
        vals = gip_array(unpack_array(np.arange(start, stop, dtype=np.uint64), spec), spec)
        counts += np.bincount(vals.astype(np.int64), minlength=spec.q)
    return counts


def gip_distribution_exact(spec: GIPSpec | GadgetSpec) -> dict[int, Fraction]:
    """Exact Pr[GIP = v] over the uniform input, by full enumeration."""
    counts = _gip_counts(spec)
    total = spec.input_count
    return {v: Fraction(int(c), total) for v, c in enumerate(counts)}


def gadget_distribution_exact(spec: GadgetSpec) -> dict[int, Fraction]:
    """Exact distribution of the n0-bit gadget output (keyed by its bitmask)."""
    counts = _gip_counts(spec)
    folded = np.zeros(1 << spec.n0, dtype=np.int64)
    np.add.at(folded, np.arange(spec.q) & ((1 << spec.n0) - 1), counts)
    return {z: Fraction(int(c), spec.input_count) for z, c in enumerate(folded)}


def write_distribution_csv(dist: dict[int, Fraction], fh) -> None:
    fh.write("value,numerator,denominator,probability\n")
    for v, pr in sorted(dist.items()):
        fh.write(f"{v},{pr.numerator},{pr.denominator},{float(pr)!r}\n")


# -- cylinder intersections -------------------------------------------------

def _elements_from_index(idx: np.ndarray, spec: GadgetSpec) -> np.ndarray:
    """Row-space index -> (len, r) elements."""
    shifts = np.arange(spec.r, dtype=np.uint64) * np.uint64(spec.degree)
    return (idx.astype(np.uint64)[:, None] >> shifts[None]) & np.uint64(spec.q - 1)


@dataclass(frozen=True)
class CylinderSampler:
    """A random cylinder intersection S of (F_q^r)^p and a uniform sampler over it.

    ``mode`` is ``"full"`` (S is everything), ``"rectangle"`` (S is a product of
    random row subsets of the given ``sizes``) or ``"cylinders"`` (S is the
    intersection of p pseudo-random cylinders; cylinder i ignores row i and
    has ``sizes[i]`` members in expectation).
    """
    mode: str
    seed: int
    sizes: tuple[int, ...] = ()

    def __post_init__(self):
        if self.mode not in ("full", "rectangle", "cylinders"):
            raise GadgetError(f"unknown sampler mode {self.mode!r}")


@dataclass
class CylinderIntersection:
    spec: GadgetSpec
    sampler: CylinderSampler
    subsets: list[np.ndarray | None] = field(default_factory=list)
    thresholds: list[int] = field(default_factory=list)

    @classmethod
    def build(cls, spec: GadgetSpec, sampler: CylinderSampler) -> CylinderIntersection:
        ci = cls(spec, sampler)
        row_space = spec.q ** spec.r
        total = spec.input_count
        if sampler.mode == "rectangle":
            if spec.p < 2:
                raise GadgetError("rectangles need p >= 2")
            if len(sampler.sizes) != spec.p:
                raise GadgetError(f"rectangle needs {spec.p} factor sizes")
            for i, size in enumerate(sampler.sizes):
                if not 0 <= size <= row_space:
                    raise GadgetError(f"factor size {size} outside [0, q^r]")
                if size == row_space:
                    ci.subsets.append(None)
                else:
                    rng = rng_for(sampler.seed, 0, i)
                    ci.subsets.append(np.sort(rng.choice(row_space, size=size, replace=False)).astype(np.uint64))
        elif sampler.mode == "cylinders":
            if len(sampler.sizes) != spec.p:
                raise GadgetError(f"need {spec.p} cylinder sizes")
            for size in sampler.sizes:
                if not 0 <= size <= total:
                    raise GadgetError(f"cylinder size {size} outside [0, |X|]")
                # membership iff hash < threshold, so E|S_i| = size
                ci.thresholds.append(min((size << 64) // total, 1 << 64))
        return ci

    def cylinder_member(self, i: int, x: np.ndarray) -> np.ndarray:
        """Membership of inputs ``x`` (S, p, r) in constituent cylinder ``i``.

        Only rows other than ``i`` are read.
        """
        spec = self.spec
        if self.sampler.mode == "full":
            return np.ones(len(x), dtype=bool)
        if self.sampler.mode == "rectangle":
            # the factor on row k is a cylinder ignoring every row but k; assign it to slot (k+1) % p
            k = (i - 1) % spec.p
            subset = self.subsets[k]
            if subset is None:
                return np.ones(len(x), dtype=bool)
            idx = np.zeros(len(x), dtype=np.uint64)
            for j in range(spec.r):
                idx |= x[:, k, j] << np.uint64(j * spec.degree)
            pos = np.searchsorted(subset, idx)
            pos = np.minimum(pos, len(subset) - 1) if len(subset) else pos
            return (subset[pos] == idx) if len(subset) else np.zeros(len(x), dtype=bool)
        thr = self.thresholds[i]
        if thr >= 1 << 64:
            return np.ones(len(x), dtype=bool)
        h = np.full(len(x), derive_seed(self.sampler.seed, 1, i), dtype=np.uint64)
        for k in range(spec.p):
            if k == i:
                continue
            for j in range(spec.r):
                h = splitmix64_array(h ^ x[:, k, j])
        return h < np.uint64(thr)

    def member(self, x: np.ndarray) -> np.ndarray:
        out = np.ones(len(x), dtype=bool)
        for i in range(self.spec.p):
            out &= self.cylinder_member(i, x)
        return out

    def size(self) -> tuple[int, bool]:
        """(|S|, exact?). Random-cylinder sizes are estimated unless the space is small."""
        spec = self.spec
        if self.sampler.mode == "full":
            return spec.input_count, True
        if self.sampler.mode == "rectangle":
            row_space = spec.q ** spec.r
            return math.prod(row_space if s is None else len(s) for s in self.subsets), True
        if spec.input_count <= 1 << 22:
            count = 0
            for start in range(0, spec.input_count, CHUNK):
                packed = np.arange(start, min(start + CHUNK, spec.input_count), dtype=np.uint64)
                count += int(self.member(unpack_array(packed, spec)).sum())
            return count, True
        rng = rng_for(self.sampler.seed, 2)
        hits = sum(int(self.member(self._uniform(rng, CHUNK)).sum()) for _ in range(16))
        return hits * spec.input_count // (16 * CHUNK), False

    def _uniform(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.integers(0, self.spec.q, size=(n, self.spec.p, self.spec.r), dtype=np.uint64)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """``n`` uniform draws from S, shaped (n, p, r)."""
        spec = self.spec
        if self.sampler.mode == "full":
            return self._uniform(rng, n)
        if self.sampler.mode == "rectangle":
            out = np.empty((n, spec.p, spec.r), dtype=np.uint64)
            row_space = spec.q ** spec.r
            for i, subset in enumerate(self.subsets):
                if subset is None:
                    idx = rng.integers(0, row_space, size=n, dtype=np.uint64)
                else:
                    if len(subset) == 0:
                        raise DegenerateCylinderError("empty rectangle factor")
                    idx = subset[rng.integers(0, len(subset), size=n)]
                out[:, i, :] = _elements_from_index(idx, spec)
            return out
        chunks, have = [], 0
        attempts = 0
        while have < n:
            cand = self._uniform(rng, max(CHUNK, 2 * (n - have)))
            keep = cand[self.member(cand)]
            chunks.append(keep)
            have += len(keep)
            attempts += 1
            if attempts > 1000 and have == 0:
                raise DegenerateCylinderError("rejection sampler found no members")
        return np.concatenate(chunks)[:n]


def disperser_bound(spec: GadgetSpec) -> float:
    q = spec.q
    return 1 / q + q * (spec.p / q) ** 4


def extractor_bound(spec: GadgetSpec) -> float:
    return 2.0 ** -spec.n0 + 2.0 ** (-2 * spec.n0)


@dataclass
class ExtractorReport:
    set_size: int
    size_exact: bool
    samples: int
    probabilities: np.ndarray
    max_value: int
    max_prob: float
    stderr: float
    bound: float
    gadget_max_value: int
    gadget_max_prob: float
    gadget_stderr: float
    gadget_bound: float
    warnings: list[str]

    @property
    def gip_pass(self) -> bool:
        return self.max_prob - 3 * self.stderr <= self.bound

    @property
    def gadget_pass(self) -> bool:
        return self.gadget_max_prob - 3 * self.gadget_stderr <= self.gadget_bound

    @property
    def passed(self) -> bool:
        return self.gip_pass and self.gadget_pass

    def interval(self) -> tuple[float, float]:
        return self.max_prob - 3 * self.stderr, self.max_prob + 3 * self.stderr


def _stderr(prob: float, n: int) -> float:
    return math.sqrt(max(prob * (1 - prob), 0.0) / n)


def extractor_estimate(spec: GadgetSpec, sampler: CylinderSampler, samples: int,
                       cylinder: CylinderIntersection | None = None) -> ExtractorReport:
    """Monte Carlo estimate of max_v Pr_{x in S}[GIP(x) = v] against the disperser bound."""
    if samples < 10_000:
        raise GadgetError("at least 10^4 samples are required")
    ci = cylinder or CylinderIntersection.build(spec, sampler)
    size, exact = ci.size()
    if size == 0:
        raise DegenerateCylinderError("sampled cylinder intersection is empty")
    premise = spec.q ** (spec.r * spec.p - 1)
    if size < premise:
        raise ExtractorPremiseError(f"|S| = {size} < q^(rp-1) = {premise}")
    counts = np.zeros(spec.q, dtype=np.int64)
    for c, start in enumerate(range(0, samples, CHUNK)):
        n = min(CHUNK, samples - start)
        x = ci.sample(rng_for(sampler.seed, 3, c), n)
        counts += np.bincount(gip_array(x, spec).astype(np.int64), minlength=spec.q)
    probs = counts / samples
    vmax = int(np.argmax(probs))
    zcounts = np.zeros(1 << spec.n0, dtype=np.int64)
    np.add.at(zcounts, np.arange(spec.q) & ((1 << spec.n0) - 1), counts)
    zmax = int(np.argmax(zcounts))
    zprob = zcounts[zmax] / samples
    return ExtractorReport(
        set_size=size, size_exact=exact, samples=samples, probabilities=probs,
        max_value=vmax, max_prob=float(probs[vmax]), stderr=_stderr(float(probs[vmax]), samples),
        bound=disperser_bound(spec),
        gadget_max_value=zmax, gadget_max_prob=float(zprob), gadget_stderr=_stderr(float(zprob), samples),
        gadget_bound=extractor_bound(spec), warnings=spec.warnings(),
    )


def rows_from(values: Sequence[Sequence[int]]) -> GadgetInput:
    return GadgetInput(tuple(tuple(int(v) for v in row) for row in values))
