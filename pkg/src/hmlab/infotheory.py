"""Exact information measures over finite joint distributions (bits).

Probabilities may be ``Fraction`` (exact mode) or ``float``. Logarithms are
evaluated at the end, so exact-mode results are accurate to float rounding.
"""
from __future__ import annotations

import csv
import math
from collections import Counter, defaultdict
from collections.abc import Hashable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Real

SLACK = 1e-9
CHECK_INEQUALITIES = True


class DistributionError(ValueError):
    pass


class InequalityViolation(AssertionError):
    pass


@dataclass(frozen=True)
class JointDistribution:
    support: tuple[tuple, ...]
    probabilities: tuple[Real, ...]

    def __post_init__(self):
        if len(self.support) != len(self.probabilities):
            raise DistributionError("support and probabilities differ in length")
        if any(p < 0 for p in self.probabilities):
            raise DistributionError("negative probability")
        if self.support:
            width = len(self.support[0])
            if any(len(s) != width for s in self.support):
                raise DistributionError("support tuples have different arity")
            total = sum(self.probabilities) if self.exact else math.fsum(self.probabilities)
            if self.exact and total != 1:
                raise DistributionError(f"probabilities sum to {total}, not 1")
            if not self.exact and abs(total - 1) > 1e-12:
                raise DistributionError(f"probabilities sum to {total}, not 1")

    @property
    def exact(self) -> bool:
        return all(isinstance(p, (Fraction, int)) for p in self.probabilities)

    @property
    def arity(self) -> int:
        return len(self.support[0]) if self.support else 0

    @classmethod
    def from_mapping(cls, mapping: Mapping[tuple, Real]) -> JointDistribution:
        items = [(k if isinstance(k, tuple) else (k,), v) for k, v in mapping.items()]
        return cls(tuple(k for k, _ in items), tuple(v for _, v in items))

    @classmethod
    def from_counts(cls, counts: Mapping[tuple, int] | Iterable[tuple]) -> JointDistribution:
        """Uniform-weight empirical distribution with exact rational probabilities."""
        if not isinstance(counts, Mapping):
            counts = Counter(counts)
        total = sum(counts.values())
        if total == 0:
            raise DistributionError("no observations")
        return cls.from_mapping({k: Fraction(c, total) for k, c in counts.items() if c})

    def marginal(self, coords: Sequence[int] | None = None) -> dict[tuple, Real]:
        if coords is None:
            coords = range(self.arity)
        coords = tuple(coords)
        out: dict[tuple, Real] = defaultdict(int)
        for s, p in zip(self.support, self.probabilities):
            out[tuple(s[c] for c in coords)] += p
        return dict(out)

    def to_float(self) -> JointDistribution:
        return JointDistribution(self.support, tuple(float(p) for p in self.probabilities))

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"c{i}" for i in range(self.arity)] + ["probability"])
        for s, p in zip(self.support, self.probabilities):
            w.writerow(list(s) + [str(p) if isinstance(p, Fraction) else repr(p)])

    @classmethod
    def read_csv(cls, fh) -> JointDistribution:
        rows = list(csv.reader(fh))
        support, probs = [], []
        for row in rows[1:]:
            support.append(tuple(_parse_cell(c) for c in row[:-1]))
            probs.append(Fraction(row[-1]) if "/" in row[-1] or row[-1].isdigit() else float(row[-1]))
        return cls(tuple(support), tuple(probs))


def _parse_cell(c: str) -> Hashable:
    try:
        return int(c)
    except ValueError:
        return c


def _plog(p: Real) -> float:
    """p * log2(1/p) with 0 log 0 = 0."""
    if p == 0:
        return 0.0
    if isinstance(p, Fraction):
        return float(p) * (math.log2(p.denominator) - math.log2(p.numerator))
    return -p * math.log2(p)


def entropy_of(probs: Iterable[Real]) -> float:
    return math.fsum(_plog(p) for p in probs)


def _check(ok: bool, what: str) -> None:
    if CHECK_INEQUALITIES and not ok:
        raise InequalityViolation(what)


def entropy(d: JointDistribution, coords: Sequence[int] | None = None) -> float:
    if not d.support:
        raise DistributionError("empty support")
    h = entropy_of(d.marginal(coords).values())
    _check(h >= -SLACK, f"negative entropy {h}")
    return max(h, 0.0)


def cond_entropy(d: JointDistribution, target: Sequence[int], given: Sequence[int]) -> float:
    """E_{y ~ Y} H(X | Y = y), evaluated from the conditional slices."""
    if not d.support:
        raise DistributionError("empty support")
    target, given = tuple(target), tuple(given)
    slices: dict[tuple, dict[tuple, Real]] = defaultdict(lambda: defaultdict(int))
    for s, p in zip(d.support, d.probabilities):
        slices[tuple(s[c] for c in given)][tuple(s[c] for c in target)] += p
    terms = []
    for cond in slices.values():
        py = sum(cond.values())
        if py == 0:
            continue
        terms.append(float(py) * entropy_of(p / py for p in cond.values()))
    h = math.fsum(terms)
    _check(-SLACK <= h <= entropy(d, target) + SLACK, f"H(X|Y)={h} outside [0, H(X)]")
    return max(h, 0.0)


def mutual_info(d: JointDistribution, a: Sequence[int], b: Sequence[int]) -> float:
    """I(A;B) = H(A) - H(A|B)."""
    i = entropy(d, a) - cond_entropy(d, a, b)
    _check(i >= -SLACK, f"negative mutual information {i}")
    return max(i, 0.0)


def binary_entropy(p: float) -> float:
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    return entropy_of([p, 1 - p])


def hamming_distance(x: Sequence[int], y: Sequence[int]) -> int:
    if len(x) != len(y):
        raise ValueError("strings differ in length")
    return sum(a != b for a, b in zip(x, y))


def tv_distance(p: Mapping[Hashable, Real], q: Mapping[Hashable, Real]) -> Real:
    keys = set(p) | set(q)
    return sum(abs(p.get(k, 0) - q.get(k, 0)) for k in keys) / 2


@dataclass
class CheckReport:
    """Outcome of one inequality check ``lhs <= rhs`` (with slack)."""
    name: str
    lhs: float
    rhs: float
    premise_met: bool = True
    slack: float = SLACK
    detail: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool | None:
        if not self.premise_met:
            return None
        return self.lhs <= self.rhs + self.slack

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    def as_dict(self) -> dict:
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs,
                "premise_met": self.premise_met, "passed": self.passed, **self.detail}


def expected_distance(d: JointDistribution, v: Sequence[int]) -> Real:
    return sum(p * hamming_distance(s, v) for s, p in zip(d.support, d.probabilities))


def check_fano(d: JointDistribution, v: Sequence[int], eps: Real) -> CheckReport:
    """H(W) <= k * H2(eps) whenever E[d_H(W, v)] <= eps * k and eps <= 1/2."""
    k = len(v)
    dist = expected_distance(d, v)
    premise = 0 <= eps <= Fraction(1, 2) and dist <= eps * k
    h = entropy(d)
    return CheckReport("fano", h, k * binary_entropy(float(eps)), premise_met=premise,
                       detail={"k": k, "eps": float(eps), "expected_distance": float(dist)})


def check_subadditivity(d: JointDistribution) -> CheckReport:
    joint = entropy(d)
    parts = math.fsum(entropy(d, [i]) for i in range(d.arity))
    return CheckReport("subadditivity", joint, parts)


def markov_chain(px: Sequence[Real], y_given_x: Sequence[Sequence[Real]],
                 z_given_y: Sequence[Sequence[Real]]) -> JointDistribution:
    """Joint of (X, Y, Z) built as p(x) p(y|x) p(z|y)."""
    mapping = {}
    for x, pxv in enumerate(px):
        for y, pyx in enumerate(y_given_x[x]):
            for z, pzy in enumerate(z_given_y[y]):
                pr = pxv * pyx * pzy
                if pr:
                    mapping[(x, y, z)] = pr
    return JointDistribution.from_mapping(mapping)


def check_data_processing(px, y_given_x, z_given_y) -> CheckReport:
    """I(X;Z) <= I(X;Y) on a chain constructed as X -> Y -> Z."""
    d = markov_chain(px, y_given_x, z_given_y)
    return CheckReport("data_processing", mutual_info(d, [0], [2]), mutual_info(d, [0], [1]))
