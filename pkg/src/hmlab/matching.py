"""The shifted matching family and the lifted Hidden Matching relation.

Nodes ``0..m-1`` are on the left, ``m..2m-1`` on the right. Matching ``i``
pairs left node ``l`` with ``m + (i + l) % m``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from .gadget import GadgetInput, GadgetSpec, eval_gadget


class MatchingError(ValueError):
    pass


class Edge(NamedTuple):
    left: int
    right: int


class Answer(NamedTuple):
    l: int
    r: int
    b: int


@dataclass(frozen=True)
class HMInstance:
    spec: GadgetSpec
    x1: int
    gadget_input: GadgetInput

    def __post_init__(self):
        if not 0 <= self.x1 < self.spec.m:
            raise MatchingError(f"x1={self.x1} outside [0, m={self.spec.m})")
        self.gadget_input.check(self.spec)

    @property
    def m(self) -> int:
        return self.spec.m

    def z(self) -> tuple[int, ...]:
        return eval_gadget(self.gadget_input, self.spec)


def matching_edge(i: int, l: int, m: int) -> Edge:
    if not (0 <= i < m and 0 <= l < m):
        raise MatchingError(f"matching index {i} or left node {l} outside [0, {m})")
    return Edge(l, m + (i + l) % m)


def matching(i: int, m: int) -> list[Edge]:
    return [matching_edge(i, l, m) for l in range(m)]


def matching_of_edge(edge: Edge, m: int) -> int | None:
    """Index of the (unique) family member containing ``edge``, or None."""
    l, r = edge
    if not (0 <= l < m <= r < 2 * m):
        return None
    return (r - m - l) % m


def answer_valid(z: tuple[int, ...] | list[int], x1: int, answer: Answer, m: int) -> bool:
    """Validity of an answer against a raw hidden string ``z`` of length 2m."""
    l, r, b = answer
    if matching_of_edge(Edge(l, r), m) != x1:
        return False
    return b in (0, 1) and b == z[l] ^ z[r]


def check_answer(instance: HMInstance, answer: Answer) -> bool:
    return answer_valid(instance.z(), instance.x1, answer, instance.m)


def verify_family(m: int) -> dict[str, bool]:
    """Exhaustively check perfectness and pairwise edge-disjointness."""
    if not 1 <= m <= 1 << 16:
        raise MatchingError("m must lie in [1, 2^16]")
    perfect = True
    seen: set[Edge] = set()
    disjoint = True
    for i in range(m):
        edges = matching(i, m)
        lefts = {e.left for e in edges}
        rights = {e.right for e in edges}
        perfect &= lefts == set(range(m)) and rights == set(range(m, 2 * m))
        for e in edges:
            if e in seen:
                disjoint = False
            seen.add(e)
    return {"perfect": perfect, "disjoint": disjoint}
