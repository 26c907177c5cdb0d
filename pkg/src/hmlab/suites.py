"""Randomised property suites for the information and graph inequalities used by the audits."""
from __future__ import annotations

import itertools
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from ._seeding import rng_for
from .analysis import BipartiteGraph, verify_turan
from .infotheory import (CheckReport, JointDistribution, check_data_processing, check_fano,
                         check_subadditivity, expected_distance)


@dataclass
class SuiteResult:
    name: str
    instances: int
    violations: int
    max_violation: float

    @property
    def passed(self) -> bool:
        return self.violations == 0


def _random_pmf(rng: np.random.Generator, size: int) -> np.ndarray:
    w = rng.dirichlet(np.full(size, rng.choice([0.2, 1.0, 5.0])))
    if size > 1 and rng.random() < 0.5:
        w[rng.random(size) < 0.3] = 0.0
        if w.sum() == 0:
            w[rng.integers(size)] = 1.0
    return w / w.sum()


def _dist(support: list[tuple], w: np.ndarray) -> JointDistribution:
    pairs = [(s, float(p)) for s, p in zip(support, w) if p > 0]
    total = sum(p for _, p in pairs)
    return JointDistribution(tuple(s for s, _ in pairs), tuple(p / total for _, p in pairs))


def fano_instance(rng: np.random.Generator) -> CheckReport:
    k = int(rng.integers(1, 7))
    support = list(itertools.product((0, 1), repeat=k))
    d = _dist(support, _random_pmf(rng, len(support)))
    v = tuple(int(b) for b in rng.integers(0, 2, size=k))
    if expected_distance(d, v) > k / 2:
        v = tuple(1 - b for b in v)
    lo = expected_distance(d, v) / k
    eps = min(0.5, lo + (0.5 - lo) * float(rng.random()) ** 3)
    return check_fano(d, v, eps)


def subadditivity_instance(rng: np.random.Generator) -> CheckReport:
    arity = int(rng.integers(2, 5))
    sizes = [int(s) for s in rng.integers(1, 5, size=arity)]
    support = list(itertools.product(*(range(s) for s in sizes)))
    return check_subadditivity(_dist(support, _random_pmf(rng, len(support))))


def data_processing_instance(rng: np.random.Generator) -> CheckReport:
    nx, ny, nz = (int(s) for s in rng.integers(1, 9, size=3))
    px = _random_pmf(rng, nx)
    y_given_x = [_random_pmf(rng, ny) for _ in range(nx)]
    z_given_y = [_random_pmf(rng, nz) for _ in range(ny)]
    return check_data_processing(px, y_given_x, z_given_y)


def random_bipartite(rng: np.random.Generator, max_side: int = 64) -> BipartiteGraph:
    left, right = (int(s) for s in rng.integers(1, max_side + 1, size=2))
    n_edges = int(rng.integers(1, left * right + 1))
    n_edges = min(n_edges, int(rng.integers(1, 4 * (left + right) + 1)))
    flat = rng.choice(left * right, size=n_edges, replace=False)
    return BipartiteGraph.from_edges(left, right, ((int(f) // right, int(f) % right) for f in flat))


def turan_instance(rng: np.random.Generator) -> CheckReport:
    return verify_turan(random_bipartite(rng))


SUITES: dict[str, Callable[[np.random.Generator], CheckReport]] = {
    "fano": fano_instance,
    "subadditivity": subadditivity_instance,
    "data_processing": data_processing_instance,
    "turan": turan_instance,
}


def run_suite(name: str, instances: int, seed: int) -> SuiteResult:
    make = SUITES[name]
    task = list(SUITES).index(name)
    violations, worst = 0, 0.0
    for i in range(instances):
        report = make(rng_for(seed, task, i))
        if report.passed is None:
            raise AssertionError(f"{name}: generated instance misses its premise")
        if not report.passed:
            violations += 1
        worst = max(worst, report.lhs - report.rhs)
    return SuiteResult(name, instances, violations, worst)
