"""State-vector simulation of the one-message quantum protocol for HM*g.

Player 1 sends ``sum_i (-1)^{z_i} |i> / sqrt(n0)`` on ceil(log2 n0) qubits; the
last player measures in the basis ``(|l> +- |r>)/sqrt(2)`` for the edges of
its matching and answers ``<l, r, 0>`` on ``+`` and ``<l, r, 1>`` on ``-``.
"""
from __future__ import annotations

import math
from collections.abc import Iterator
from dataclasses import dataclass

import numpy as np

from .matching import Answer, Edge, HMInstance, answer_valid, check_answer, matching

NORM_TOL = 1e-12
SUPPORT_TOL = 1e-12


class QuantumError(ValueError):
    pass


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray

    def __post_init__(self):
        norm = float(np.vdot(self.amplitudes, self.amplitudes).real)
        if abs(norm - 1) > NORM_TOL:
            raise QuantumError(f"state has squared norm {norm}")

    @property
    def dimension(self) -> int:
        return len(self.amplitudes)


@dataclass(frozen=True)
class Outcome:
    edge: Edge
    sign: str
    probability: float

    @property
    def answer(self) -> Answer:
        return Answer(self.edge.left, self.edge.right, 0 if self.sign == "+" else 1)


@dataclass(frozen=True)
class OutcomeDistribution:
    entries: tuple[Outcome, ...]

    def __post_init__(self):
        probs = [e.probability for e in self.entries]
        if min(probs) < 0 or abs(math.fsum(probs) - 1) > NORM_TOL:
            raise QuantumError("outcome probabilities do not form a distribution")

    def support(self, tol: float = SUPPORT_TOL) -> list[Outcome]:
        return [e for e in self.entries if e.probability > tol]


def prepare_state(z) -> StateVector:
    z = np.asarray(z, dtype=np.int64)
    n0 = len(z)
    if n0 < 2:
        raise QuantumError("need at least two amplitudes")
    amps = (1 - 2 * z).astype(np.complex128) / math.sqrt(n0)
    return StateVector(amps)


def basis_vectors(matching_index: int, m: int) -> tuple[list[tuple[Edge, str]], np.ndarray]:
    """Measurement basis for a matching: labels and a (2m, 2m) row matrix."""
    labels = []
    rows = np.zeros((2 * m, 2 * m), dtype=np.complex128)
    s = 1 / math.sqrt(2)
    for k, e in enumerate(matching(matching_index, m)):
        for t, sign in enumerate("+-"):
            row = 2 * k + t
            rows[row, e.left] = s
            rows[row, e.right] = s if sign == "+" else -s
            labels.append((e, sign))
    return labels, rows


def measure_matching_basis(state: StateVector, matching_index: int, m: int) -> OutcomeDistribution:
    if state.dimension != 2 * m:
        raise QuantumError(f"state dimension {state.dimension} != 2m = {2 * m}")
    labels, rows = basis_vectors(matching_index, m)
    probs = np.abs(rows.conj() @ state.amplitudes) ** 2
    entries = []
    for (edge, sign), pr in zip(labels, probs):
        pr = float(pr)
        if pr < 1e-15:
            pr = 0.0
        entries.append(Outcome(edge, sign, pr))
    return OutcomeDistribution(tuple(entries))


def qubit_cost(n0: int) -> int:
    return max(1, math.ceil(math.log2(n0)))


@dataclass(frozen=True)
class QuantumRun:
    distribution: OutcomeDistribution
    zero_error: bool
    qubit_cost: int


def run_quantum_protocol(instance: HMInstance) -> QuantumRun:
    z = instance.z()
    dist = measure_matching_basis(prepare_state(z), instance.x1, instance.m)
    ok = all(check_answer(instance, e.answer) for e in dist.entries if e.probability > 0)
    return QuantumRun(dist, ok, qubit_cost(instance.spec.n0))


def sample_outcome(dist: OutcomeDistribution, rng: np.random.Generator) -> Outcome:
    """Inverse-CDF draw over the entries in their fixed edge order."""
    u = rng.random()
    acc = 0.0
    for e in dist.entries:
        acc += e.probability
        if u < acc:
            return e
    return dist.support()[-1]


# -- exhaustive sweep ---------------------------------------------------------

@dataclass
class SweepSummary:
    n0: int
    outcomes: int = 0
    supported: int = 0
    invalid_supported: int = 0
    max_prob_deviation: float = 0.0
    max_norm_error: float = 0.0

    @property
    def passed(self) -> bool:
        return (self.invalid_supported == 0 and self.max_prob_deviation <= 1e-12
                and self.max_norm_error <= 1e-12)


@dataclass
class SweepBlock:
    """All outcomes for one matching over a contiguous range of z values."""
    z_start: int
    x1: int
    labels: list[tuple[Edge, str]]
    probs: np.ndarray   # (len(z), 2m)
    valid: np.ndarray   # (len(z), 2m)


def sweep_blocks(n0: int, chunk: int = 1 << 14) -> Iterator[SweepBlock]:
    """Outcome distributions for every z in {0,1}^n0 and every matching.

    Bit ``i`` of the integer ``z`` is ``z_i``.
    """
    if n0 < 2 or n0 % 2:
        raise QuantumError("n0 must be even and >= 2")
    m = n0 // 2
    bases = [basis_vectors(i, m) for i in range(m)]
    total = 1 << n0
    bit = np.arange(n0, dtype=np.int64)
    for start in range(0, total, chunk):
        zs = np.arange(start, min(start + chunk, total), dtype=np.int64)
        zbits = (zs[:, None] >> bit[None]) & 1
        amps = (1 - 2 * zbits).astype(np.complex128) / math.sqrt(n0)
        for x1, (labels, rows) in enumerate(bases):
            probs = np.abs(amps @ rows.conj().T) ** 2
            lefts = np.array([e.left for e, _ in labels])
            rights = np.array([e.right for e, _ in labels])
            bvals = np.array([0 if s == "+" else 1 for _, s in labels])
            parity = zbits[:, lefts] ^ zbits[:, rights]
            yield SweepBlock(start, x1, labels, probs, parity == bvals[None])


def zero_error_sweep(n0: int) -> SweepSummary:
    summary = SweepSummary(n0)
    target = 2 / n0
    for block in sweep_blocks(n0):
        probs = block.probs
        supported = probs > SUPPORT_TOL
        summary.outcomes += probs.size
        summary.supported += int(supported.sum())
        summary.invalid_supported += int((supported & ~block.valid).sum())
        if supported.any():
            dev = float(np.abs(probs[supported] - target).max())
            summary.max_prob_deviation = max(summary.max_prob_deviation, dev)
        norm_err = float(np.abs(probs.sum(axis=1) - 1).max())
        summary.max_norm_error = max(summary.max_norm_error, norm_err)
    return summary


def scalar_check(z: tuple[int, ...], x1: int) -> bool:
    """Zero-error check for one (z, x1) through the scalar path."""
    m = len(z) // 2
    dist = measure_matching_basis(prepare_state(z), x1, m)
    return all(answer_valid(z, x1, e.answer, m) for e in dist.support())
