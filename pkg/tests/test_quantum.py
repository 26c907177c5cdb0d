import itertools
import math

import numpy as np
import pytest

from hmlab._seeding import rng_for
from hmlab.gadget import GadgetSpec, GadgetInput
from hmlab.matching import HMInstance
from hmlab.quantum import (QuantumError, StateVector, basis_vectors, measure_matching_basis,
                           prepare_state, qubit_cost, run_quantum_protocol, sample_outcome,
                           scalar_check, sweep_blocks, zero_error_sweep)


def test_state_norm_enforced():
    with pytest.raises(QuantumError):
        StateVector(np.array([1.0, 1.0], dtype=complex))
    s = prepare_state([0, 1, 1, 0])
    assert np.allclose(s.amplitudes, [0.5, -0.5, -0.5, 0.5])


@pytest.mark.parametrize("m", [1, 2, 3, 8])
def test_basis_is_orthonormal(m):
    _, rows = basis_vectors(m - 1, m)
    assert np.allclose(rows @ rows.conj().T, np.eye(2 * m), atol=1e-14)


def test_hand_computed_distribution():
    # z = 0110, matching 0 = {(0,2),(1,3)}: z0^z2 = 1 and z1^z3 = 1, so only '-' outcomes
    dist = measure_matching_basis(prepare_state([0, 1, 1, 0]), 0, 2)
    probs = {(e.edge, e.sign): e.probability for e in dist.entries}
    assert probs[((0, 2), "-")] == pytest.approx(0.5, abs=1e-15)
    assert probs[((1, 3), "-")] == pytest.approx(0.5, abs=1e-15)
    assert probs[((0, 2), "+")] == 0.0 and probs[((1, 3), "+")] == 0.0
    assert [o.answer for o in dist.support()] == [(0, 2, 1), (1, 3, 1)]


def test_qubit_cost():
    assert [qubit_cost(n) for n in (2, 4, 6, 8, 16, 18)] == [1, 2, 3, 3, 4, 5]


def test_dimension_mismatch():
    with pytest.raises(QuantumError):
        measure_matching_basis(prepare_state([0, 1, 1, 0]), 0, 3)
    with pytest.raises(QuantumError):
        list(sweep_blocks(5))


@pytest.mark.parametrize("n0", [2, 4, 6, 8])
def test_vectorised_sweep_matches_scalar_path(n0):
    m = n0 // 2
    for block in sweep_blocks(n0, chunk=7):
        for zi in range(len(block.probs)):
            zint = block.z_start + zi
            z = tuple((zint >> j) & 1 for j in range(n0))
            dist = measure_matching_basis(prepare_state(z), block.x1, m)
            assert np.allclose([e.probability for e in dist.entries], block.probs[zi], atol=1e-15)
            assert scalar_check(z, block.x1)


def test_zero_error_sweep_counts():
    s = zero_error_sweep(6)
    assert s.passed
    assert s.outcomes == 2 ** 6 * 3 * 6
    assert s.supported == 2 ** 6 * 3 * 3  # exactly one sign per edge is supported


def test_protocol_on_gadget_instances():
    spec = GadgetSpec.build(2, 4, 1, 4)
    for packed, x1 in itertools.product(range(0, spec.input_count, 17), range(spec.m)):
        run = run_quantum_protocol(HMInstance(spec, x1, GadgetInput.unpack(packed, spec)))
        assert run.zero_error and run.qubit_cost == 2
        assert all(math.isclose(o.probability, 0.5) for o in run.distribution.support())


def test_sampling_hits_only_support():
    dist = measure_matching_basis(prepare_state([1, 0, 0, 1, 1, 1]), 2, 3)
    support = {(o.edge, o.sign) for o in dist.support()}
    rng = rng_for(4)
    seen = {(o.edge, o.sign) for o in (sample_outcome(dist, rng) for _ in range(500))}
    assert seen == support
