import pytest
from hypothesis import given
from hypothesis import strategies as st

from hmlab.gadget import GadgetSpec, rows_from
from hmlab.matching import (Answer, Edge, HMInstance, MatchingError, answer_valid, check_answer,
                            matching, matching_edge, matching_of_edge, verify_family)


def test_small_family_by_hand():
    # m = 2: M_0 = {(0,2), (1,3)}, M_1 = {(0,3), (1,2)}
    assert matching(0, 2) == [Edge(0, 2), Edge(1, 3)]
    assert matching(1, 2) == [Edge(0, 3), Edge(1, 2)]
    assert matching_edge(2, 3, 4) == Edge(3, 5)


def test_range_errors():
    with pytest.raises(MatchingError):
        matching_edge(2, 0, 2)
    with pytest.raises(MatchingError):
        matching_edge(0, -1, 2)
    with pytest.raises(MatchingError):
        verify_family(0)


@pytest.mark.parametrize("m", [1, 2, 3, 7, 16, 33])
def test_family_partitions_complete_bipartite_graph(m):
    edges = [e for i in range(m) for e in matching(i, m)]
    assert len(edges) == len(set(edges)) == m * m
    assert set(edges) == {Edge(l, r) for l in range(m) for r in range(m, 2 * m)}
    assert verify_family(m) == {"perfect": True, "disjoint": True}


@given(st.integers(1, 200), st.data())
def test_matching_of_edge_inverts(m, data):
    i = data.draw(st.integers(0, m - 1))
    l = data.draw(st.integers(0, m - 1))
    assert matching_of_edge(matching_edge(i, l, m), m) == i


def test_matching_of_edge_rejects_non_edges():
    assert matching_of_edge(Edge(0, 1), 4) is None
    assert matching_of_edge(Edge(5, 6), 4) is None


def test_answer_validity():
    z = (0, 1, 1, 0)
    assert answer_valid(z, 0, Answer(0, 2, 1), 2)
    assert not answer_valid(z, 0, Answer(0, 2, 0), 2)
    assert not answer_valid(z, 1, Answer(0, 2, 1), 2)  # edge of the wrong matching
    assert answer_valid(z, 1, Answer(1, 2, 0), 2)
    assert not answer_valid(z, 1, Answer(1, 2, 2), 2)


def test_instance():
    spec = GadgetSpec.build(1, 2, 1, 2)  # p=1, r=1: z is the bits of the single element
    inst = HMInstance(spec, 0, rows_from([[2]]))
    assert inst.z() == (0, 1)
    assert check_answer(inst, Answer(0, 1, 1))
    assert not check_answer(inst, Answer(0, 1, 0))
    with pytest.raises(MatchingError):
        HMInstance(spec, 1, rows_from([[2]]))
