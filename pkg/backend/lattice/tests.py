import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from spinlab.errors import DomainError
from .services import (
    SpinGraph, as_spin, bipartition, complete_graph, diameter, dump_graph, from_edges,
    graph_distance, minimum_spacing, parse_graph, path_graph, random_connected_graph,
    ring_graph, set_distance, star_graph, translate,
)


def test_path_distance_and_self_distance():
    g = path_graph(4)
    assert graph_distance(g, 0, 3) == 3
    for x in g.vertices:
        assert graph_distance(g, x, x) == 0


def test_complete_graph_distance():
    assert graph_distance(complete_graph(4), 0, 2) == 1


def test_unknown_vertex_is_domain_error():
    with pytest.raises(DomainError):
        graph_distance(path_graph(3), 0, 7)


def test_disconnected_pair_is_infinite_not_large():
    g = from_edges(4, [(0, 1, 1.0), (2, 3, 1.0)])
    d = graph_distance(g, 0, 3)
    assert d == math.inf
    assert not g.is_connected


def test_diameter_examples():
    g = path_graph(4)
    assert diameter(g, {0, 2, 3}) == 3
    assert diameter(g, {1}) == 0
    assert diameter(complete_graph(4), range(4)) == 1
    with pytest.raises(DomainError):
        diameter(g, set())


def test_set_distance_examples():
    assert set_distance(path_graph(4), 0, {2, 3}) == 2
    assert set_distance(path_graph(4), 2, {2, 3}) == 0
    assert set_distance(path_graph(3), 1, {0, 2}) == 1
    with pytest.raises(DomainError):
        set_distance(path_graph(3), 1, [])


@pytest.mark.parametrize("g", [
    path_graph(6), ring_graph(7), complete_graph(5), star_graph(4),
    from_edges(8, [(0, 1, 1), (1, 2, 1), (2, 3, 1), (3, 0, 1), (3, 4, 1), (4, 5, 1), (5, 6, 1), (6, 7, 1), (7, 2, 1)]),
])
def test_metric_axioms_exhaustive(g):
    V = list(g.vertices)
    for x, y, z in itertools.product(V, repeat=3):
        assert graph_distance(g, x, z) <= graph_distance(g, x, y) + graph_distance(g, y, z)
    for x, y in itertools.product(V, repeat=2):
        assert graph_distance(g, x, y) == graph_distance(g, y, x)
        assert diameter(g, {x, y}) == graph_distance(g, x, y)
    assert minimum_spacing(g) == 1


def test_builders_produce_documented_edges():
    assert {(x, y) for x, y, _ in path_graph(4).edges} == {(0, 1), (1, 2), (2, 3)}
    assert {(x, y) for x, y, _ in ring_graph(4).edges} == {(0, 1), (1, 2), (2, 3), (3, 0)}
    assert len(complete_graph(5).edges) == 10
    assert {(x, y) for x, y, _ in star_graph(3).edges} == {(0, 1), (0, 2), (0, 3)}


def test_invalid_edges_rejected():
    with pytest.raises(DomainError):
        from_edges(3, [(1, 1, 1.0)])
    with pytest.raises(DomainError):
        from_edges(3, [(0, 1, 1.0), (1, 0, 2.0)])
    with pytest.raises(DomainError):
        ring_graph(2)


def test_spin_parsing():
    assert as_spin("1/2") == Fraction(1, 2)
    assert as_spin(1) == 1
    assert as_spin(1.5) == Fraction(3, 2)
    for bad in (0, -1, "1/3", 0.7):
        with pytest.raises(DomainError):
            as_spin(bad)


def test_graph_file_parse_and_dump():
    text = "vertices 3\n0 1 1.0\n1 2 2.5\nspin 1 1\n"
    g = parse_graph(text)
    assert g.n_vertices == 3
    assert g.weight(1, 2) == 2.5
    assert g.spins == (Fraction(1, 2), Fraction(1), Fraction(1, 2))
    assert g.site_dims == (2, 3, 2)
    assert parse_graph(dump_graph(g)) == g


def test_graph_file_errors():
    with pytest.raises(DomainError):
        parse_graph("")
    with pytest.raises(DomainError):
        parse_graph("edges 3\n")
    with pytest.raises(DomainError):
        parse_graph("vertices 2\n0 1\n")


def test_bipartition_and_non_bipartite():
    A, B = bipartition(path_graph(4))
    assert A == [0, 2] and B == [1, 3]
    with pytest.raises(DomainError):
        bipartition(complete_graph(3))


def test_translate_is_graph_automorphism_of_ring():
    g = ring_graph(6)
    h = translate(g, 2)
    assert {frozenset((x, y)) for x, y, _ in h.edges} == {frozenset((x, y)) for x, y, _ in g.edges}


def test_random_connected_graph_is_connected():
    rng = np.random.default_rng(3)
    for n in range(2, 7):
        g = random_connected_graph(n, rng)
        assert g.is_connected
        assert all(w > 0 for _, _, w in g.edges)
