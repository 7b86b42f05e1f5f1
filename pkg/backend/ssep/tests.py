import logging
import math

import numpy as np
import pytest

from lattice.services import complete_graph, from_edges, path_graph, random_connected_graph, ring_graph, star_graph
from spinlab.errors import DomainError
from .services import (
    exclusion_space, particle_hole_check, random_walk_deviation, relaxation_time, semigroup_evolve,
    ssep_gaps, ssep_generator, xxx_conjugacy_check,
)


def _random_graphs(count, seed=11, sizes=(3, 7)):
    rng = np.random.default_rng(seed)
    return [random_connected_graph(int(rng.integers(sizes[0], sizes[1] + 1)), rng) for _ in range(count)]


def test_configuration_count_and_order():
    space = exclusion_space(path_graph(5), 2)
    assert space.dim == math.comb(5, 2)
    assert list(space.configs) == sorted(space.configs)
    assert space.occupation(space.configs[0]) == (1, 1, 0, 0, 0)
    with pytest.raises(DomainError):
        exclusion_space(path_graph(3), 4)
    with pytest.raises(DomainError):
        exclusion_space(path_graph(3, J=-1.0), 1)


def test_two_vertex_generator():
    L = ssep_generator(exclusion_space(path_graph(2), 1))
    assert np.array_equal(L.toarray().real, [[1, -1], [-1, 1]])


def test_generator_is_symmetric_with_zero_row_sums():
    for g in _random_graphs(5):
        for n in range(g.n_vertices + 1):
            L = ssep_generator(exclusion_space(g, n)).toarray().real
            assert np.array_equal(L, L.T)
            assert np.abs(L.sum(axis=1)).max() < 1e-14
            assert np.linalg.eigvalsh(L).min() > -1e-12


def test_path_single_particle_spectrum():
    L = ssep_generator(exclusion_space(path_graph(3), 1)).toarray().real
    assert np.allclose(np.linalg.eigvalsh(L), [0, 1, 3], atol=1e-12)


def test_gaps_on_small_graphs():
    k3 = ssep_gaps(complete_graph(3))
    assert abs(k3.gaps[1] - 3) < 1e-12 and abs(k3.gaps[2] - 3) < 1e-12
    path = ssep_gaps(path_graph(3))
    assert abs(path.gaps[1] - 1) < 1e-12 and abs(path.gaps[2] - 1) < 1e-12
    assert max(path.stationary_checks.values()) < 1e-14
    assert relaxation_time(path.gaps[1]) == pytest.approx(1.0)


def test_gap_is_independent_of_particle_number_on_random_graphs():
    for g in _random_graphs(6, seed=3):
        report = ssep_gaps(g)
        assert report.aldous_margin < 1e-9
        assert all(lam > 0 for lam in report.gaps.values())


@pytest.mark.parametrize("L", range(2, 9))
def test_gap_is_independent_of_particle_number_on_chains(L):
    rng = np.random.default_rng(L)
    g = path_graph(L).with_weights(rng.uniform(0.5, 2.0, L - 1))
    assert ssep_gaps(g).aldous_margin < 1e-9


def test_off_chain_caveat_is_logged(caplog):
    with caplog.at_level(logging.WARNING, logger="ssep.services"):
        ssep_gaps(star_graph(3))
    assert any(r.levelno == logging.WARNING for r in caplog.records)
    caplog.clear()
    with caplog.at_level(logging.WARNING, logger="ssep.services"):
        ssep_gaps(path_graph(4))
    assert not caplog.records


def test_disconnected_graph_rejected():
    with pytest.raises(DomainError):
        ssep_gaps(from_edges(3, [(0, 1, 1.0)]))
    with pytest.raises(DomainError):
        relaxation_time(0.0)


def test_conjugacy_two_vertices():
    report = xxx_conjugacy_check(path_graph(2))
    assert report.max_deviation < 1e-12
    assert set(report.deviations) == {0, 1, 2}
    assert all(abs(v) < 1e-12 for v in report.uniform_rayleigh.values())


def test_conjugacy_on_path_and_random_graphs():
    assert xxx_conjugacy_check(path_graph(4)).max_deviation < 1e-10
    for g in _random_graphs(3, seed=19, sizes=(3, 6)):
        assert xxx_conjugacy_check(g).max_deviation < 1e-10


def test_particle_hole_symmetry():
    for g in [ring_graph(5), star_graph(4)] + _random_graphs(3, seed=23):
        assert particle_hole_check(g) < 1e-10


def test_single_particle_is_graph_laplacian():
    for g in _random_graphs(4, seed=29):
        assert random_walk_deviation(g) < 1e-14


def test_semigroup_two_vertices():
    L = ssep_generator(exclusion_space(path_graph(2), 1))
    mu0 = np.array([1.0, 0.0])
    assert np.array_equal(semigroup_evolve(L, mu0, 0), mu0)
    for t in (0.1, 0.5, 2.0):
        mu = semigroup_evolve(L, mu0, t)
        expected = [0.5 + math.exp(-2 * t) / 2, 0.5 - math.exp(-2 * t) / 2]
        assert np.allclose(mu, expected, atol=1e-13)
    with pytest.raises(DomainError):
        semigroup_evolve(L, mu0, -1.0)


def test_semigroup_contracts_at_the_gap_rate():
    g = ring_graph(6)
    report = ssep_gaps(g)
    space = exclusion_space(g, 3)
    L = ssep_generator(space)
    mu0 = np.zeros(space.dim)
    mu0[0] = 1.0
    uniform = np.full(space.dim, 1 / space.dim)
    for t in (0.0, 0.3, 1.0, 4.0, 50.0):
        mu = semigroup_evolve(L, mu0, t)
        assert mu.min() > -1e-12
        assert abs(mu.sum() - 1) < 1e-12
        bound = math.exp(-report.gaps[3] * t) * np.linalg.norm(mu0 - uniform)
        assert np.linalg.norm(mu - uniform) <= bound + 1e-12


def test_semigroup_krylov_path(settings):
    settings.SPINLAB_DENSE_CUTOFF = 4
    space = exclusion_space(path_graph(6), 2)
    L = ssep_generator(space)
    mu0 = np.full(space.dim, 1 / space.dim)
    mu0[0] += 0.5 / space.dim
    mu0[1] -= 0.5 / space.dim
    mu = semigroup_evolve(L, mu0, 1.5)
    settings.SPINLAB_DENSE_CUTOFF = 4096
    assert np.abs(mu - semigroup_evolve(L, mu0, 1.5)).max() < 1e-10
