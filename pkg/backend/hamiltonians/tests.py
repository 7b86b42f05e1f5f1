import math
from fractions import Fraction

import numpy as np
import pytest

from hilbert.services import SpinSpace, commutator, magnetization_sector, restrict, spin_matrices, total_operator
from lattice.services import from_edges, path_graph, random_connected_graph, ring_graph
from spinlab.errors import DomainError
from .services import (
    PERIODIC, Term, aklt, aklt_bond, assemble, assemble_sector, combine, custom, heisenberg,
    interaction_norm_table, lambda_norm, scale, translated, xxz, xxz_bond, xxz_params,
)


def _eigs(phi, space):
    return np.linalg.eigvalsh(assemble(phi, space).toarray())


def test_two_site_heisenberg_spectrum():
    g = path_graph(2)
    H = assemble(heisenberg(g), SpinSpace.for_graph(g))
    assert np.allclose(np.linalg.eigvalsh(H.toarray()), [-0.25, -0.25, -0.25, 0.75], atol=1e-12)
    assert abs(np.trace(H.toarray())) < 1e-14


def test_ferromagnetic_ground_energy_saturates_every_bond():
    rng = np.random.default_rng(7)
    g = random_connected_graph(5, rng)
    g = from_edges(g.n_vertices, g.edges, spins=["1/2", 1, "1/2", 1, "3/2"])
    expected = -sum(w * float(g.spins[x] * g.spins[y]) for x, y, w in g.edges)
    assert abs(_eigs(heisenberg(g), SpinSpace.for_graph(g))[0] - expected) < 1e-10


def test_spin_one_chain_ground_energy():
    g = path_graph(5, spin=1)
    assert abs(_eigs(heisenberg(g), SpinSpace.for_graph(g))[0] + 4) < 1e-10


def test_aklt_bond_is_spin_two_projector():
    P = aklt_bond()
    ev = np.linalg.eigvalsh(P)
    assert np.allclose(ev, [0] * 4 + [1] * 5, atol=1e-12)
    assert np.abs(P @ P - P).max() < 1e-12


def test_open_aklt_three_sites():
    ev = _eigs(aklt(3), SpinSpace.uniform(3, 1))
    assert ev.min() > -1e-12
    assert np.sum(np.abs(ev) < 1e-10) == 4


def test_aklt_rejects_short_chains():
    with pytest.raises(DomainError):
        aklt(1)
    with pytest.raises(DomainError):
        aklt(2, periodic=True)


def test_xxz_params_derivation():
    p = xxz_params(4, q=0.5)
    assert abs(p.Delta - 1.25) < 1e-15
    assert abs(p.A_Delta - 0.5 * math.sqrt(1 - 1 / 1.5625)) < 1e-12
    r = xxz_params(4, Delta=1.25)
    assert abs(r.q - 0.5) < 1e-12
    for bad in ({"Delta": 1.0}, {"q": 1.0}, {"q": 0.5, "Delta": 1.25}, {}):
        with pytest.raises(DomainError):
            xxz_params(4, **bad)


@pytest.mark.parametrize("boundary", ["open_with_field", "periodic"])
def test_all_up_state_has_zero_energy(boundary):
    p = xxz_params(5, q=0.4, boundary=boundary)
    H = assemble(xxz(p), SpinSpace.uniform(5)).toarray()
    # index 0 is every site at m = +1/2
    assert np.abs(H[:, 0]).max() < 1e-14


def test_xxz_bond_ising_limit():
    S = spin_matrices("1/2")
    ising = -(np.kron(S.S3, S.S3) - np.eye(4) / 4)
    assert np.abs(xxz_bond(1e12) - ising).max() < 1e-12


def test_periodic_one_magnon_minimum():
    p = xxz_params(8, Delta=1.25, boundary=PERIODIC)
    space = SpinSpace.uniform(8)
    sector = magnetization_sector(space, 3)
    ev = np.linalg.eigvalsh(assemble_sector(xxz(p), sector).toarray())
    assert sector.dim == 8
    assert abs(ev[0] - 0.2) < 1e-12
    ks = 2 * np.pi * np.arange(8) / 8
    assert np.allclose(ev, np.sort(1 - np.cos(ks) / 1.25), atol=1e-12)


def test_custom_terms():
    space = SpinSpace.uniform(3)
    assert assemble(custom([]), space).nnz == 0
    ident = assemble(custom([((0,), np.eye(2))]), space).toarray()
    assert np.allclose(ident, np.eye(8))
    with pytest.raises(DomainError):
        custom([((0,), np.array([[0, 1], [0, 0]]))])


def test_translated_family_counts():
    S = spin_matrices("1/2")
    fam = translated(np.kron(S.S3, S.S3), 4)
    assert len(fam) == 3
    assert [t.support for t in fam] == [(0, 1), (1, 2), (2, 3)]
    ring = translated(np.kron(S.S3, S.S3), 4, periodic=True)
    assert ring.terms[-1].support == (3, 0)


def test_term_validation():
    with pytest.raises(DomainError):
        Term((), np.eye(2))
    with pytest.raises(DomainError):
        Term((0, 0), np.eye(4))


def test_lambda_norm_of_spin_half_chain():
    g = path_graph(8)
    value = lambda_norm(heisenberg(g), 1.0, g)
    assert abs(value - 48 * math.e) < 1e-9
    table = interaction_norm_table(heisenberg(g), 1.0, g)
    assert abs(table[0] - 24 * math.e) < 1e-9


def test_lambda_norm_homogeneity_and_monotonicity():
    g = ring_graph(5)
    phi = heisenberg(g)
    assert lambda_norm(custom([]), 1.0, g) == 0
    assert abs(lambda_norm(scale(phi, 2), 1.0, g) - 2 * lambda_norm(phi, 1.0, g)) < 1e-9
    values = [lambda_norm(phi, lam, g) for lam in (0.25, 0.5, 1, 2)]
    assert values == sorted(values)
    with pytest.raises(DomainError):
        lambda_norm(phi, 0, g)


def test_lambda_norm_rejects_disconnected_support():
    g = from_edges(3, [(0, 1, 1.0)])
    phi = custom([((0, 2), np.eye(4))])
    with pytest.raises(DomainError):
        lambda_norm(phi, 1.0, g)


def test_assemble_is_bit_identical_under_term_order():
    g = ring_graph(5)
    phi = heisenberg(g.with_weights([1.0, 0.7, 1.3, 0.2, 2.0]))
    rev = custom(reversed(phi.terms))
    A = assemble(phi, SpinSpace.for_graph(g)).toarray()
    B = assemble(rev, SpinSpace.for_graph(g)).toarray()
    assert np.array_equal(A, B)


def test_assemble_support_mismatch():
    with pytest.raises(DomainError):
        assemble(custom([((0, 3), np.eye(4))]), SpinSpace.uniform(3))
    with pytest.raises(DomainError):
        assemble(custom([((0,), np.eye(3))]), SpinSpace.uniform(3))


@pytest.mark.parametrize("phi,space", [
    (heisenberg(path_graph(4, spin=1)), SpinSpace.uniform(4, 1)),
    (xxz(xxz_params(5, q=0.3)), SpinSpace.uniform(5)),
    (aklt(4, periodic=True), SpinSpace.uniform(4, 1)),
])
def test_models_commute_with_total_s3(phi, space):
    H = assemble(phi, space)
    assert H.hermitian
    c = commutator(H, total_operator(space, "S3"))
    assert c.nnz == 0 or np.abs(c.matrix.data).max() < 1e-12


def test_combine_adds_scaled_terms():
    S = spin_matrices(1)
    base = aklt(4, periodic=True)
    pert = translated(np.kron(S.S3, S.S3), 4, periodic=True, site_dim=3)
    space = SpinSpace.uniform(4, 1)
    lhs = assemble(combine(base, pert, 0.1), space).toarray()
    rhs = assemble(base, space).toarray() + 0.1 * assemble(pert, space).toarray()
    assert np.allclose(lhs, rhs, atol=1e-13)


def test_sector_block_matches_full_matrix():
    space = SpinSpace.uniform(4, 1)
    H = assemble(aklt(4), space)
    sector = magnetization_sector(space, Fraction(1))
    assert np.array_equal(assemble_sector(aklt(4), sector).toarray(), restrict(H, sector).toarray())
