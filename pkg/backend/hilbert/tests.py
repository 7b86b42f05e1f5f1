import itertools
from fractions import Fraction

import numpy as np
import pytest
import scipy.sparse as sp

from lattice.services import path_graph
from spinlab.errors import DomainError, EmptySectorError
from .services import (
    SparseOperator, SpinSpace, achievable_magnetizations, all_sectors, commutator, embed_at,
    embed_term, lift, magnetization_sector, operator_basis, operator_norm, particle_sector,
    restrict, sector_dimensions, spin_matrices, total_operator, translation_operator,
)


@pytest.mark.parametrize("s", ["1/2", 1, "3/2", 2])
def test_spin_matrices_su2_relations(s):
    S = spin_matrices(s)
    comm = S.S1 @ S.S2 - S.S2 @ S.S1
    assert np.abs(comm - 1j * S.S3).max() < 1e-14
    sf = float(Fraction(s))
    casimir = S.S1 @ S.S1 + S.S2 @ S.S2 + S.S3 @ S.S3
    assert np.abs(casimir - sf * (sf + 1) * np.eye(S.dim)).max() < 1e-13
    assert np.allclose(S.Splus, S.S1 + 1j * S.S2)
    assert np.allclose(S.Sminus, S.S1 - 1j * S.S2)


def test_spin_half_s3_descending():
    assert np.allclose(spin_matrices("1/2").S3, np.diag([0.5, -0.5]))


def test_spin_matrices_reject_bad_spin():
    for bad in (0, "1/3", -1):
        with pytest.raises(DomainError):
            spin_matrices(bad)


def test_space_rejects_trivial_site():
    with pytest.raises(DomainError):
        SpinSpace((2, 1))


def test_encode_decode_round_trip():
    space = SpinSpace((2, 3, 2, 4))
    for i in range(space.total_dim):
        assert space.encode(space.decode(i)) == i
    # site 0 is the most significant digit
    assert space.decode(space.total_dim - 1) == (1, 2, 1, 3)
    assert space.encode((1, 0, 0, 0)) == 3 * 2 * 4


def test_embed_s3_at_site_zero():
    space = SpinSpace.uniform(2)
    op = embed_at(space, [(0, spin_matrices("1/2").S3)])
    assert np.allclose(op.toarray(), np.diag([0.5, 0.5, -0.5, -0.5]))


def test_embed_identity_everywhere_is_identity():
    space = SpinSpace((2, 3, 2))
    op = embed_at(space, [(x, np.eye(n)) for x, n in enumerate(space.site_dims)])
    assert np.allclose(op.toarray(), np.eye(space.total_dim))


def test_embed_disjoint_supports_multiply():
    space = SpinSpace((2, 3, 2))
    rng = np.random.default_rng(0)
    A = rng.normal(size=(2, 2))
    B = rng.normal(size=(2, 2))
    lhs = (embed_at(space, [(0, A)]) @ embed_at(space, [(2, B)])).toarray()
    rhs = embed_at(space, [(0, A), (2, B)]).toarray()
    assert np.abs(lhs - rhs).max() == 0


def test_embed_is_homomorphism_per_site():
    space = SpinSpace((3, 2))
    rng = np.random.default_rng(1)
    A = rng.normal(size=(3, 3))
    B = rng.normal(size=(3, 3))
    lhs = embed_at(space, [(0, A @ B)]).toarray()
    rhs = (embed_at(space, [(0, A)]) @ embed_at(space, [(0, B)])).toarray()
    assert np.allclose(lhs, rhs)


def test_embed_dimension_mismatch():
    space = SpinSpace((2, 3))
    with pytest.raises(DomainError):
        embed_at(space, [(1, np.eye(2))])
    with pytest.raises(DomainError):
        embed_at(space, [(0, np.eye(2)), (0, np.eye(2))])


def test_embed_term_non_contiguous_matches_products():
    space = SpinSpace.uniform(3)
    S = spin_matrices("1/2")
    term = np.kron(S.S3, S.S1)
    direct = embed_at(space, [(0, S.S3), (2, S.S1)]).toarray()
    assert np.allclose(embed_term(space, [0, 2], term).toarray(), direct)
    # reversed support order swaps the tensor factors
    assert np.allclose(embed_term(space, [2, 0], np.kron(S.S1, S.S3)).toarray(), direct)


def test_hermitian_flag_is_verified():
    with pytest.raises(DomainError):
        SparseOperator(np.array([[0, 1], [0, 0]]), hermitian=True)
    op = SparseOperator(np.array([[1, 1e-16], [0, 2]]))
    assert op.nnz == 2


def test_sector_examples():
    four = SpinSpace.uniform(4)
    assert magnetization_sector(four, 2).dim == 1
    assert magnetization_sector(four, 1).dim == 4
    five = SpinSpace.uniform(5, 1)
    sec = magnetization_sector(five, 4)
    assert sec.dim == 5
    brute = sum(1 for ms in itertools.product((1, 0, -1), repeat=5) if sum(ms) == 4)
    assert sec.dim == brute


def test_sector_states_are_increasing_and_labeled():
    space = SpinSpace((2, 3, 4))
    for sec in all_sectors(space):
        assert np.all(np.diff(sec.states) > 0)
        for i in sec.states:
            assert space.magnetization(int(i)) == sec.magnetization


def test_unachievable_sector():
    with pytest.raises(EmptySectorError):
        magnetization_sector(SpinSpace.uniform(4), 3)
    with pytest.raises(EmptySectorError):
        magnetization_sector(SpinSpace.uniform(4), Fraction(1, 2))


def test_recursive_enumeration_matches_scan(settings):
    space = SpinSpace((2, 3, 2, 3, 4))
    scanned = magnetization_sector(space, Fraction(1, 2)).states
    settings.SPINLAB_SCAN_CUTOFF = 1
    recursed = magnetization_sector(space, Fraction(1, 2)).states
    assert np.array_equal(scanned, recursed)


@pytest.mark.parametrize("dims", [(2,) * 6, (3,) * 4, (2, 3, 4, 2), (5, 2)])
def test_sector_dimensions_sum_to_total(dims):
    space = SpinSpace(dims)
    table = sector_dimensions(space)
    assert sum(table.values()) == space.total_dim
    for M, d in table.items():
        assert magnetization_sector(space, M).dim == d
    assert achievable_magnetizations(space)[-1] == space.S_max


def test_restrict_and_lift_reproduce_sector_block():
    g = path_graph(4)
    space = SpinSpace.for_graph(g)
    S = spin_matrices("1/2")
    H = sum((embed_at(space, [(x, S.S3)]) @ embed_at(space, [(x + 1, S.S3)]) for x in range(3)),
            SparseOperator(sp.csr_matrix((16, 16))))
    H = H + sum((embed_term(space, [x, x + 1], np.kron(S.S1, S.S1) + np.kron(S.S2, S.S2)) for x in range(3)),
                SparseOperator(sp.csr_matrix((16, 16))))
    sec = magnetization_sector(space, 0)
    block = restrict(H, sec).toarray()
    full = H.toarray()
    assert np.array_equal(block, full[np.ix_(sec.states, sec.states)])
    v = np.arange(sec.dim, dtype=float)
    lifted = lift(v, sec)
    assert np.allclose(lifted[sec.states], v)
    assert np.count_nonzero(lifted) == np.count_nonzero(v)


def test_particle_sector_counts_down_spins():
    space = SpinSpace.uniform(6)
    sec = particle_sector(space, 2)
    assert sec.dim == 15
    assert sec.label == ("n", Fraction(2))
    assert all(space.magnetization(int(i)) == 1 for i in sec.states)


def test_total_s3_is_diagonal_magnetization():
    space = SpinSpace((2, 3))
    S3 = total_operator(space, "S3")
    assert np.allclose(np.diag(S3.toarray()).real, space.twice_magnetization / 2)


def test_operator_basis_spin_half_is_pauli():
    basis = operator_basis(2)
    assert len(basis) == 3
    assert np.allclose(basis[0], [[0, 1], [1, 0]])
    assert np.allclose(basis[1], [[0, -1j], [1j, 0]])
    assert np.allclose(basis[2], [[1, 0], [0, -1]])


@pytest.mark.parametrize("n", [2, 3, 4])
def test_operator_basis_is_traceless_hermitian_unit_norm(n):
    basis = operator_basis(n)
    assert len(basis) == n * n - 1
    for a in basis:
        assert abs(np.trace(a)) < 1e-14
        assert np.allclose(a, a.conj().T)
        assert abs(operator_norm(a) - 1) < 1e-12


def test_translation_operator_shifts_sites():
    space = SpinSpace.uniform(4)
    T = translation_operator(space)
    S3 = spin_matrices("1/2").S3
    A0 = embed_at(space, [(0, S3)])
    A1 = embed_at(space, [(1, S3)])
    lhs = (T @ A0 @ T.adjoint()).toarray()
    assert np.allclose(lhs, A1.toarray())
    assert np.allclose((T @ T.adjoint()).toarray(), np.eye(16))


def test_commutator_of_commuting_operators_vanishes():
    space = SpinSpace.uniform(3)
    S = spin_matrices("1/2")
    c = commutator(embed_at(space, [(0, S.S1)]), embed_at(space, [(2, S.S2)]))
    assert c.nnz == 0
