from fractions import Fraction

import numpy as np
import pytest

from hamiltonians.services import assemble, heisenberg, xxz, xxz_params
from hilbert.services import SpinSpace, commutator, magnetization_sector, operator_norm, total_operator
from lattice.services import complete_graph, from_edges, path_graph, ring_graph, star_graph
from spectral.services import full_spectrum, spectral_gap
from spinlab.errors import DomainError, IncompleteTableError, ResourceError
from .services import (
    SpinResolvedLevels, casimir_value, classify_sector, classify_total_spin, level_rows, foel_check,
    highest_levels, lieb_mattis_check, lieb_mattis_hamiltonian, lieb_mattis_side_check, multiplet_counts,
    spin_grid, su2_algebra, su2_totals, suq2_algebra, suq2_casimir_values, suq2_generators, suq_raising,
)

half = Fraction(1, 2)


def _ferro_chain(L, spin=half):
    g = path_graph(L, spin=spin)
    space = SpinSpace.for_graph(g)
    return assemble(heisenberg(g), space), space


def test_su2_casimir_spectrum_two_spins():
    tot = su2_totals(SpinSpace.uniform(2))
    assert np.allclose(np.linalg.eigvalsh(tot.C.toarray()), [0, 2, 2, 2], atol=1e-12)
    c = commutator(tot.C, tot.S3)
    assert c.nnz == 0 or np.abs(c.matrix.data).max() < 1e-12


def test_su2_casimir_max_for_five_spin_one():
    tot = su2_totals(SpinSpace.uniform(5, 1))
    assert abs(np.linalg.eigvalsh(tot.C.toarray()).max() - 30) < 1e-10


def test_heisenberg_commutes_with_su2_casimir():
    H, space = _ferro_chain(4, 1)
    c = commutator(H, su2_totals(space).C)
    assert c.nnz == 0 or np.abs(c.matrix.data).max() < 1e-10


@pytest.mark.parametrize("L", [2, 3, 5, 8])
def test_suq_commutation_relation(L):
    q = 0.5
    gens = suq2_generators(xxz_params(L, q=q))
    lhs = commutator(gens.Splus, gens.Sminus).toarray()
    m2 = 2 * np.real(np.diag(gens.S3.toarray()))
    rhs = np.diag((q ** m2 - q ** -m2) / (q - 1 / q))
    assert np.abs(lhs - rhs).max() < 1e-10


def test_suq_generators_reduce_to_su2_as_q_tends_to_one():
    space = SpinSpace.uniform(4)
    raising = suq_raising(space, 1 - 1e-9)
    su2 = total_operator(space, "Splus")
    assert np.abs(raising.toarray() - su2.toarray()).max() < 1e-8


@pytest.mark.parametrize("L,q", [(2, 0.5), (4, 0.5), (6, 0.3), (5, 0.8)])
def test_open_xxz_commutes_with_quantum_group(L, q):
    p = xxz_params(L, q=q)
    gens = suq2_generators(p)
    H = assemble(xxz(p), SpinSpace.uniform(L))
    for G in (gens.Splus, gens.Sminus, gens.C):
        c = commutator(H, G)
        if c.nnz:
            rel = operator_norm(c) / (operator_norm(H) * operator_norm(G))
            assert rel < 1e-12


def test_reversed_twist_breaks_the_symmetry():
    p = xxz_params(4, q=0.5)
    space = SpinSpace.uniform(4)
    H = assemble(xxz(p), space)
    # q → 1/q swaps the twist to diag(q⁻¹, q) in the descending-S³ basis
    assert operator_norm(commutator(H, suq_raising(space, 2.0))) > 1e-2
    assert operator_norm(commutator(H, suq_raising(space, 0.5))) < 1e-10


@pytest.mark.parametrize("L", [2, 3, 4, 5, 6])
def test_quantum_casimir_eigenvalues_and_multiplicities(L):
    q = 0.5
    C = suq2_generators(xxz_params(L, q=q)).C.toarray()
    ev = np.sort(np.linalg.eigvals(C).real)
    expected = np.sort(np.concatenate([[c] * m for c, m in suq2_casimir_values(L, q)]))
    assert ev.size == expected.size
    assert np.abs(ev - expected).max() < 1e-8 * max(1.0, expected.max())


def test_two_site_spin_resolved_table():
    H, space = _ferro_chain(2)
    levels = classify_total_spin(H, su2_algebra(space))
    assert abs(levels.entries[1] + 0.25) < 1e-12
    assert abs(levels.entries[0] - 0.75) < 1e-12
    assert foel_check(levels).holds


def test_spin_one_chain_table_and_verdicts():
    H, space = _ferro_chain(5, 1)
    levels = classify_total_spin(H, su2_algebra(space))
    assert sorted(levels.entries) == [0, 1, 2, 3, 4, 5]
    verdict = foel_check(levels)
    assert verdict.holds and verdict.margin > 1e-6
    gap = spectral_gap(full_spectrum(H)).gap
    assert abs(gap - (levels.entries[4] - levels.entries[5])) < 1e-9
    side = lieb_mattis_side_check(levels, 1)
    assert side.holds
    top = highest_levels(levels)
    assert top[5] == levels.entries[5]
    for S, v in levels.casimir_residuals.items():
        assert v < 1e-8


def test_multiplet_completeness():
    for H, space in (_ferro_chain(6), _ferro_chain(4, 1)):
        levels = classify_total_spin(H, su2_algebra(space))
        assert levels.counts() == multiplet_counts(space)


def test_spin_grid_mixed_spins():
    g = path_graph(2).with_spins(half)
    assert spin_grid(SpinSpace((2, 4))) == [1, 2]
    assert spin_grid(SpinSpace.for_graph(g)) == [0, 1]
    assert spin_grid(SpinSpace.uniform(3)) == [half, Fraction(3, 2)]


@pytest.mark.parametrize("L,spin", [(L, s) for L in range(2, 7) for s in (half, 1) if not (s == 1 and L > 5)])
def test_foel_holds_on_ferromagnetic_chains(L, spin):
    H, space = _ferro_chain(L, spin)
    assert foel_check(classify_total_spin(H, su2_algebra(space))).holds


def test_foel_tie_is_a_violation():
    verdict = foel_check(SpinResolvedLevels({1: 0.0, 0: 0.0}, 1))
    assert not verdict.holds
    assert verdict.witness[:2] == (1, 0)


def test_foel_incomplete_table():
    levels = SpinResolvedLevels({2: -1.0, 0: 0.5}, 2, grid=[0, 1, 2])
    with pytest.raises(IncompleteTableError):
        foel_check(levels)


def test_antiferro_pair_violates_foel():
    g = path_graph(2, J=-1.0)
    space = SpinSpace.for_graph(g)
    levels = classify_total_spin(assemble(heisenberg(g), space), su2_algebra(space))
    assert abs(levels.entries[0] + 0.75) < 1e-12
    assert not foel_check(levels).holds


def test_lieb_mattis_spin_half_chain():
    report = lieb_mattis_check(path_graph(4))
    assert report.ground_spin == 0
    assert report.verdict.holds
    E = report.levels.entries
    assert E[0] < E[1] < E[2]


def test_lieb_mattis_two_site():
    report = lieb_mattis_check(path_graph(2))
    assert report.ground_spin == 0
    assert abs(report.levels.entries[0] + 0.75) < 1e-12


def test_lieb_mattis_spin_one_chain():
    report = lieb_mattis_check(path_graph(4, spin=1))
    assert report.ground_spin == 0 and report.verdict.holds


def test_lieb_mattis_star_has_large_ground_spin():
    report = lieb_mattis_check(star_graph(3))
    assert report.ground_spin == 1
    assert report.verdict.holds


def test_lieb_mattis_rejects_non_bipartite():
    with pytest.raises(DomainError):
        lieb_mattis_check(complete_graph(3))


def test_lieb_mattis_with_intra_part_ferromagnet():
    g = ring_graph(4)
    intra = from_edges(4, [(0, 2, 0.5)])
    report = lieb_mattis_check(g, intra_A=intra)
    assert report.verdict.holds
    H = lieb_mattis_hamiltonian(g, intra_A=intra)
    assert H.hermitian


def test_open_xxz_foel_and_droplet_label():
    p = xxz_params(4, q=0.5)
    space = SpinSpace.uniform(4)
    levels = classify_total_spin(assemble(xxz(p), space), suq2_algebra(4, 0.5))
    assert levels.entries[2] < levels.entries[1] < levels.entries[0]
    assert abs(levels.entries[2]) < 1e-12


def test_classification_margin_and_sector_labels():
    H, space = _ferro_chain(3)
    alg = su2_algebra(space)
    res = classify_sector(H, alg, magnetization_sector(space, half), spin_grid(space))
    assert sorted(res.labels) == [half, half, Fraction(3, 2)]
    assert casimir_value(Fraction(3, 2)) == 3.75


def test_level_rows_cover_spectrum():
    H, space = _ferro_chain(3, 1)
    rows = level_rows(H, su2_algebra(space))
    assert len(rows) == space.total_dim
    assert min(r.energy for r in rows) == 0
    assert rows[0].S3 == 3
    for r in rows:
        assert r.S >= abs(r.S3)


def test_classification_refuses_sectors_above_the_dense_cutoff(settings):
    H, space = _ferro_chain(8)
    # the M = 0 sector of eight spins has 70 states
    settings.SPINLAB_DENSE_CUTOFF = 64
    with pytest.raises(ResourceError) as exc:
        classify_total_spin(H, su2_algebra(space))
    assert exc.value.dim == 70 and exc.value.cutoff == 64
    assert classify_total_spin(H, su2_algebra(space), spins=[3, 4]).entries[Fraction(4)] == pytest.approx(-1.75)
