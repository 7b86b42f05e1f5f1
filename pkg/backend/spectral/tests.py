import numpy as np
import pytest
import scipy.sparse as sp

from hamiltonians.services import aklt, assemble, heisenberg, xxz, xxz_params
from hilbert.services import SparseOperator, SpinSpace, all_sectors, embed_at, magnetization_sector, spin_matrices
from lattice.services import path_graph, ring_graph
from spinlab.errors import DegenerateSpectrumError, ResourceError, SectorLeakError
from .services import (
    SpectrumReport, extremal_eigs, full_spectrum, ground_state, lowest_levels, merge_reports,
    sector_spectrum, spectral_gap, start_vector,
)


def _random_hermitian(rng, n, density=None):
    if density is None:
        A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        return SparseOperator((A + A.conj().T) / 2, hermitian=True)
    A = sp.random(n, n, density=density, random_state=np.random.RandomState(int(rng.integers(2**31))))
    A = A + A.T + sp.diags(rng.normal(size=n))
    return SparseOperator(A, hermitian=True)


def test_full_spectrum_small_examples():
    assert np.allclose(full_spectrum(np.diag([3.0, 1.0, 2.0])).eigenvalues, [1, 2, 3])
    g = path_graph(2)
    rep = full_spectrum(assemble(heisenberg(g), SpinSpace.for_graph(g)))
    assert np.allclose(rep.eigenvalues, [-0.25, -0.25, -0.25, 0.75], atol=1e-12)
    ident = full_spectrum(np.eye(4))
    assert np.allclose(ident.eigenvalues, 1)


def test_full_spectrum_vectors_orthonormal_and_small_residuals():
    g = ring_graph(5)
    H = assemble(heisenberg(g), SpinSpace.for_graph(g))
    rep = full_spectrum(H, want_vectors=True)
    V = rep.eigenvectors
    assert np.abs(V.conj().T @ V - np.eye(V.shape[1])).max() < 1e-10
    assert rep.residuals.max() < 1e-10
    assert abs(rep.eigenvalues.sum() - np.trace(H.toarray()).real) < 1e-9


def test_full_spectrum_refuses_large(settings):
    settings.SPINLAB_DENSE_CUTOFF = 8
    with pytest.raises(ResourceError) as exc:
        full_spectrum(np.eye(16))
    assert exc.value.dim == 16


@pytest.mark.slow
def test_lanczos_agrees_with_dense_on_random_matrices():
    rng = np.random.default_rng(2024)
    for trial in range(100):
        n = int(rng.integers(16, 513))
        H = _random_hermitian(rng, n) if trial % 2 else _random_hermitian(rng, n, density=0.05)
        dense = full_spectrum(H).eigenvalues[:5]
        lanczos = extremal_eigs(H, 5).eigenvalues
        assert np.abs(dense - lanczos).max() < 1e-9


def test_lanczos_resolves_degenerate_levels():
    rep = extremal_eigs(np.diag([0.0] * 5 + [1.0]), 2)
    assert np.allclose(rep.eigenvalues, [0, 0], atol=1e-12)
    V = rep.eigenvectors
    assert np.abs(V.conj().T @ V - np.eye(2)).max() < 1e-10


def test_lanczos_falls_back_when_ground_state_is_orthogonal_to_start():
    assert np.allclose(start_vector(4), 0.5)
    u = np.array([1.0, -1.0, 0.0, 0.0]) / np.sqrt(2)
    # all-ones is an eigenvector with eigenvalue 1 and never sees u
    H = np.eye(4) - 2 * np.outer(u, u)
    rep = extremal_eigs(H, 1)
    assert abs(rep.eigenvalues[0] + 1) < 1e-10
    assert abs(abs(rep.eigenvectors[:, 0] @ u) - 1) < 1e-8


def test_lanczos_on_open_aklt_ground_energy():
    H = assemble(aklt(6), SpinSpace.uniform(6, 1))
    rep = extremal_eigs(H, 1)
    assert abs(rep.eigenvalues[0]) < 1e-10
    assert rep.residuals[0] < 1e-8


def test_lowest_levels_switches_to_lanczos(settings):
    g = ring_graph(6)
    H = assemble(heisenberg(g), SpinSpace.for_graph(g))
    dense = lowest_levels(H, 4).eigenvalues
    settings.SPINLAB_DENSE_CUTOFF = 16
    lanczos = lowest_levels(H, 4)
    assert lanczos.method == "lanczos"
    assert np.abs(dense - lanczos.eigenvalues).max() < 1e-9


def test_sector_spectrum_ferro_top_sector_is_ground():
    g = path_graph(4)
    space = SpinSpace.for_graph(g)
    H = assemble(heisenberg(g), space)
    rep = sector_spectrum(H, magnetization_sector(space, 2))
    assert rep.n_levels == 1
    assert abs(rep.eigenvalues[0] - full_spectrum(H).eigenvalues[0]) < 1e-12
    assert rep.sector == ("M", 2)


@pytest.mark.parametrize("H,space", [
    (assemble(heisenberg(ring_graph(6)), SpinSpace.uniform(6)), SpinSpace.uniform(6)),
    (assemble(aklt(5), SpinSpace.uniform(5, 1)), SpinSpace.uniform(5, 1)),
    (assemble(xxz(xxz_params(7, q=0.5)), SpinSpace.uniform(7)), SpinSpace.uniform(7)),
])
def test_sector_union_is_full_spectrum(H, space):
    merged = merge_reports([sector_spectrum(H, s) for s in all_sectors(space)])
    full = full_spectrum(H).eigenvalues
    assert merged.n_levels == full.size
    assert np.abs(merged.eigenvalues - full).max() < 1e-9


def test_periodic_xxz_one_magnon_sector():
    p = xxz_params(8, Delta=1.25, boundary="periodic")
    space = SpinSpace.uniform(8)
    rep = sector_spectrum(assemble(xxz(p), space), magnetization_sector(space, 3))
    assert abs(rep.eigenvalues[0] - 0.2) < 1e-12


def test_sector_leak_reported():
    space = SpinSpace.uniform(2)
    H = embed_at(space, [(0, spin_matrices("1/2").S1)], hermitian=True)
    with pytest.raises(SectorLeakError) as exc:
        sector_spectrum(H, magnetization_sector(space, 1))
    assert exc.value.row == 0


def test_spectral_gap_examples():
    gap = spectral_gap(SpectrumReport(np.array([0, 0, 0.35, 1.2])), 1e-8)
    assert gap.ground_degeneracy == 2
    assert abs(gap.gap - 0.35) < 1e-15
    with pytest.raises(DegenerateSpectrumError):
        spectral_gap(full_spectrum(np.eye(3)))


def test_ferro_ring_gap_is_magnon_energy():
    g = ring_graph(4)
    gap = spectral_gap(full_spectrum(assemble(heisenberg(g), SpinSpace.for_graph(g))))
    assert abs(gap.gap - 1.0) < 1e-12
    assert gap.ground_degeneracy == 5


def test_block_diagonal_gap_merges_blocks():
    rng = np.random.default_rng(5)
    blocks = [_random_hermitian(rng, n).toarray() for n in (3, 4, 5)]
    H = sp.block_diag(blocks)
    merged = merge_reports([full_spectrum(b) for b in blocks])
    assert abs(spectral_gap(merged).gap - spectral_gap(full_spectrum(H)).gap) < 1e-12


def test_ground_state_of_periodic_aklt_is_unique():
    E0, omega, gap = ground_state(assemble(aklt(6, periodic=True), SpinSpace.uniform(6, 1)))
    assert abs(E0) < 1e-10
    assert abs(np.linalg.norm(omega) - 1) < 1e-12
    assert gap.gap > 0.1
    with pytest.raises(DegenerateSpectrumError):
        ground_state(assemble(aklt(4), SpinSpace.uniform(4, 1)))
