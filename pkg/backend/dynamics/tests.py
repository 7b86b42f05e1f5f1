import math

import numpy as np
import pytest

from hamiltonians.services import aklt, assemble, heisenberg
from hilbert.services import SpinSpace, embed_at, magnetization_sector, operator_basis, operator_norm, spin_matrices
from lattice.services import path_graph, ring_graph
from spinlab.errors import DegenerateSpectrumError, DomainError, ResourceError
from .services import (
    BData, Eigensystem, GroundCorrelator, clustering_mu, clustering_report, commutator_growth, decay_shape,
    evolve_observable, ground_correlation, large_b_bound, lightcone_grid, lr_bound_rhs, lr_corollary,
    multi_site_bound, validity_ceiling,
)


def _chain(L, spin="1/2"):
    g = path_graph(L, spin=spin)
    space = SpinSpace.for_graph(g)
    phi = heisenberg(g)
    return g, space, phi, assemble(phi, space)


def _sigma3(space, y):
    return embed_at(space, [(y, 2 * spin_matrices("1/2").S3)], hermitian=True)


def _aklt_ring(L):
    g = ring_graph(L, spin=1)
    space = SpinSpace.for_graph(g)
    phi = aklt(L, periodic=True)
    return g, space, phi, assemble(phi, space)


def test_evolution_trivial_cases():
    g, space, phi, H = _chain(4)
    A = _sigma3(space, 1)
    assert evolve_observable(H, A, 0) is A
    for t in (0.3, 2.0):
        assert np.abs(evolve_observable(H, H, t).toarray() - H.toarray()).max() < 1e-10


def test_evolution_group_property_and_unitarity():
    g, space, phi, H = _chain(5)
    eig = Eigensystem.of(H)
    rng = np.random.default_rng(0)
    for _ in range(50):
        x = int(rng.integers(space.n_sites))
        m = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        A = embed_at(space, [(x, (m + m.conj().T) / 2)], hermitian=True)
        for t in (0.1, 1.0, 10.0):
            At = evolve_observable(H, A, t, eig)
            assert abs(operator_norm(At) - operator_norm(A)) < 1e-10
    A = _sigma3(space, 2)
    back = evolve_observable(H, evolve_observable(H, A, 0.7, eig), -0.7, eig)
    assert np.abs(back.toarray() - A.toarray()).max() < 1e-10
    two_step = evolve_observable(H, evolve_observable(H, A, 0.4, eig), 0.9, eig)
    one_step = evolve_observable(H, A, 1.3, eig)
    assert np.abs(two_step.toarray() - one_step.toarray()).max() < 1e-10


def test_evolution_refuses_large_systems(settings):
    settings.SPINLAB_DENSE_CUTOFF = 8
    g, space, phi, H = _chain(4)
    with pytest.raises(ResourceError):
        evolve_observable(H, _sigma3(space, 0), 1.0)


def test_commutator_growth_at_time_zero():
    g, space, phi, H = _chain(4)
    B = _sigma3(space, 2)
    assert abs(commutator_growth(H, B, 2, 0.0, space) - 2) < 1e-12
    assert commutator_growth(H, B, 0, 0.0, space) == 0
    assert commutator_growth(H, B, 0, 1.0, space) > 0


def test_commutator_growth_with_non_hermitian_observable():
    space = SpinSpace.uniform(3)
    B = embed_at(space, [(0, spin_matrices("1/2").Splus)])
    # [σ³, S⁺] = 2S⁺ and ‖S⁺‖ = 1
    assert abs(commutator_growth(None, B, 0, 0.0, space) - 2) < 1e-12
    assert commutator_growth(None, B, 1, 0.0, space) == 0


def test_bound_rhs_at_time_zero():
    g, space, phi, H = _chain(6)
    bdata = BData((2,), 1.0)
    assert lr_bound_rhs(phi, 1.0, 5, bdata, 0.0, g) == 0
    assert lr_bound_rhs(phi, 1.0, 2, bdata, 0.0, g) == 2
    assert lr_corollary(1, 1.0, 1.0, 48 * math.e, 1.0, 0.0, 3) == 0
    with pytest.raises(DomainError):
        lr_bound_rhs(phi, 0.0, 2, bdata, 0.1, g)


def test_corollary_arithmetic():
    value = lr_corollary(1, 1.0, 1.0, 48 * math.e, 1.0, 0.01, 3)
    assert value == pytest.approx(2 * (math.exp(0.96 * math.e) - 1) * math.exp(-3), rel=1e-14)
    assert value == pytest.approx(1.254, abs=5e-3)
    assert multi_site_bound(2, 2, 1.0, [0.5, 0.25]) == 16 * 0.75


@pytest.mark.parametrize("L,spin,lam", [(8, "1/2", 0.5), (8, "1/2", 1.0), (5, 1, 1.0)])
def test_commutator_growth_stays_under_the_bound(L, spin, lam):
    g, space, phi, H = _chain(L, spin)
    y = L // 2
    B = embed_at(space, [(y, spin_matrices(spin).S3)], hermitian=True)
    grid = lightcone_grid(H, phi, g, B, (y,), [0.0, 0.01, 0.05, 0.2, 1.0, 2.0], lam)
    assert grid.holds
    assert grid.measured.shape == (L, 6)
    assert np.all(np.isnan(grid.corollary[y]))
    far = L - 1
    assert grid.measured[far, 0] == 0
    assert grid.measured[far, 1] < grid.measured[y + 1, 1]
    assert len(list(grid.rows())) == L * 6


def test_lightcone_fitted_rate_is_reported():
    g, space, phi, H = _chain(8)
    grid = lightcone_grid(H, phi, g, _sigma3(space, 0), (0,), [0.5], 1.0)
    assert grid.fitted_rates[0.5] > 0


def test_clustering_mu_examples():
    assert clustering_mu(1, 1, 48 * math.e) == pytest.approx(1 / (192 * math.e + 1), rel=1e-14)
    assert clustering_mu(1, 1, 48 * math.e) == pytest.approx(1.9124e-3, rel=1e-4)
    assert clustering_mu(2, 1, 10) == pytest.approx(2 / 42, rel=1e-15)
    assert clustering_mu(1e12, 0.7, 5) == pytest.approx(0.7, rel=1e-9)
    with pytest.raises(DomainError):
        clustering_mu(0, 1, 1)
    mu = clustering_mu(0.5, 1, 10)
    assert validity_ceiling(mu, 0.5, 2) == pytest.approx(4 * mu / 0.5)
    assert decay_shape(mu, 0.5, 2, 0) == pytest.approx(math.exp(-2 * mu))


def test_ground_correlation_needs_unique_ground_state():
    space = SpinSpace.uniform(4, 1)
    H = assemble(aklt(4), space)
    S3 = embed_at(space, [(0, spin_matrices(1).S3)], hermitian=True)
    with pytest.raises(DegenerateSpectrumError):
        ground_correlation(H, S3, S3, 0.0)


def test_ground_correlation_at_zero_and_large_b():
    g, space, phi, H = _aklt_ring(6)
    S = spin_matrices(1)
    A = embed_at(space, [(0, S.S3)], hermitian=True)
    B = embed_at(space, [(2, S.S3)], hermitian=True)
    corr = GroundCorrelator(H)
    omega = corr.omega
    truncated = np.vdot(omega, A @ (B @ omega)) - np.vdot(omega, A @ omega) * np.vdot(omega, B @ omega)
    assert abs(corr.correlation(A, B, 0.0) - truncated) < 1e-12
    assert abs(corr.correlation(A, A, 0.0).imag) < 1e-10
    for b in (5.0, 10.0, 20.0):
        assert abs(corr.correlation(A, B, b)) <= large_b_bound(1.0, 1.0, corr.gap, b) + 1e-14
    with pytest.raises(DomainError):
        corr.correlation(A, B, -1.0)


def test_sector_assisted_correlation_decays_on_aklt_ring():
    g, space, phi, H = _aklt_ring(8)
    S3 = spin_matrices(1).S3
    corr = GroundCorrelator(H, sector=magnetization_sector(space, 0))
    A = embed_at(space, [(0, S3)], hermitian=True)
    values = [abs(corr.correlation(A, embed_at(space, [(r, S3)], hermitian=True), 0.0)) for r in range(1, 5)]
    assert values[-1] > 1e-6
    assert values == sorted(values, reverse=True)


def test_krylov_propagator_matches_spectral(settings):
    g, space, phi, H = _aklt_ring(6)
    S3 = spin_matrices(1).S3
    A = embed_at(space, [(0, S3)], hermitian=True)
    B = embed_at(space, [(1, S3)], hermitian=True)
    dense = GroundCorrelator(H).correlation(A, B, 0.5)
    settings.SPINLAB_DENSE_CUTOFF = 100
    krylov = GroundCorrelator(H)
    assert krylov.vectors is None
    assert abs(krylov.correlation(A, B, 0.5) - dense) < 1e-8


def test_clustering_report_on_aklt_ring():
    g, space, phi, H = _aklt_ring(6)
    S3 = spin_matrices(1).S3
    observable = lambda x: embed_at(space, [(x, S3)], hermitian=True)  # noqa: E731
    report = clustering_report(H, phi, g, observable, 1.0, b_points=3)
    assert report.holds
    assert report.gamma > 0.1
    assert 0 < report.mu < report.gamma
    corr = GroundCorrelator(H)
    for x, y, d, b, value, bound in report.rows:
        assert 0 <= report.gamma * b <= 2 * report.mu * d + 1e-15
        if b == 0:
            assert value == pytest.approx(abs(corr.correlation(observable(x), observable(y), 0.0)), abs=1e-12)
    assert report.zero_b_deviation < 1e-10
    assert report.trivial_bound_holds
    assert len(list(report.table())) == len(report.rows)


def test_truncated_correlation_matches_centred_correlation_at_zero_b():
    g, space, phi, H = _aklt_ring(6)
    corr = GroundCorrelator(H)
    A = embed_at(space, [(0, spin_matrices(1).S3)], hermitian=True)
    B = embed_at(space, [(2, spin_matrices(1).Splus @ spin_matrices(1).Sminus)], hermitian=True)
    assert abs(corr.truncated(A, B) - corr.correlation(A, B, 0.0)) < 1e-12


def test_clustering_report_rejects_gapless_ferromagnet():
    g, space, phi, H = _chain(4)
    with pytest.raises(DegenerateSpectrumError):
        clustering_report(H, phi, g, lambda x: _sigma3(space, x), 1.0)
