import logging
import math

import numpy as np
import pytest

from hamiltonians.services import aklt, assemble, custom, translated
from hilbert.services import SpinSpace, spin_matrices
from spectral.services import full_spectrum, lowest_levels, spectral_gap
from spinlab.errors import DegenerateSpectrumError, DomainError
from .services import (
    bounded_beta, frustration_free_check, gap_sweep, gap_trend, relative_bound_alpha, spectral_gap_or_zero,
)


def _zz(L):
    S3 = spin_matrices(1).S3
    return translated(np.kron(S3, S3), L, periodic=True, site_dim=3)


def _ring(L):
    return aklt(L, periodic=True)


def test_on_site_projectors_satisfy_a0():
    phi = custom([((x,), np.diag([0.0, 1.0])) for x in range(4)])
    report = frustration_free_check(phi, SpinSpace.uniform(4), V0_size=1)
    assert report.nonnegative
    assert report.annihilation < 1e-14
    assert report.c == pytest.approx(1.0, abs=1e-12)
    assert report.a0_holds


def test_aklt_ring_is_frustration_free_but_gap_is_small(caplog):
    space = SpinSpace.uniform(6, 1)
    with caplog.at_level(logging.WARNING, logger="perturbation.services"):
        report = frustration_free_check(_ring(6), space, V0_size=2)
    assert report.nonnegative and report.degeneracy == 1
    assert report.annihilation < 1e-8
    assert 0 < report.c < 2
    assert not report.a0_holds
    assert any(r.levelno == logging.WARNING for r in caplog.records)
    gap = spectral_gap(full_spectrum(assemble(_ring(6), space))).gap
    assert abs(report.c - gap) < 1e-9


def test_negative_eigenvalue_is_reported():
    phi = custom([((0,), np.diag([-1.0, 0.0]))])
    report = frustration_free_check(phi, SpinSpace.uniform(1), V0_size=1)
    assert not report.nonnegative
    assert report.min_eigenvalue == pytest.approx(-1.0)


def test_degenerate_zero_energy_states():
    space = SpinSpace.uniform(4, 1)
    with pytest.raises(DegenerateSpectrumError):
        frustration_free_check(aklt(4), space, V0_size=2)
    report = frustration_free_check(aklt(4), space, V0_size=2, require_unique=False)
    assert report.degeneracy == 4


def test_relative_bound_examples():
    h = np.diag([0.0, 1.0, 2.0])
    assert relative_bound_alpha(h, h) == pytest.approx(1.0)
    assert relative_bound_alpha(h / 2, h) == pytest.approx(0.5)
    v = np.array([1.0, 0.0, 0.0])
    assert relative_bound_alpha(np.outer(v, v), h) == math.inf
    mixed = np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]], dtype=float)
    assert relative_bound_alpha(mixed, h) == math.inf
    off = np.array([[0, 0, 0], [0, 0, 1], [0, 1, 0]], dtype=float)
    # h^{-1/2} off h^{-1/2} on the range has eigenvalues ±1/√2
    assert relative_bound_alpha(off, h) == pytest.approx(1 / math.sqrt(2))
    with pytest.raises(DomainError):
        relative_bound_alpha(np.array([[0, 1], [0, 0]]), np.eye(2))
    with pytest.raises(DomainError):
        relative_bound_alpha(np.eye(2), -np.eye(2))


def test_bounded_beta():
    assert bounded_beta(_zz(4)) == pytest.approx(1.0)
    assert bounded_beta(custom([])) == 0


def test_gap_sweep_around_aklt():
    lambdas = np.round(np.arange(-0.1, 0.1001, 0.02), 10)
    sweep = gap_sweep(_ring, _zz, lambdas, [6])
    base = spectral_gap(lowest_levels(assemble(_ring(6), SpinSpace.uniform(6, 1)), 4)).gap
    assert sweep.gaps[(6, 0.0)] == base
    assert all(g > 0 for g in sweep.gaps.values())
    assert all(sweep.weyl_ok.values())
    assert sweep.continuity_ok()
    assert 0.0 in sweep.stable_range()
    assert all(d == 1 for d in sweep.ground_degeneracies.values())
    assert len(list(sweep.rows())) == len(sweep.couplings)


@pytest.mark.slow
def test_gap_sweep_periodic_length_eight():
    sweep = gap_sweep(_ring, _zz, np.round(np.arange(-0.1, 0.1001, 0.02), 10), [8])
    assert all(g > 0 for g in sweep.gaps.values())


def test_gap_trend_rows():
    rows = gap_trend(_ring, [5, 6])
    assert [r.L for r in rows] == [5, 6]
    for r in rows:
        assert r.degeneracy == 1 and r.gap > 0
        assert abs(r.ground_energy) < 1e-10


def test_gap_of_fully_degenerate_levels_is_zero():
    assert spectral_gap_or_zero(np.zeros(3), 1e-8) == 0.0
