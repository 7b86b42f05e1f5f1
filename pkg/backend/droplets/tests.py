import math

import numpy as np
import pytest

from hamiltonians.services import PERIODIC, Interaction, Term, assemble, xxz, xxz_params
from hilbert.services import SpinSpace, particle_sector
from spectral.services import sector_spectrum
from spinlab.errors import DomainError, IncompleteTableError, ResourceError
from .services import (
    CSV_COLUMNS, DropletRow, DropletTable, band_extract, bandwidth_formula, convergence_table, convergence_tolerance, droplet_energy_formula,
    one_magnon_levels, printed_over_delta, ring_sector, sector_ground_energy, sector_translation, suq_foel_check,
    width_verdict,
)


def _ring(L, q=0.5):
    return xxz_params(L, q=q, boundary=PERIODIC)


def _open(L, q=0.5):
    return xxz_params(L, q=q)


def test_energy_formula():
    assert droplet_energy_formula(0.5, 1) == pytest.approx(0.2, rel=1e-15)
    assert droplet_energy_formula(0.5, 2) == pytest.approx(0.36, rel=1e-15)
    assert droplet_energy_formula(0.5, 0) == 0
    assert droplet_energy_formula(0.5, 200) == pytest.approx(0.6, rel=1e-15)
    with pytest.raises(DomainError):
        droplet_energy_formula(1.0, 1)
    with pytest.raises(DomainError):
        droplet_energy_formula(0.5, -1)


@pytest.mark.parametrize("q", [0.1, 0.5, 0.9])
def test_energy_formula_is_increasing_and_bounded(q):
    values = [droplet_energy_formula(q, n) for n in range(40)]
    assert all(b >= a for a, b in zip(values, values[1:]))
    assert values[0] < values[1] < values[2] < values[3]
    assert max(values) <= (1 - q * q) / (1 + q * q)


def test_width_formulas():
    assert bandwidth_formula(0.5, 2) == pytest.approx(0.8, rel=1e-15)
    for q in (0.2, 0.5, 0.7):
        assert bandwidth_formula(q, 1) == pytest.approx(4 * q, rel=1e-14)
    assert bandwidth_formula(0.5, 60) < 1e-15
    assert printed_over_delta(0.5, 2) == pytest.approx(0.64, rel=1e-14)
    with pytest.raises(DomainError):
        bandwidth_formula(0.5, 0)


def test_width_verdict():
    assert width_verdict(0.64, 0.5, 2) == "printed_over_delta"
    assert width_verdict(0.8, 0.5, 2) == "printed"
    assert width_verdict(1.6, 0.5, 1) == "printed_over_delta"
    assert width_verdict(3.6, 0.9, 1) == "both"
    assert width_verdict(0.1, 0.5, 2) == "none"


def test_convergence_tolerance():
    assert convergence_tolerance(0.5, 4) == pytest.approx(5 / 16)
    assert convergence_tolerance(0.5, 20) == 1e-3


@pytest.mark.parametrize("L", range(4, 10))
def test_one_magnon_sector_matches_dispersion(L):
    p = _ring(L)
    _, _, rep = ring_sector(p, 1, want_vectors=False)
    assert np.abs(rep.eigenvalues - one_magnon_levels(L, p.Delta)).max() < 1e-10


def test_vacuum_energy_is_zero():
    assert abs(sector_ground_energy(_ring(6), 0)) < 1e-14
    assert abs(sector_ground_energy(_open(6), 0)) < 1e-14


@pytest.mark.parametrize("L", [4, 6, 9])
def test_single_droplet_on_ring_is_exact(L):
    assert sector_ground_energy(_ring(L), 1) == pytest.approx(0.2, abs=1e-12)


@pytest.mark.parametrize("L", [2, 3, 5, 8])
def test_single_droplet_on_open_chain(L):
    p = _open(L)
    assert sector_ground_energy(p, 1) == pytest.approx(1 - math.cos(math.pi / L) / p.Delta, abs=1e-10)


def test_sector_guards(settings):
    with pytest.raises(DomainError):
        sector_ground_energy(_open(4), 3)
    with pytest.raises(DomainError):
        sector_ground_energy(_ring(4), 5)
    with pytest.raises(DomainError):
        ring_sector(_open(4), 1)
    settings.SPINLAB_SECTOR_CUTOFF = 10
    with pytest.raises(ResourceError) as exc:
        sector_ground_energy(_ring(8), 2)
    assert exc.value.dim == 28


def test_periodic_spectrum_is_translation_invariant():
    p = _ring(8)
    phi = xxz(p)
    shifted = Interaction(tuple(Term(tuple((x + 3) % 8 for x in t.support), t.matrix) for t in phi))
    space = SpinSpace.uniform(8)
    sector = particle_sector(space, 2)
    a = sector_spectrum(assemble(phi, space), sector).eigenvalues
    b = sector_spectrum(assemble(shifted, space), sector).eigenvalues
    assert np.abs(a - b).max() < 1e-10


def test_one_magnon_band():
    p = _ring(8)
    _, sector, rep = ring_sector(p, 1)
    band = band_extract(rep, 8, sector_dim=sector.dim)
    assert band.width == pytest.approx(2 / p.Delta, abs=1e-12)
    assert band.width == pytest.approx(1.6, abs=1e-12)
    assert band.isolation == math.inf
    with pytest.raises(IncompleteTableError):
        band_extract(rep, 8)
    by_momentum = band_extract(rep, 8, translation=sector_translation(sector))
    assert by_momentum.method == "momentum"
    assert len(by_momentum.momenta) == 5
    assert by_momentum.width == pytest.approx(1.6, abs=1e-10)
    assert by_momentum.band_min == pytest.approx(0.2, abs=1e-12)


def test_lowest_levels_band_reports_isolation():
    _, _, rep = ring_sector(_ring(8), 2, want_vectors=False)
    band = band_extract(rep, 8)
    assert band.method == "lowest_L"
    assert band.levels.size == 8
    assert band.isolation >= 0
    assert band.band_min == rep.ground_energy


def test_two_droplet_band_on_ring_of_fourteen():
    p = _ring(14)
    _, sector, rep = ring_sector(p, 2)
    assert abs(rep.ground_energy - 0.36) < 1e-2
    band = band_extract(rep, 14, translation=sector_translation(sector))
    assert band.band_min == pytest.approx(sector_ground_energy(p, 2), abs=1e-10)
    assert len(band.momenta) == 8
    assert abs(band.width - 0.64) <= 0.15 * 0.64
    assert width_verdict(band.width, 0.5, 2) == "printed_over_delta"


@pytest.mark.parametrize("q", [0.3, 0.5, 0.8])
@pytest.mark.parametrize("L", range(2, 9))
def test_open_suq_chain_orders_levels(q, L):
    verdict = suq_foel_check(_open(L, q))
    assert verdict.holds, verdict.witness


@pytest.mark.slow
@pytest.mark.parametrize("q", [0.3, 0.5, 0.8])
def test_open_suq_chain_orders_levels_length_ten(q):
    assert suq_foel_check(_open(10, q)).holds


def test_foel_check_needs_open_chain():
    with pytest.raises(DomainError):
        suq_foel_check(_ring(4))


def test_vacuum_table_is_zero():
    table = convergence_table(0.5, 0, [4, 6])
    assert [r.L for r in table.rows] == [4, 6]
    for r in table.rows:
        assert abs(r.E_periodic) < 1e-14 and abs(r.E_open) < 1e-14
    assert math.isnan(table.formula_width)


def test_two_droplet_convergence_table():
    table = convergence_table(0.5, 2, [8, 10, 12, 14])
    assert table.formula_E == pytest.approx(0.36)
    assert table.rows[-1].dev_periodic < 1e-2
    assert table.deviations_monotone("open")
    for r in table.rows:
        assert r.band_width > 0
    rows = list(table.csv_rows())
    assert len(rows) == 4 and all(len(row) == len(CSV_COLUMNS) for row in rows)
    assert rows[-1][:3] == (0.5, 2, 14)


def test_max_deviation_skips_empty_columns():
    nan = math.nan
    table = DropletTable(0.5, 3, 0.0, 0.0, [DropletRow(5, 0.1, nan, 0.02, nan)])
    assert table.max_deviation() == 0.02
    table.rows = [DropletRow(5, nan, 0.1, nan, 0.03)]
    assert table.max_deviation() == 0.03
    table.rows = [DropletRow(2, nan, nan, nan, nan)]
    assert math.isnan(table.max_deviation())
    assert math.isnan(DropletTable(0.5, 1, 0.0, 0.0).max_deviation())


def test_table_rejects_short_chains():
    with pytest.raises(DomainError):
        convergence_table(0.5, 1, [1, 4])


@pytest.mark.slow
@pytest.mark.parametrize("n", [1, 2, 3])
def test_ring_column_reaches_the_limit(n):
    table = convergence_table(0.5, n, [12, 14, 16], threads=2)
    assert table.rows[-1].dev_periodic < 1e-2
