"""End-to-end checks that cross app boundaries."""
import math
import time

import numpy as np
import pytest
from django.core.management import call_command

from droplets.services import band_extract, ring_sector, sector_translation
from dynamics.services import clustering_report, lightcone_grid
from hamiltonians.services import PERIODIC, aklt, assemble, heisenberg, lambda_norm, xxz_params
from hilbert.services import SpinSpace, embed_at, magnetization_sector, spin_matrices
from lattice.services import path_graph, ring_graph
from spectral.services import full_spectrum, spectral_gap
from ssep.services import ssep_gaps, xxx_conjugacy_check
from symmetry.services import classify_total_spin, foel_check, lieb_mattis_side_check, su2_algebra


def test_spin_one_chain_level_ordering():
    g = path_graph(5, spin=1)
    space = SpinSpace.for_graph(g)
    t0 = time.perf_counter()
    H = assemble(heisenberg(g), space)
    levels = classify_total_spin(H, su2_algebra(space))
    spectrum = full_spectrum(H)
    assert time.perf_counter() - t0 < 10
    assert spectrum.n_levels == 243
    verdict = foel_check(levels)
    assert verdict.holds and verdict.margin > 1e-6
    assert abs(spectral_gap(spectrum).gap - (levels.entries[4] - levels.entries[5])) < 1e-9
    assert lieb_mattis_side_check(levels, 1).holds


def test_two_site_levels():
    g = path_graph(2)
    space = SpinSpace.for_graph(g)
    H = assemble(heisenberg(g), space)
    assert np.abs(full_spectrum(H).eigenvalues - [-0.25, -0.25, -0.25, 0.75]).max() < 1e-12
    levels = classify_total_spin(H, su2_algebra(space))
    assert abs(levels.entries[1] + 0.25) < 1e-12
    assert abs(levels.entries[0] - 0.75) < 1e-12


@pytest.mark.parametrize("L", range(3, 8))
def test_exclusion_gap_is_independent_of_particle_number_on_paths(L):
    rng = np.random.default_rng(L)
    g = path_graph(L).with_weights(rng.uniform(0.2, 2.0, L - 1))
    assert ssep_gaps(g).aldous_margin < 1e-9


@pytest.mark.parametrize("g", [path_graph(L) for L in (2, 3, 4, 5)] + [ring_graph(L) for L in (3, 4, 5)],
                         ids=lambda g: f"V{g.n_vertices}E{len(g.edges)}")
def test_exclusion_process_is_conjugate_to_the_exchange_chain(g):
    assert xxx_conjugacy_check(g).max_deviation < 1e-10


@pytest.mark.parametrize("q", [0.3, 0.5, 0.8])
def test_one_magnon_band_width(q):
    p = xxz_params(8, q=q, boundary=PERIODIC)
    _, sector, rep = ring_sector(p, 1)
    band = band_extract(rep, 8, translation=sector_translation(sector))
    assert abs(band.width - 4 * q / (1 + q * q)) < 1e-6


def test_commutator_growth_on_spin_half_chain():
    g = path_graph(8)
    space = SpinSpace.for_graph(g)
    phi = heisenberg(g)
    assert abs(lambda_norm(phi, 1.0, g) - 48 * math.e) < 1e-9
    y = 4
    B = embed_at(space, [(y, 2 * spin_matrices("1/2").S3)], hermitian=True)
    times = [round(0.05 * k, 10) for k in range(21)]
    grid = lightcone_grid(assemble(phi, space), phi, g, B, (y,), times, 1.0)
    assert grid.holds
    for i, x in enumerate(grid.sites):
        if x != y:
            assert grid.measured[i, 0] == 0


@pytest.mark.slow
def test_aklt_ring_of_ten_clusters():
    g = ring_graph(10, spin=1)
    space = SpinSpace.for_graph(g)
    phi = aklt(10, periodic=True)
    S3 = spin_matrices(1).S3
    report = clustering_report(
        assemble(phi, space), phi, g, lambda x: embed_at(space, [(x, S3)], hermitian=True), 1.0,
        b_points=3, sector=magnetization_sector(space, 0), pairs=[(0, r) for r in range(1, 6)],
    )
    assert report.gamma > 0.1
    assert report.holds


@pytest.mark.django_db
def test_command_output_does_not_depend_on_thread_count(tmp_path):
    paths = []
    for threads in (1, 4):
        out = tmp_path / f"spectrum_{threads}.csv"
        call_command("spectrum", L=6, threads=threads, out=str(out), no_record=True)
        paths.append(out)
    assert paths[0].read_bytes() == paths[1].read_bytes()
