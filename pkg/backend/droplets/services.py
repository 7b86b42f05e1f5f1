"""Droplet spectroscopy of the ferromagnetic XXZ chain.

Sector n holds n overturned spins. On the ring its lowest level E_L(n) is the
bottom of the droplet band; on the open SU_q(2)-symmetric chain the matching
quantity is the lowest level with total spin S_max − n. Both tend to the
closed form E(n) as L grows.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence

import numpy as np
import scipy.linalg as sla

from hamiltonians.services import OPEN_WITH_FIELD, PERIODIC, XxzParams, assemble, xxz, xxz_params
from hilbert.services import (
    MatrixLike, SectorBasis, SpinSpace, magnetization_sector, particle_sector, restrict, translation_operator,
)
from spectral.services import SpectrumReport, sector_spectrum
from spinlab.conf import setting
from spinlab.errors import DomainError, IncompleteTableError, ResourceError
from spinlab.pool import pool_map
from symmetry.services import OrderingVerdict, classify_sector, classify_total_spin, foel_check, spin_grid, suq2_algebra

log = logging.getLogger(__name__)

# relative agreement required by width_verdict
WIDTH_REL_TOL = 0.15
# cos K values within this of each other share a momentum class
MOMENTUM_TOL = 1e-6

CSV_COLUMNS = ("q", "n", "L", "E_L_periodic", "E_open_suq", "E_formula", "abs_dev",
               "band_width_measured", "band_width_formula")


def _check_q(q: float) -> float:
    q = float(q)
    if not 0 < q < 1:
        raise DomainError(f"q must lie in (0, 1), got {q}")
    return q


def _check_n(n: int, least: int = 0) -> int:
    if int(n) != n or n < least:
        raise DomainError(f"droplet size must be an integer >= {least}, got {n}")
    return int(n)


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------

def droplet_energy_formula(q: float, n: int) -> float:
    """E(n) = (1 − q²)(1 − qⁿ) / ((1 + q²)(1 + qⁿ))."""
    q, n = _check_q(q), _check_n(n)
    return (1 - q * q) * (1 - q ** n) / ((1 + q * q) * (1 + q ** n))


def bandwidth_formula(q: float, n: int) -> float:
    """Printed band width 4qⁿ(1 − q²)/(1 − q^{2n}); singular at n = 0."""
    q, n = _check_q(q), _check_n(n, least=1)
    return 4 * q ** n * (1 - q * q) / (1 - q ** (2 * n))


def printed_over_delta(q: float, n: int) -> float:
    """The printed width divided by Δ, i.e. times 1/Δ = 2q/(1 + q²)."""
    return bandwidth_formula(q, n) * 2 * q / (1 + q * q)


def one_magnon_levels(L: int, Delta: float, J: float = 1.0) -> np.ndarray:
    """J(1 − cos(2πj/L)/Δ) for j = 0..L−1, ascending."""
    if L < 1:
        raise DomainError(f"L must be positive, got {L}")
    k = 2 * np.pi * np.arange(L) / L
    return np.sort(J * (1 - np.cos(k) / Delta))


def convergence_tolerance(q: float, L: int) -> float:
    return max(1e-3, 5 * _check_q(q) ** L)


def width_verdict(measured: float, q: float, n: int, rel: float = WIDTH_REL_TOL) -> str:
    """Which candidate width the measurement matches: printed, printed_over_delta, both or none."""
    printed = abs(measured - bandwidth_formula(q, n)) <= rel * bandwidth_formula(q, n)
    scaled = abs(measured - printed_over_delta(q, n)) <= rel * printed_over_delta(q, n)
    if printed and scaled:
        return "both"
    if printed:
        return "printed"
    if scaled:
        return "printed_over_delta"
    return "none"


# ---------------------------------------------------------------------------
# Sector energies
# ---------------------------------------------------------------------------

def _check_sector_size(L: int, n: int) -> int:
    if not 0 <= n <= L:
        raise DomainError(f"{n} overturned spins do not fit on {L} sites")
    dim = math.comb(L, n)
    cutoff = setting("SPINLAB_SECTOR_CUTOFF")
    if dim > cutoff:
        raise ResourceError(f"droplet sector n={n} on L={L} is too large", dim=dim, cutoff=cutoff)
    return dim


def open_sector_label(L: int, n: int) -> Fraction:
    S = Fraction(L, 2) - n
    if S < 0:
        raise DomainError(f"open chain of length {L} has no total spin S_max − {n}")
    return S


def sector_ground_energy(p: XxzParams, n: int) -> float:
    """E_L(n) on the ring, or E(H_L, S_max − n) on the open SU_q chain."""
    n = _check_n(n)
    _check_sector_size(p.L, n)
    space = SpinSpace.uniform(p.L)
    H = assemble(xxz(p), space)
    if p.periodic:
        return sector_spectrum(H, particle_sector(space, n), k=1).ground_energy
    S = open_sector_label(p.L, n)
    sector = magnetization_sector(space, S)
    cutoff = setting("SPINLAB_DENSE_CUTOFF")
    if sector.dim > cutoff:
        raise ResourceError("Casimir classification needs a dense sector block", dim=sector.dim, cutoff=cutoff)
    res = classify_sector(H, suq2_algebra(p.L, p.q), sector, spin_grid(space))
    mine = [E for E, lab in zip(res.energies, res.labels) if lab == S]
    if not mine:
        raise IncompleteTableError("no level carries the droplet spin label", missing=[str(S)])
    return float(min(mine))


def ring_sector(p: XxzParams, n: int, want_vectors: bool = True):
    """(H, sector, full sector spectrum) on the ring."""
    if not p.periodic:
        raise DomainError("the droplet band is measured on the periodic chain")
    _check_sector_size(p.L, n)
    space = SpinSpace.uniform(p.L)
    H = assemble(xxz(p), space)
    sector = particle_sector(space, n)
    return H, sector, sector_spectrum(H, sector, want_vectors=want_vectors)


def sector_translation(sector: SectorBasis) -> np.ndarray:
    return restrict(translation_operator(sector.parent), sector).toarray()


# ---------------------------------------------------------------------------
# Band extraction
# ---------------------------------------------------------------------------

@dataclass
class BandReport:
    band_min: float
    band_max: float
    width: float
    isolation: float
    levels: np.ndarray
    method: str = "lowest_L"
    momenta: List[float] = field(default_factory=list)


def _groups(values: np.ndarray, tol: float) -> List[slice]:
    out, start = [], 0
    for k in range(1, values.size + 1):
        if k == values.size or values[k] - values[k - 1] > tol:
            out.append(slice(start, k))
            start = k
    return out


def _momentum_band(report: SpectrumReport, translation: MatrixLike) -> BandReport:
    """Lowest level in each |K| class; (T + T†)/2 is diagonalized inside every degenerate energy group."""
    if report.eigenvectors is None:
        raise DomainError("momentum-resolved band extraction needs eigenvectors")
    T = np.asarray(translation.toarray() if hasattr(translation, "toarray") else translation)
    C = (T + T.conj().T) / 2
    values, vectors = report.eigenvalues, report.eigenvectors
    pairs = []
    for block in _groups(values, setting("SPINLAB_DEGENERACY_TOL")):
        W = vectors[:, block]
        K = W.conj().T @ C @ W
        E = float(values[block].mean())
        pairs += [(float(np.clip(c, -1.0, 1.0)), E) for c in sla.eigvalsh((K + K.conj().T) / 2)]
    # one class per distinct cos K, highest cos K (K = 0) first
    classes: List[List[float]] = []
    for c, E in sorted(pairs, reverse=True):
        if classes and classes[-1][0] - c <= MOMENTUM_TOL:
            classes[-1][1] = min(classes[-1][1], E)
        else:
            classes.append([c, E])
    band = np.array([E for _, E in classes])
    momenta = [float(np.arccos(c)) for c, _ in classes]
    above = values[values > band.max() + setting("SPINLAB_DEGENERACY_TOL")]
    isolation = float(above.min() - band.max()) if above.size else math.inf
    return BandReport(float(band.min()), float(band.max()), float(band.max() - band.min()), isolation,
                      band, "momentum", momenta)


def band_extract(report: SpectrumReport, L: int, sector_dim: Optional[int] = None,
                 translation: Optional[MatrixLike] = None) -> BandReport:
    """Droplet band of a ring sector spectrum.

    Without `translation` the band is the lowest L levels and `isolation`
    is the distance to level L+1; a report covering the whole sector
    (`sector_dim` levels) may have exactly L levels. With the
    sector-restricted translation the band is the lowest level of every
    momentum class instead.
    """
    values = np.sort(np.asarray(report.eigenvalues, dtype=float))
    if translation is not None:
        return _momentum_band(report, translation)
    whole = sector_dim is not None and values.size == sector_dim
    if values.size < L or (values.size == L and not whole):
        raise IncompleteTableError(f"band extraction needs {L + 1} levels, got {values.size}",
                                   missing=L + 1 - values.size)
    band = values[:L]
    isolation = float(values[L] - band[-1]) if values.size > L else math.inf
    return BandReport(float(band[0]), float(band[-1]), float(band[-1] - band[0]), isolation, band)


# ---------------------------------------------------------------------------
# Convergence in L
# ---------------------------------------------------------------------------

@dataclass
class DropletRow:
    L: int
    E_periodic: float
    E_open: float
    dev_periodic: float
    dev_open: float
    band_width: float = math.nan
    band_isolation: float = math.nan


@dataclass
class DropletTable:
    q: float
    n: int
    formula_E: float
    formula_width: float
    rows: List[DropletRow] = field(default_factory=list)

    def max_deviation(self) -> float:
        """Larger of the two deviations at the largest L; an empty column is skipped."""
        if not self.rows:
            return math.nan
        last = self.rows[-1]
        devs = [d for d in (last.dev_periodic, last.dev_open) if not math.isnan(d)]
        return max(devs) if devs else math.nan

    def deviations_monotone(self, column: str = "open", L_min: int = 0, tol: float = 1e-9) -> bool:
        attr = {"open": "dev_open", "periodic": "dev_periodic"}[column]
        devs = [getattr(r, attr) for r in self.rows if r.L >= L_min and not math.isnan(getattr(r, attr))]
        return all(b <= a + tol for a, b in zip(devs, devs[1:]))

    def csv_rows(self):
        for r in self.rows:
            yield (self.q, self.n, r.L, r.E_periodic, r.E_open, self.formula_E, r.dev_periodic,
                   r.band_width, self.formula_width)


def _table_row(q: float, n: int, L: int, E_formula: float) -> DropletRow:
    nan = math.nan
    E_per, width, isolation = nan, nan, nan
    if L >= 3:
        p = xxz_params(L, q=q, boundary=PERIODIC)
        if n >= 1 and math.comb(L, n) <= setting("SPINLAB_DENSE_CUTOFF"):
            _, sector, rep = ring_sector(p, n)
            E_per = rep.ground_energy
            band = band_extract(rep, L, translation=sector_translation(sector))
            width, isolation = band.width, band.isolation
        else:
            E_per = sector_ground_energy(p, n)
    E_open = nan
    if Fraction(L, 2) >= n:
        E_open = sector_ground_energy(xxz_params(L, q=q, boundary=OPEN_WITH_FIELD), n)
    return DropletRow(L, E_per, E_open, abs(E_per - E_formula), abs(E_open - E_formula), width, isolation)


def convergence_table(q: float, n: int, Ls: Sequence[int], threads: Optional[int] = None) -> DropletTable:
    """E_L(n) on the ring and E(H_L, S_max − n) on the open chain against E(n), one row per L."""
    q, n = _check_q(q), _check_n(n)
    Ls = sorted({int(L) for L in Ls})
    if not Ls or Ls[0] < 2:
        raise DomainError(f"chain lengths must be >= 2, got {Ls}")
    for L in Ls:
        _check_sector_size(L, n)
    E_formula = droplet_energy_formula(q, n)
    width = bandwidth_formula(q, n) if n else math.nan
    rows = pool_map(lambda L: _table_row(q, n, L, E_formula), Ls, threads)
    table = DropletTable(q, n, E_formula, width, rows)
    log.info("droplet convergence table", extra={"q": q, "n": n, "Ls": Ls,
                                                 "max_deviation": table.max_deviation()})
    return table


def suq_foel_check(p: XxzParams, threads: Optional[int] = None) -> OrderingVerdict:
    """Ferromagnetic ordering of energy levels for the open SU_q(2) chain."""
    if p.periodic:
        raise DomainError("SU_q(2) symmetry needs the open chain with boundary fields")
    space = SpinSpace.uniform(p.L)
    levels = classify_total_spin(assemble(xxz(p), space), suq2_algebra(p.L, p.q), threads=threads)
    return foel_check(levels)
