"""Total-spin symmetry: SU(2) and SU_q(2) generators, Casimir classification
of eigenstates, the E(H,S) table and the ordering verdicts built on it.

Both algebras are handled through the same identity, valid sector by sector:

    C|_M = S⁺|_{M−1→M} · S⁻|_{M→M−1} + f(M)

with f(M) = M² − M for SU(2) and f(M) = (q^{1−2M} + q^{2M−1}) / (q^{−1} − q)²
for SU_q(2). Casimir blocks are therefore built from sector-sized pieces and
never need the full-space product S⁺S⁻.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from hamiltonians.services import XxzParams, assemble, heisenberg, scale
from hilbert.services import (
    MatrixLike, SectorBasis, SparseOperator, SpinSpace, as_operator, embed_at, magnetization_sector,
    restrict, sector_dimensions, spin_matrices, total_operator,
)
from lattice.services import SpinGraph, bipartition, check_bipartition
from spectral.services import check_sector_invariance
from spinlab.conf import setting
from spinlab.errors import ClassificationError, DomainError, EmptySectorError, IncompleteTableError, ResourceError
from spinlab.pool import pool_map

log = logging.getLogger(__name__)

# strictness margin for the ordering verdicts
ORDER_TOL = 1e-9
# nearest Casimir value must beat the runner-up by this factor
LABEL_MARGIN = 1e3


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------

@dataclass
class Su2Totals:
    S1: SparseOperator
    S2: SparseOperator
    S3: SparseOperator
    C: SparseOperator


def su2_totals(space: SpinSpace) -> Su2Totals:
    S1, S2, S3 = (total_operator(space, w) for w in ("S1", "S2", "S3"))
    C = SparseOperator((S1 @ S1 + S2 @ S2 + S3 @ S3).matrix, hermitian=True)
    return Su2Totals(S1, S2, S3, C)


@dataclass
class SuqGenerators:
    q: float
    S3: SparseOperator
    Splus: SparseOperator
    Sminus: SparseOperator
    T: SparseOperator
    C: SparseOperator


def _twist(q: float, power: int = 1) -> np.ndarray:
    # t = q^{2S³} in the descending-S³ basis
    return np.diag([q ** power, q ** -power]).astype(np.complex128)


def suq_raising(space: SpinSpace, q: float) -> SparseOperator:
    """S⁺ = Σ_x t_0 ⊗ … ⊗ t_{x−1} ⊗ S⁺_x ⊗ 1 ⊗ … ."""
    Sp = spin_matrices(Fraction(1, 2)).Splus
    t = _twist(q)
    acc = sp.csr_matrix((space.total_dim,) * 2, dtype=np.complex128)
    for x in range(space.n_sites):
        acc = acc + embed_at(space, [(y, t) for y in range(x)] + [(x, Sp)]).matrix
    return SparseOperator(acc)


def suq_lowering(space: SpinSpace, q: float) -> SparseOperator:
    """S⁻ = Σ_x 1 ⊗ … ⊗ S⁻_x ⊗ t⁻¹_{x+1} ⊗ … ⊗ t⁻¹_{L−1}."""
    Sm = spin_matrices(Fraction(1, 2)).Sminus
    tinv = _twist(q, -1)
    L = space.n_sites
    acc = sp.csr_matrix((space.total_dim,) * 2, dtype=np.complex128)
    for x in range(L):
        acc = acc + embed_at(space, [(x, Sm)] + [(y, tinv) for y in range(x + 1, L)]).matrix
    return SparseOperator(acc)


def _check_q(q: float) -> None:
    if not 0 < q < 1:
        raise DomainError(f"q must lie in (0, 1), got {q}")


def suq2_generators(p: XxzParams) -> SuqGenerators:
    """Quantum-group generators commuting with the open XXZ chain of `p`.

    The twist is t_x = q^{2S³_x}. Local states are ordered by descending S³
    (up spin first), so t = diag(q, q⁻¹); in an ascending basis the same operator
    reads diag(q⁻¹, q). With the boundary field −A(Δ)(S³_{L−1} − S³_0) this is
    the orientation for which [H, S^±] = 0.
    """
    _check_q(p.q)
    space = SpinSpace.uniform(p.L)
    q = p.q
    S3 = total_operator(space, "S3")
    Splus, Sminus = suq_raising(space, q), suq_lowering(space, q)
    diag_T = q ** space.twice_magnetization.astype(float)
    T = SparseOperator(sp.diags(diag_T))
    shift = (q / diag_T + diag_T / q) / (1 / q - q) ** 2
    C = SparseOperator((Splus @ Sminus).matrix + sp.diags(shift))
    return SuqGenerators(q, S3, Splus, Sminus, T, C)


# ---------------------------------------------------------------------------
# Algebras: sector-level Casimir data
# ---------------------------------------------------------------------------

def casimir_value(S, q: Optional[float] = None) -> float:
    """c(S) = S(S+1) for SU(2); (q^{−(2S+1)} + q^{2S+1}) / (q^{−1} − q)² for SU_q(2)."""
    S = float(S)
    if q is None:
        return S * (S + 1)
    return (q ** -(2 * S + 1) + q ** (2 * S + 1)) / (1 / q - q) ** 2


def casimir_shift(M, q: Optional[float] = None) -> float:
    M = float(M)
    if q is None:
        return M * M - M
    return (q ** (1 - 2 * M) + q ** (2 * M - 1)) / (1 / q - q) ** 2


@dataclass
class SpinAlgebra:
    """What classification needs from a symmetry: S^±, the Casimir shift f(M) and c(S)."""

    name: str
    space: SpinSpace
    raising: SparseOperator
    lowering: SparseOperator
    q: Optional[float] = None

    @property
    def hermitian(self) -> bool:
        return self.q is None

    def casimir_value(self, S) -> float:
        return casimir_value(S, self.q)

    def shift(self, M) -> float:
        return casimir_shift(M, self.q)

    def casimir_block(self, sector: SectorBasis) -> np.ndarray:
        M = sector.magnetization
        C = self.shift(M) * np.eye(sector.dim, dtype=np.complex128)
        try:
            below = magnetization_sector(self.space, M - 1)
        except EmptySectorError:
            return C
        down = restrict(self.lowering, sector, target=below)
        up = restrict(self.raising, below, target=sector)
        return C + (up @ down).toarray()


def su2_algebra(space: SpinSpace) -> SpinAlgebra:
    return SpinAlgebra("su2", space, total_operator(space, "Splus"), total_operator(space, "Sminus"))


def suq2_algebra(L: int, q: float) -> SpinAlgebra:
    _check_q(q)
    space = SpinSpace.uniform(L)
    return SpinAlgebra("suq2", space, suq_raising(space, q), suq_lowering(space, q), q=q)


# ---------------------------------------------------------------------------
# Spin grid
# ---------------------------------------------------------------------------

def multiplet_counts(space: SpinSpace) -> Dict[Fraction, int]:
    """Number of spin-S multiplets: dim(M=S) − dim(M=S+1), for every S ≥ 0 that occurs."""
    dims = sector_dimensions(space)
    out = {}
    for M, d in dims.items():
        if M < 0:
            continue
        count = d - dims.get(M + 1, 0)
        if count > 0:
            out[M] = count
    return out


def spin_grid(space: SpinSpace) -> List[Fraction]:
    """Total-spin values present in the space, ascending; S_min is read off the sector dimensions."""
    return sorted(multiplet_counts(space))


def suq2_casimir_values(L: int, q: float) -> List[Tuple[float, int]]:
    """(c(S), multiplicity) over the whole chain; each spin-S irrep contributes 2S+1 states."""
    _check_q(q)
    space = SpinSpace.uniform(L)
    return [(casimir_value(S, q), int(2 * S + 1) * n) for S, n in sorted(multiplet_counts(space).items())]


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------

@dataclass
class SectorClassification:
    magnetization: Fraction
    energies: np.ndarray
    labels: List[Fraction]
    residuals: np.ndarray


@dataclass
class SpinResolvedLevels:
    entries: Dict[Fraction, float]
    S_max: Fraction
    grid: List[Fraction] = field(default_factory=list)
    casimir_residuals: Dict[Fraction, float] = field(default_factory=dict)
    multiplets: Dict[Fraction, List[float]] = field(default_factory=dict)

    def __post_init__(self):
        self.entries = {Fraction(k): float(v) for k, v in self.entries.items()}
        self.S_max = Fraction(self.S_max)
        if not self.grid:
            self.grid = sorted(self.entries)
        self.grid = [Fraction(S) for S in self.grid]

    def counts(self) -> Dict[Fraction, int]:
        return {S: len(v) for S, v in self.multiplets.items()}

    def rows(self) -> List[Tuple[Fraction, float]]:
        return [(S, self.entries[S]) for S in sorted(self.entries, reverse=True)]


def _groups(values: np.ndarray, tol: float) -> List[slice]:
    out, start = [], 0
    for k in range(1, values.size + 1):
        if k == values.size or values[k] - values[k - 1] > tol:
            out.append(slice(start, k))
            start = k
    return out


def classify_sector(H: MatrixLike, algebra: SpinAlgebra, sector: SectorBasis,
                    candidates: Sequence[Fraction]) -> SectorClassification:
    """Eigenvalues of H on one magnetization sector, each labelled with a total spin S."""
    cutoff = setting("SPINLAB_DENSE_CUTOFF")
    if sector.dim > cutoff:
        raise ResourceError(f"Casimir classification of sector {sector.label} needs a dense block",
                            dim=sector.dim, cutoff=cutoff)
    check_sector_invariance(H, sector)
    Hb = restrict(as_operator(H), sector).toarray()
    Cb = algebra.casimir_block(sector)
    comm = np.linalg.norm(Hb @ Cb - Cb @ Hb)
    scale_ = np.linalg.norm(Hb) * np.linalg.norm(Cb)
    if comm > 1e-10 * max(scale_, 1e-300) and comm > 1e-12:
        raise ClassificationError("H does not commute with the Casimir on sector "
                                  f"{sector.label}", residual=float(comm / max(scale_, 1e-300)))
    values, vectors = sla.eigh(Hb)
    cands = [S for S in candidates if S >= abs(sector.magnetization)]
    cvals = np.array([algebra.casimir_value(S) for S in cands])
    energies, labels, residuals = [], [], []
    for block in _groups(values, setting("SPINLAB_DEGENERACY_TOL")):
        W = vectors[:, block]
        K = W.conj().T @ Cb @ W
        if algebra.hermitian:
            cs, U = sla.eigh((K + K.conj().T) / 2)
        else:
            cs, U = sla.eig(K)
            if np.abs(cs.imag).max() > 1e-8 * max(1.0, np.abs(cs).max()):
                raise ClassificationError("Casimir has complex eigenvalues on an energy eigenspace",
                                          residual=float(np.abs(cs.imag).max()))
            cs = cs.real
        for c, u in zip(cs, U.T):
            v = W @ u
            v = v / np.linalg.norm(v)
            res = float(np.linalg.norm(Cb @ v - c * v))
            if res > 1e-8 * max(1.0, abs(c)):
                raise ClassificationError("Casimir eigenvector residual too large", residual=res)
            dist = np.abs(cvals - c)
            order = np.argsort(dist)
            if dist.size > 1 and dist[order[0]] * LABEL_MARGIN > dist[order[1]]:
                raise ClassificationError(f"Casimir value {c:.12g} has no clear spin label",
                                          residual=float(dist[order[0]]))
            energies.append(float(np.real(np.vdot(v, Hb @ v))))
            labels.append(cands[int(order[0])])
            residuals.append(res)
    return SectorClassification(sector.magnetization, np.array(energies), labels, np.array(residuals))


def classify_total_spin(H: MatrixLike, algebra: SpinAlgebra, spins: Optional[Iterable] = None,
                        threads: Optional[int] = None) -> SpinResolvedLevels:
    """E(H,S) for every S in the grid, scanning the sector M = S where each spin-S multiplet has one vector."""
    space = algebra.space
    grid = spin_grid(space)
    wanted = grid if spins is None else sorted(Fraction(S) for S in spins)

    def job(S):
        return classify_sector(H, algebra, magnetization_sector(space, S), grid)

    results = pool_map(job, wanted, threads)
    entries, residuals, multiplets = {}, {}, {}
    for S, res in zip(wanted, results):
        mine = [E for E, lab in zip(res.energies, res.labels) if lab == S]
        if not mine:
            continue
        entries[S] = min(mine)
        multiplets[S] = sorted(mine)
        residuals[S] = float(res.residuals.max()) if res.residuals.size else 0.0
    levels = SpinResolvedLevels(entries, space.S_max, wanted, residuals, multiplets)
    log.debug("classified total spin", extra={"algebra": algebra.name, "dim": space.total_dim,
                                              "labels": len(entries)})
    return levels


# ---------------------------------------------------------------------------
# Verdicts
# ---------------------------------------------------------------------------

@dataclass
class OrderingVerdict:
    property: str
    holds: bool
    witness: Optional[Tuple] = None
    margin: float = math.inf


def _require_complete(levels: SpinResolvedLevels, grid: Sequence[Fraction]) -> None:
    missing = [S for S in grid if S not in levels.entries]
    if missing:
        raise IncompleteTableError("E(H,S) table is incomplete", missing=[str(S) for S in missing])


def _monotone_verdict(name: str, table: Dict[Fraction, float], grid: Sequence[Fraction],
                      decreasing: bool = True) -> OrderingVerdict:
    """table[S] strictly monotone in S over the grid; witness (S, S′, table[S], table[S′]) for S > S′."""
    sign = 1.0 if decreasing else -1.0
    margin, witness = math.inf, None
    grid = sorted(grid)
    for lo, hi in zip(grid, grid[1:]):
        diff = sign * (table[lo] - table[hi])
        margin = min(margin, diff)
        if diff <= ORDER_TOL and witness is None:
            witness = (hi, lo, table[hi], table[lo])
    return OrderingVerdict(name, witness is None, witness, margin)


def foel_check(levels: SpinResolvedLevels) -> OrderingVerdict:
    """E(H,S) < E(H,S′) whenever S′ < S; the witness is (S, S′, E(S), E(S′))."""
    _require_complete(levels, levels.grid)
    return _monotone_verdict("FOEL", levels.entries, levels.grid)


@dataclass
class LiebMattisReport:
    verdict: OrderingVerdict
    levels: SpinResolvedLevels
    ground_spin: Fraction
    parts: Tuple[List[int], List[int]]


def lieb_mattis_hamiltonian(g: SpinGraph, intra_A: Optional[SpinGraph] = None,
                            intra_B: Optional[SpinGraph] = None) -> SparseOperator:
    """−H_G + H_A + H_B: bipartite bonds antiferromagnetic, optional intra-part bonds ferromagnetic."""
    space = SpinSpace.for_graph(g)
    H = assemble(scale(heisenberg(g), -1.0), space)
    for extra in (intra_A, intra_B):
        if extra is not None:
            H = H + assemble(heisenberg(extra), space)
    return H


def lieb_mattis_check(g: SpinGraph, parts: Optional[Tuple[Sequence[int], Sequence[int]]] = None,
                      intra_A: Optional[SpinGraph] = None, intra_B: Optional[SpinGraph] = None,
                      threads: Optional[int] = None) -> LiebMattisReport:
    """Ground level at S = |S_A − S_B| and E(H,S) increasing for S ≥ |S_A − S_B|."""
    if parts is None:
        parts = bipartition(g)
    A, B = sorted(parts[0]), sorted(parts[1])
    check_bipartition(g, A, B)
    for extra, part in ((intra_A, A), (intra_B, B)):
        if extra is not None and any(x not in part or y not in part for x, y, _ in extra.edges):
            raise DomainError("intra-part bonds must stay inside their part")
    H = lieb_mattis_hamiltonian(g, intra_A, intra_B)
    space = SpinSpace.for_graph(g)
    levels = classify_total_spin(H, su2_algebra(space), threads=threads)
    _require_complete(levels, levels.grid)
    E = levels.entries
    S0 = abs(sum((g.spins[x] for x in A), Fraction(0)) - sum((g.spins[x] for x in B), Fraction(0)))
    verdict = _monotone_verdict("LiebMattis", E, [S for S in levels.grid if S >= S0], decreasing=False)
    # the ground level itself must sit at S0
    for S in levels.grid:
        if S == S0:
            continue
        lead = E[S] - E[S0]
        verdict.margin = min(verdict.margin, lead)
        if lead <= ORDER_TOL and verdict.holds:
            verdict.holds, verdict.witness = False, (S0, S, E[S0], E[S])
    return LiebMattisReport(verdict, levels, S0, (A, B))


def highest_levels(levels: SpinResolvedLevels) -> Dict[Fraction, float]:
    """Largest energy among the multiplets of each spin label."""
    return {S: max(v) for S, v in levels.multiplets.items() if v}


def lieb_mattis_side_check(levels: SpinResolvedLevels, S_from: Fraction) -> OrderingVerdict:
    """Highest level per label strictly decreasing in S over S_from..S_max (the −H Lieb-Mattis ordering)."""
    top = highest_levels(levels)
    grid = [S for S in levels.grid if S >= Fraction(S_from)]
    missing = [S for S in grid if S not in top]
    if missing:
        raise IncompleteTableError("highest-level table is incomplete", missing=[str(S) for S in missing])
    return _monotone_verdict("LiebMattisSide", top, grid)


# ---------------------------------------------------------------------------
# Per-eigenvalue rows
# ---------------------------------------------------------------------------

@dataclass
class LevelRow:
    S3: Fraction
    S: Fraction
    energy: float


def level_rows(H: MatrixLike, algebra: SpinAlgebra, threads: Optional[int] = None) -> List[LevelRow]:
    """Every eigenvalue as (S³, S, E − E₀), sectors from the highest magnetization down."""
    space = algebra.space
    grid = spin_grid(space)
    sectors = [magnetization_sector(space, M) for M in reversed(list(sector_dimensions(space)))]
    results = pool_map(lambda s: classify_sector(H, algebra, s, grid), sectors, threads)
    E0 = min(float(r.energies.min()) for r in results)
    rows = []
    for res in results:
        order = np.argsort(res.energies, kind="stable")
        rows += [LevelRow(res.magnetization, res.labels[i], float(res.energies[i] - E0)) for i in order]
    return rows
