"""Symmetric simple exclusion on a weighted graph.

Configurations η: V → {0,1} are bitmasks with bit x = η(x), kept in
ascending integer order. Edge weights are read as jump rates r_xy.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, Optional

import networkx as nx
import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from hamiltonians.services import assemble, custom
from hilbert.services import MatrixLike, SparseOperator, SpinSpace, as_operator, magnetization_sector, spin_matrices
from lattice.services import SpinGraph, require_connected
from spectral.services import full_spectrum, lowest_levels, sector_spectrum, spectral_gap
from spinlab.conf import setting
from spinlab.errors import ConjugacyError, DomainError
from spinlab.pool import pool_map

log = logging.getLogger(__name__)

CONJUGACY_TOL = 1e-10


@dataclass
class ExclusionSpace:
    graph: SpinGraph
    n: int
    configs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        V = self.graph.n_vertices
        if not 0 <= self.n <= V:
            raise DomainError(f"{self.n} particles on {V} vertices")
        bad = [(x, y, r) for x, y, r in self.graph.edges if not r > 0]
        if bad:
            raise DomainError(f"jump rates must be positive, edge {bad[0][:2]} has {bad[0][2]}")
        masks = [sum(1 << x for x in occupied) for occupied in combinations(range(V), self.n)]
        self.configs = np.array(sorted(masks), dtype=np.int64)
        self.configs.setflags(write=False)

    @property
    def dim(self) -> int:
        return int(self.configs.size)

    def index(self, eta: int) -> int:
        k = int(np.searchsorted(self.configs, eta))
        if k >= self.dim or self.configs[k] != eta:
            raise DomainError(f"configuration {eta:b} has the wrong particle number")
        return k

    def occupation(self, eta: int) -> tuple:
        return tuple((int(eta) >> x) & 1 for x in range(self.graph.n_vertices))


def exclusion_space(g, n):
    return ExclusionSpace(g, n)


def ssep_generator(space: ExclusionSpace) -> SparseOperator:
    """L f(η) = Σ_xy r_xy (f(η) − f(η^xy)) as a real symmetric matrix on configs."""
    rows, cols, vals = [], [], []
    diag = np.zeros(space.dim)
    for i, eta in enumerate(space.configs):
        eta = int(eta)
        for x, y, r in space.graph.edges:
            if ((eta >> x) ^ (eta >> y)) & 1:
                j = space.index(eta ^ ((1 << x) | (1 << y)))
                rows.append(i)
                cols.append(j)
                vals.append(-r)
                diag[i] += r
    L = sp.coo_matrix((vals, (rows, cols)), shape=(space.dim, space.dim)).tocsr() + sp.diags(diag)
    return SparseOperator(L, hermitian=True, check=False)


@dataclass
class GeneratorReport:
    gaps: Dict[int, float]
    stationary_checks: Dict[int, float]
    aldous_margin: float
    dims: Dict[int, int] = field(default_factory=dict)

    def rows(self):
        return [(n, self.dims[n], lam, self.aldous_margin) for n, lam in sorted(self.gaps.items())]


def is_path(g):
    G = g.nx_graph
    return g.n_vertices <= 2 or (nx.is_tree(G) and max(d for _, d in G.degree()) <= 2)


def ssep_gaps(g: SpinGraph, threads: Optional[int] = None) -> GeneratorReport:
    """λ(n) for every 1 ≤ n ≤ |V|−1 and the spread max_n |λ(n) − λ(1)|."""
    require_connected(g, "the exclusion gap")
    V = g.n_vertices
    ns = list(range(1, V))

    def job(n):
        space = exclusion_space(g, n)
        L = ssep_generator(space)
        ones = np.ones(space.dim)
        stationary = float(np.abs(L @ ones).max())
        lam = spectral_gap(lowest_levels(L, 2)).gap
        log.debug("exclusion gap", extra={"n": n, "dim": space.dim, "lambda": lam})
        return lam, stationary, space.dim

    results = pool_map(job, ns, threads)
    gaps = {n: r[0] for n, r in zip(ns, results)}
    checks = {n: r[1] for n, r in zip(ns, results)}
    dims = {n: r[2] for n, r in zip(ns, results)}
    margin = max((abs(lam - gaps[1]) for lam in gaps.values()), default=0.0)
    if not is_path(g):
        log.warning("gap equality across particle numbers is reported as data off chains",
                    extra={"vertices": V, "aldous_margin": margin})
    return GeneratorReport(gaps, checks, margin, dims)


def relaxation_time(lam):
    if not lam > 0:
        raise DomainError(f"relaxation time needs a positive gap, got {lam}")
    return 1.0 / lam


# ---------------------------------------------------------------------------
# XXX conjugacy
# ---------------------------------------------------------------------------

@dataclass
class ConjugacyReport:
    deviations: Dict[int, float]
    uniform_rayleigh: Dict[int, float]
    max_deviation: float


def exchange_hamiltonian(g: SpinGraph) -> SparseOperator:
    """Σ_xy [−2 r_xy S_x·S_y + r_xy/2] on spin-1/2 sites; each bond is r_xy(1 − swap)."""
    dot = spin_matrices("1/2").dot()
    terms = [((x, y), -2 * r * dot + r / 2 * np.eye(4)) for x, y, r in g.edges]
    return assemble(custom(terms, "exchange"), SpinSpace.uniform(g.n_vertices))


def xxx_conjugacy_check(g: SpinGraph, tol: float = CONJUGACY_TOL, threads: Optional[int] = None) -> ConjugacyReport:
    """Spectrum of L on Ω_n against the spectrum of H_spin on M = n − |V|/2, for every n."""
    require_connected(g, "the XXX conjugacy check")
    V = g.n_vertices
    H = exchange_hamiltonian(g)
    spin_space = SpinSpace.uniform(V)

    def job(n):
        L = ssep_generator(exclusion_space(g, n))
        ours = full_spectrum(L).eigenvalues
        theirs = sector_spectrum(H, magnetization_sector(spin_space, n - V / 2)).eigenvalues
        if ours.size != theirs.size:
            return math.inf, math.nan
        ones = np.ones(L.dim) / math.sqrt(L.dim)
        return float(np.abs(ours - theirs).max()), float(np.real(ones @ (L @ ones)))

    results = pool_map(job, range(V + 1), threads)
    deviations = {n: r[0] for n, r in enumerate(results)}
    rayleigh = {n: r[1] for n, r in enumerate(results)}
    worst = max(deviations.values())
    if worst > tol:
        raise ConjugacyError("exclusion generator and exchange chain spectra differ", max_deviation=worst)
    return ConjugacyReport(deviations, rayleigh, worst)


def particle_hole_check(g: SpinGraph) -> float:
    V = g.n_vertices
    worst = 0.0
    for n in range(V // 2 + 1):
        a = full_spectrum(ssep_generator(exclusion_space(g, n))).eigenvalues
        b = full_spectrum(ssep_generator(exclusion_space(g, V - n))).eigenvalues
        worst = max(worst, float(np.abs(a - b).max()))
    return worst


def random_walk_deviation(g: SpinGraph) -> float:
    """One particle is a continuous-time random walk: L on Ω_1 is the weighted graph Laplacian."""
    L = ssep_generator(exclusion_space(g, 1)).real_matrix()
    ref = nx.laplacian_matrix(g.nx_graph, nodelist=list(g.vertices), weight="weight")
    return float(np.abs((L - ref).toarray()).max())


# ---------------------------------------------------------------------------
# Semigroup
# ---------------------------------------------------------------------------

def semigroup_evolve(Lgen: MatrixLike, mu0: np.ndarray, t: float) -> np.ndarray:
    """μ_t = e^{−tL} μ_0; L is symmetric so the dual action on densities is the same matrix."""
    if t < 0:
        raise DomainError(f"time must be nonnegative, got {t}")
    mu0 = np.asarray(mu0, dtype=float)
    if mu0.min() < -1e-15 or abs(mu0.sum() - 1) > 1e-12:
        raise DomainError("initial measure must be a probability vector")
    if t == 0:
        return mu0.copy()
    L = as_operator(Lgen).real_matrix()
    t0 = time.perf_counter()
    if L.shape[0] <= setting("SPINLAB_DENSE_CUTOFF"):
        w, U = sla.eigh(L.toarray())
        mu = U @ (np.exp(-t * w) * (U.T @ mu0))
    else:
        mu = spla.expm_multiply(-t * L.astype(float), mu0)
    log.debug("semigroup", extra={"dim": L.shape[0], "t": t, "seconds": round(time.perf_counter() - t0, 4)})
    return np.real(mu)
