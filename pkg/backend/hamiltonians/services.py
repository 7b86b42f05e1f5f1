"""Interactions Φ (finite-support Hermitian terms) and their assembly into Hamiltonians.

Every model keeps its constant shifts inside the terms, so energies come out
in the normalization the droplet and AKLT checks expect: the all-up XXZ
state has energy 0 and AKLT bonds are projectors.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Any, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from hilbert.services import (
    SectorBasis, SparseOperator, SpinSpace, embed_term, hermitian_deviation, operator_norm,
    restrict, spin_matrices,
)
from lattice.services import SpinGraph, diameter, path_graph, ring_graph
from spinlab.conf import setting
from spinlab.errors import DomainError

log = logging.getLogger(__name__)

OPEN_WITH_FIELD = "open_with_field"
PERIODIC = "periodic"
BOUNDARIES = (OPEN_WITH_FIELD, PERIODIC)


@dataclass(frozen=True, eq=False)
class Term:
    support: Tuple[int, ...]
    matrix: np.ndarray

    def __post_init__(self):
        support = tuple(int(x) for x in self.support)
        if not support:
            raise DomainError("a term needs a nonempty support")
        if len(set(support)) != len(support):
            raise DomainError(f"support {support} repeats a vertex")
        m = np.array(self.matrix, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DomainError(f"term on {support} is not a square matrix")
        dev = hermitian_deviation(m)
        if dev >= setting("SPINLAB_HERMITIAN_TOL"):
            raise DomainError(f"term on {support} is not Hermitian (deviation {dev:.3e})")
        m.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "matrix", m)

    @cached_property
    def norm(self) -> float:
        return operator_norm(self.matrix)

    def canonical_key(self):
        return (len(self.support), self.support, self.matrix.tobytes())


@dataclass(frozen=True, eq=False)
class Interaction:
    terms: Tuple[Term, ...]
    model: str = "custom"
    params: Mapping[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    @property
    def vertices(self) -> List[int]:
        return sorted({x for t in self.terms for x in t.support})


@dataclass(frozen=True)
class XxzParams:
    L: int
    Delta: float
    q: float
    J: float = 1.0
    boundary: str = OPEN_WITH_FIELD

    def __post_init__(self):
        if self.boundary not in BOUNDARIES:
            raise DomainError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")
        if self.L < (3 if self.boundary == PERIODIC else 2):
            raise DomainError(f"XXZ chain too short for {self.boundary}: L={self.L}")
        if not self.Delta > 1:
            raise DomainError(f"Delta must exceed 1, got {self.Delta}")
        if not 0 < self.q < 1:
            raise DomainError(f"q must lie in (0, 1), got {self.q}")
        if abs(self.Delta - (self.q + 1 / self.q) / 2) >= 1e-12:
            raise DomainError(f"Delta={self.Delta} and q={self.q} are inconsistent")
        if not self.J > 0:
            raise DomainError(f"J must be positive, got {self.J}")

    @property
    def A_Delta(self) -> float:
        return 0.5 * math.sqrt(1 - 1 / self.Delta ** 2)

    @property
    def periodic(self) -> bool:
        return self.boundary == PERIODIC

    def with_length(self, L: int) -> "XxzParams":
        return XxzParams(L, self.Delta, self.q, self.J, self.boundary)

    def with_boundary(self, boundary: str) -> "XxzParams":
        return XxzParams(self.L, self.Delta, self.q, self.J, boundary)


def q_from_delta(Delta: float) -> float:
    if not Delta > 1:
        raise DomainError(f"Delta must exceed 1, got {Delta}")
    return Delta - math.sqrt(Delta * Delta - 1)


def delta_from_q(q: float) -> float:
    if not 0 < q < 1:
        raise DomainError(f"q must lie in (0, 1), got {q}")
    return (q + 1 / q) / 2


def xxz_params(L: int, Delta: Optional[float] = None, q: Optional[float] = None, J: float = 1.0,
               boundary: str = OPEN_WITH_FIELD) -> XxzParams:
    """Exactly one of Delta, q is given; the other is derived."""
    if (Delta is None) == (q is None):
        raise DomainError("give exactly one of Delta and q")
    if q is None:
        q = q_from_delta(float(Delta))
        Delta = (q + 1 / q) / 2
    else:
        Delta = delta_from_q(float(q))
    return XxzParams(int(L), float(Delta), float(q), float(J), boundary)


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

def _dot(s_x: Fraction, s_y: Fraction) -> np.ndarray:
    A, B = spin_matrices(s_x), spin_matrices(s_y)
    return np.kron(A.S1, B.S1) + np.kron(A.S2, B.S2) + np.kron(A.S3, B.S3)


def heisenberg(g: SpinGraph) -> Interaction:
    """−J_xy S_x·S_y on every edge; J > 0 is ferromagnetic."""
    terms = tuple(Term((x, y), -w * _dot(g.spins[x], g.spins[y])) for x, y, w in g.edges)
    return Interaction(terms, "heisenberg", {"n_vertices": g.n_vertices, "edges": len(g.edges)})


def aklt_bond() -> np.ndarray:
    """Projector onto total spin 2 of two spin-1 sites."""
    SS = _dot(Fraction(1), Fraction(1))
    return SS / 2 + SS @ SS / 6 + np.eye(9) / 3


def aklt(L: int, periodic: bool = False) -> Interaction:
    if L < 2 or (periodic and L < 3):
        raise DomainError(f"AKLT chain too short: L={L}, periodic={periodic}")
    P = aklt_bond()
    bonds = [(x, (x + 1) % L) for x in range(L if periodic else L - 1)]
    return Interaction(tuple(Term(b, P) for b in bonds), "aklt", {"L": L, "periodic": periodic})


def xxz_bond(Delta: float, J: float = 1.0) -> np.ndarray:
    S = spin_matrices(Fraction(1, 2))
    flip = np.kron(S.S1, S.S1) + np.kron(S.S2, S.S2)
    return -J * (flip / Delta + np.kron(S.S3, S.S3) - np.eye(4) / 4)


def xxz(p: XxzParams) -> Interaction:
    """Open chain with boundary fields −A(Δ)(S³_{L−1} − S³_0), or the closed ring without them."""
    bond = xxz_bond(p.Delta, p.J)
    L = p.L
    terms = [Term((x, (x + 1) % L), bond) for x in range(L if p.periodic else L - 1)]
    if not p.periodic:
        S3 = spin_matrices(Fraction(1, 2)).S3
        I = np.eye(2)
        # ordered support (0, L−1)
        terms.append(Term((0, L - 1), -p.A_Delta * (np.kron(I, S3) - np.kron(S3, I))))
    return Interaction(tuple(terms), "xxz_periodic" if p.periodic else "xxz_open",
                       {"L": L, "Delta": p.Delta, "q": p.q, "J": p.J, "boundary": p.boundary})


def custom(terms: Iterable[Tuple[Sequence[int], Any]], model: str = "custom", **params) -> Interaction:
    return Interaction(tuple(t if isinstance(t, Term) else Term(tuple(t[0]), t[1]) for t in terms), model, params)


def translated(local: np.ndarray, L: int, periodic: bool = False, site_dim: int = 2,
               model: str = "translated") -> Interaction:
    """Φ_x = local acting on sites x..x+r, for every admissible x."""
    n = np.asarray(local).shape[0]
    width, size = 0, 1
    while size < n:
        size *= site_dim
        width += 1
    if width == 0 or size != n:
        raise DomainError(f"a {n}x{n} local term does not act on whole sites of dimension {site_dim}")
    return translated_on(local, L, width, periodic, model)


def translated_on(local: np.ndarray, L: int, width: int, periodic: bool = False,
                  model: str = "translated") -> Interaction:
    if width > L:
        raise DomainError(f"support width {width} exceeds L={L}")
    starts = range(L) if periodic else range(L - width + 1)
    terms = tuple(Term(tuple((x + k) % L for k in range(width)), local) for x in starts)
    return Interaction(terms, model, {"L": L, "width": width, "periodic": periodic})


def scale(phi: Interaction, c: float) -> Interaction:
    if np.imag(c) != 0:
        raise DomainError("only real scalings keep terms Hermitian")
    return Interaction(tuple(Term(t.support, float(np.real(c)) * t.matrix) for t in phi), phi.model,
                       {**phi.params, "scale": float(np.real(c))})


def combine(phi: Interaction, psi: Interaction, c: float = 1.0) -> Interaction:
    extra = scale(psi, c).terms if c != 1 else psi.terms
    return Interaction(phi.terms + extra, f"{phi.model}+{psi.model}", {**phi.params, "coupling": float(c)})


# ---------------------------------------------------------------------------
# Norm and assembly
# ---------------------------------------------------------------------------

def _support_diameter(g: SpinGraph, support: Tuple[int, ...]) -> int:
    d = diameter(g, support)
    if d == math.inf:
        raise DomainError(f"support {support} is disconnected; its diameter is undefined")
    return int(d)


def interaction_norm_table(phi: Interaction, lam: float, g: SpinGraph) -> np.ndarray:
    """Per-vertex sums Σ_{X∋x} |X| ‖Φ(X)‖ N^{2|X|} e^{λ D(X)}."""
    if not lam > 0:
        raise DomainError(f"lambda must be positive, got {lam}")
    N = max(g.site_dims)
    table = np.zeros(g.n_vertices)
    for t in phi:
        k = len(t.support)
        value = k * t.norm * float(N) ** (2 * k) * math.exp(lam * _support_diameter(g, t.support))
        for x in t.support:
            table[x] += value
    return table


def lambda_norm(phi: Interaction, lam: float, g: SpinGraph) -> float:
    if not len(phi):
        if not lam > 0:
            raise DomainError(f"lambda must be positive, got {lam}")
        return 0.0
    return float(interaction_norm_table(phi, lam, g).max())


def _check_term_fits(t: Term, space: SpinSpace) -> None:
    if max(t.support) >= space.n_sites or min(t.support) < 0:
        raise DomainError(f"support {t.support} not within a {space.n_sites}-site space")
    need = int(np.prod([space.site_dims[x] for x in t.support]))
    if t.matrix.shape[0] != need:
        raise DomainError(f"term on {t.support} is {t.matrix.shape[0]}-dimensional, sites need {need}")


def assemble(phi: Interaction, space: SpinSpace) -> SparseOperator:
    """H = Σ_X Φ(X), summed in canonical term order so the result is bit-identical."""
    dim = space.total_dim
    acc = sp.csr_matrix((dim, dim), dtype=np.complex128)
    for t in sorted(phi.terms, key=Term.canonical_key):
        _check_term_fits(t, space)
        acc = acc + embed_term(space, t.support, t.matrix, hermitian=False).matrix
    H = SparseOperator(acc, hermitian=True)
    log.debug("assembled hamiltonian", extra={"model": phi.model, "dim": dim, "nnz": H.nnz, "terms": len(phi)})
    return H


def assemble_sector(phi: Interaction, sector: SectorBasis) -> SparseOperator:
    """Block of H on a sector; the caller guarantees the sector is invariant."""
    return SparseOperator(restrict(assemble(phi, sector.parent), sector), hermitian=True)


def chain_graph(L: int, periodic: bool, spin=Fraction(1, 2), J: float = 1.0) -> SpinGraph:
    return ring_graph(L, J, spin) if periodic else path_graph(L, J, spin)

