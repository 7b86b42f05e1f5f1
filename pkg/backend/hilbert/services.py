"""Tensor-product spin spaces, local spin matrices, embeddings and sector bases.

Basis states are mixed-radix integers over the site dimensions with vertex 0
as the most significant digit, so embeddings are plain Kronecker products
A_0 ⊗ A_1 ⊗ … ⊗ A_{V−1}. Digit 0 at a site is its highest S³ eigenvalue.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache, reduce
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from lattice.services import SpinGraph, SpinLike, as_spin
from spinlab.conf import setting
from spinlab.errors import DomainError, EmptySectorError

log = logging.getLogger(__name__)

MatrixLike = Union[np.ndarray, sp.spmatrix, "SparseOperator"]


# ---------------------------------------------------------------------------
# Sparse operators
# ---------------------------------------------------------------------------

class SparseOperator:
    """Square complex CSR matrix with an asserted-then-verified Hermitian flag."""

    __slots__ = ("matrix", "hermitian")

    def __init__(self, matrix: MatrixLike, hermitian: bool = False, check: bool = True):
        if isinstance(matrix, SparseOperator):
            matrix = matrix.matrix
        m = sp.csr_matrix(matrix, dtype=np.complex128)
        if m.shape[0] != m.shape[1]:
            raise DomainError(f"operator must be square, got shape {m.shape}")
        small = np.abs(m.data) < setting("SPINLAB_ZERO_TOL")
        if small.any():
            m.data[small] = 0
        m.eliminate_zeros()
        m.sort_indices()
        self.matrix = m
        self.hermitian = bool(hermitian)
        if hermitian and check:
            dev = hermitian_deviation(m)
            if dev >= setting("SPINLAB_HERMITIAN_TOL"):
                raise DomainError(f"operator flagged Hermitian deviates by {dev:.3e}")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.matrix.shape

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def real_matrix(self) -> sp.csr_matrix:
        """Real CSR copy when every imaginary part vanishes, otherwise the complex matrix."""
        if self.matrix.nnz == 0 or np.abs(self.matrix.data.imag).max() < setting("SPINLAB_ZERO_TOL"):
            return sp.csr_matrix(self.matrix.real)
        return self.matrix

    def adjoint(self) -> "SparseOperator":
        return SparseOperator(self.matrix.conj().T, hermitian=self.hermitian, check=False)

    def __add__(self, other: "SparseOperator") -> "SparseOperator":
        other = as_operator(other)
        return SparseOperator(self.matrix + other.matrix, hermitian=self.hermitian and other.hermitian, check=False)

    def __sub__(self, other: "SparseOperator") -> "SparseOperator":
        other = as_operator(other)
        return SparseOperator(self.matrix - other.matrix, hermitian=self.hermitian and other.hermitian, check=False)

    def __neg__(self) -> "SparseOperator":
        return SparseOperator(-self.matrix, hermitian=self.hermitian, check=False)

    def __mul__(self, c: complex) -> "SparseOperator":
        if not np.isscalar(c):
            return NotImplemented
        return SparseOperator(self.matrix * c, hermitian=self.hermitian and np.imag(c) == 0, check=False)

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, SparseOperator):
            return SparseOperator(self.matrix @ other.matrix, check=False)
        return self.matrix @ other

    def __repr__(self) -> str:
        return f"SparseOperator(dim={self.dim}, nnz={self.nnz}, hermitian={self.hermitian})"


def as_operator(A: MatrixLike, hermitian: bool = False) -> SparseOperator:
    return A if isinstance(A, SparseOperator) else SparseOperator(A, hermitian=hermitian)


def hermitian_deviation(A: MatrixLike) -> float:
    m = A.matrix if isinstance(A, SparseOperator) else sp.csr_matrix(A)
    d = m - m.conj().T
    return float(abs(d).max()) if d.nnz else 0.0


def commutator(A: SparseOperator, B: SparseOperator) -> SparseOperator:
    return as_operator(A) @ as_operator(B) - as_operator(B) @ as_operator(A)


def operator_norm(A: MatrixLike) -> float:
    """Largest singular value; dense SVD below the dense cutoff, ARPACK above."""
    if isinstance(A, SparseOperator):
        A = A.matrix
    if sp.issparse(A):
        if A.shape[0] <= setting("SPINLAB_DENSE_CUTOFF"):
            A = A.toarray()
        else:
            if A.nnz == 0:
                return 0.0
            return float(spla.svds(A, k=1, return_singular_vectors=False)[0])
    A = np.asarray(A)
    if A.size == 0:
        return 0.0
    return float(np.linalg.norm(A, ord=2))


# ---------------------------------------------------------------------------
# Local spin matrices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpinMatrices:
    s: Fraction
    S1: np.ndarray
    S2: np.ndarray
    S3: np.ndarray
    Splus: np.ndarray
    Sminus: np.ndarray

    @property
    def dim(self) -> int:
        return self.S3.shape[0]

    @property
    def identity(self) -> np.ndarray:
        return np.eye(self.dim, dtype=np.complex128)

    def dot(self) -> np.ndarray:
        return sum(np.kron(a, a) for a in (self.S1, self.S2, self.S3))


@lru_cache(maxsize=None)
def _spin_matrices(s: Fraction) -> SpinMatrices:
    n = int(2 * s + 1)
    m = np.array([float(s) - k for k in range(n)])  # descending S³
    Sp = np.zeros((n, n), dtype=np.complex128)
    for k in range(1, n):
        Sp[k - 1, k] = np.sqrt(float(s) * (float(s) + 1) - m[k] * (m[k] + 1))
    Sm = Sp.conj().T.copy()
    S1 = (Sp + Sm) / 2
    S2 = (Sp - Sm) / 2j
    S3 = np.diag(m).astype(np.complex128)
    for a in (Sp, Sm, S1, S2, S3):
        a.setflags(write=False)
    return SpinMatrices(s, S1, S2, S3, Sp, Sm)


def spin_matrices(s: SpinLike) -> SpinMatrices:
    """Standard spin-s matrices in the basis m = s, s−1, …, −s."""
    return _spin_matrices(as_spin(s))


# ---------------------------------------------------------------------------
# Spaces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpinSpace:
    site_dims: Tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(n) for n in self.site_dims)
        if not dims:
            raise DomainError("a spin space needs at least one site")
        if any(n < 2 for n in dims):
            raise DomainError(f"every site dimension must be >= 2, got {dims}")
        object.__setattr__(self, "site_dims", dims)

    @classmethod
    def uniform(cls, L: int, s: SpinLike = Fraction(1, 2)) -> "SpinSpace":
        return cls((int(2 * as_spin(s) + 1),) * L)

    @classmethod
    def for_graph(cls, g: SpinGraph) -> "SpinSpace":
        return cls(g.site_dims)

    @property
    def n_sites(self) -> int:
        return len(self.site_dims)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.site_dims, dtype=object))

    @property
    def N_max(self) -> int:
        return max(self.site_dims)

    @property
    def spins(self) -> Tuple[Fraction, ...]:
        return tuple(Fraction(n - 1, 2) for n in self.site_dims)

    @property
    def S_max(self) -> Fraction:
        return sum(self.spins, Fraction(0))

    @cached_property
    def strides(self) -> Tuple[int, ...]:
        out, acc = [], 1
        for n in reversed(self.site_dims):
            out.append(acc)
            acc *= n
        return tuple(reversed(out))

    def encode(self, digits: Sequence[int]) -> int:
        if len(digits) != self.n_sites:
            raise DomainError(f"expected {self.n_sites} digits, got {len(digits)}")
        idx = 0
        for d, n, st in zip(digits, self.site_dims, self.strides):
            if not 0 <= d < n:
                raise DomainError(f"digit {d} out of range for site dimension {n}")
            idx += int(d) * st
        return idx

    def decode(self, index: int) -> Tuple[int, ...]:
        if not 0 <= index < self.total_dim:
            raise DomainError(f"basis index {index} out of range")
        return tuple(int(d) for d in np.unravel_index(index, self.site_dims))

    @cached_property
    def twice_magnetization(self) -> np.ndarray:
        tm = np.zeros(1, dtype=np.int64)
        for n in self.site_dims:
            local = (n - 1) - 2 * np.arange(n, dtype=np.int64)
            tm = (tm[:, None] + local[None, :]).ravel()
        tm.setflags(write=False)
        return tm

    def magnetization(self, index: int) -> Fraction:
        return Fraction(int(self.twice_magnetization[index]), 2)


def sector_dimensions(space: SpinSpace) -> Dict[Fraction, int]:
    """Dimension of every magnetization sector, by generating-function convolution."""
    counts = {0: 1}
    for n in space.site_dims:
        nxt: Dict[int, int] = {}
        for tm, c in counts.items():
            for k in range(n):
                key = tm + (n - 1) - 2 * k
                nxt[key] = nxt.get(key, 0) + c
        counts = nxt
    return {Fraction(k, 2): counts[k] for k in sorted(counts)}


def achievable_magnetizations(space: SpinSpace) -> List[Fraction]:
    return list(sector_dimensions(space))


# ---------------------------------------------------------------------------
# Embedding
# ---------------------------------------------------------------------------

def _check_local(space: SpinSpace, x: int, A) -> sp.csr_matrix:
    if not 0 <= x < space.n_sites:
        raise DomainError(f"vertex {x} not in a {space.n_sites}-site space")
    A = sp.csr_matrix(A, dtype=np.complex128)
    n = space.site_dims[x]
    if A.shape != (n, n):
        raise DomainError(f"site {x} has dimension {n}, local matrix is {A.shape}")
    return A


def embed_at(space: SpinSpace, ops: Iterable[Tuple[int, MatrixLike]], hermitian: bool = False) -> SparseOperator:
    """Kronecker embedding of local matrices on distinct sites; identity elsewhere."""
    local: Dict[int, sp.csr_matrix] = {}
    for x, A in ops:
        x = int(x)
        if x in local:
            raise DomainError(f"vertex {x} listed twice")
        local[x] = _check_local(space, x, A)
    factors: List[sp.spmatrix] = []
    run = 1  # pending identity dimension
    for x, n in enumerate(space.site_dims):
        if x in local:
            if run > 1:
                factors.append(sp.identity(run, dtype=np.complex128, format="csr"))
            run = 1
            factors.append(local[x])
        else:
            run *= n
    if run > 1 or not factors:
        factors.append(sp.identity(run, dtype=np.complex128, format="csr"))
    M = reduce(lambda a, b: sp.kron(a, b, format="csr"), factors)
    return SparseOperator(M, hermitian=hermitian)


def embed_term(space: SpinSpace, support: Sequence[int], matrix: MatrixLike, hermitian: bool = True) -> SparseOperator:
    """Embed a matrix acting on the ordered tensor product of `support`'s sites.

    The support need not be sorted or contiguous: the term is expanded in the
    site-product basis and each product embedded separately.
    """
    support = [int(x) for x in support]
    if len(set(support)) != len(support):
        raise DomainError(f"support {support} repeats a vertex")
    dims = [space.site_dims[x] if 0 <= x < space.n_sites else -1 for x in support]
    if min(dims, default=0) < 0:
        raise DomainError(f"support {support} not within a {space.n_sites}-site space")
    M = sp.coo_matrix(matrix, dtype=np.complex128)
    size = int(np.prod(dims))
    if M.shape != (size, size):
        raise DomainError(f"support {support} needs a {size}x{size} matrix, got {M.shape}")
    if len(support) == 1:
        return embed_at(space, [(support[0], M)], hermitian=hermitian)
    lo = support[0]
    if support == list(range(lo, lo + len(support))):
        left = int(np.prod(space.site_dims[:lo], dtype=np.int64))
        right = int(np.prod(space.site_dims[lo + len(support):], dtype=np.int64))
        K = sp.kron(sp.identity(left, dtype=np.complex128), M, format="csr")
        K = sp.kron(K, sp.identity(right, dtype=np.complex128), format="csr")
        return SparseOperator(K, hermitian=hermitian)
    # expand into elementary products |a><b| = ⊗_k |a_k><b_k|
    total = SparseOperator(sp.csr_matrix((space.total_dim, space.total_dim), dtype=np.complex128))
    acc = total.matrix
    for i, j, v in zip(M.row, M.col, M.data):
        ai = np.unravel_index(i, dims)
        bj = np.unravel_index(j, dims)
        ops = []
        for x, n, a, b in zip(support, dims, ai, bj):
            E = sp.csr_matrix(([1.0 + 0j], ([a], [b])), shape=(n, n))
            ops.append((x, E))
        acc = acc + v * embed_at(space, ops).matrix
    return SparseOperator(acc, hermitian=hermitian)


def total_operator(space: SpinSpace, which: str) -> SparseOperator:
    """Σ_x S^i_x for which in {"S1", "S2", "S3", "Splus", "Sminus"}."""
    acc = sp.csr_matrix((space.total_dim, space.total_dim), dtype=np.complex128)
    for x, s in enumerate(space.spins):
        acc = acc + embed_at(space, [(x, getattr(spin_matrices(s), which))]).matrix
    return SparseOperator(acc, hermitian=which in {"S1", "S2", "S3"})


# ---------------------------------------------------------------------------
# Sector bases
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SectorBasis:
    parent: SpinSpace
    label: Tuple[str, Fraction]
    states: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.states.size)

    @property
    def magnetization(self) -> Fraction:
        return self.label[1]

    def position(self, index: int) -> int:
        k = int(np.searchsorted(self.states, index))
        if k >= self.dim or self.states[k] != index:
            raise DomainError(f"basis state {index} is not in sector {self.label}")
        return k

    def __hash__(self):
        return hash((self.parent, self.label))

    def __eq__(self, other):
        return isinstance(other, SectorBasis) and self.parent == other.parent and self.label == other.label


def _compositions(space: SpinSpace, target: int) -> Iterator[int]:
    """Indices with 2M = target in increasing order, by per-site digit recursion."""
    dims = space.site_dims
    strides = space.strides
    # reachable range of 2M for sites x.. end
    hi = np.zeros(len(dims) + 1, dtype=np.int64)
    for x in range(len(dims) - 1, -1, -1):
        hi[x] = hi[x + 1] + (dims[x] - 1)

    def rec(x: int, rest: int, base: int):
        if x == len(dims):
            if rest == 0:
                yield base
            return
        n = dims[x]
        for d in range(n):
            tm = (n - 1) - 2 * d
            r = rest - tm
            if -hi[x + 1] <= r <= hi[x + 1]:
                yield from rec(x + 1, r, base + d * strides[x])

    yield from rec(0, target, 0)


def magnetization_sector(space: SpinSpace, M: Union[Fraction, int, float, str]) -> SectorBasis:
    """All product states with Σ_x m_x = M, ascending index order."""
    M = Fraction(M).limit_denominator(2) if isinstance(M, float) else Fraction(M)
    if (2 * M).denominator != 1:
        raise EmptySectorError(f"magnetization {M} is not a half-integer")
    target = int(2 * M)
    if space.total_dim <= setting("SPINLAB_SCAN_CUTOFF"):
        states = np.flatnonzero(space.twice_magnetization == target).astype(np.int64)
    else:
        states = np.fromiter(_compositions(space, target), dtype=np.int64)
    if states.size == 0:
        raise EmptySectorError(f"magnetization {M} is not achievable in {space.site_dims}")
    states.setflags(write=False)
    return SectorBasis(space, ("M", M), states)


def all_sectors(space: SpinSpace) -> List[SectorBasis]:
    return [magnetization_sector(space, M) for M in reversed(achievable_magnetizations(space))]


def restrict(op: MatrixLike, sector: SectorBasis, target: Optional[SectorBasis] = None) -> sp.csr_matrix:
    """Matrix elements <target|op|sector> (target defaults to sector)."""
    m = op.matrix if isinstance(op, SparseOperator) else sp.csr_matrix(op)
    rows = (target or sector).states
    return m[rows][:, sector.states].tocsr()


def lift(vectors: np.ndarray, sector: SectorBasis) -> np.ndarray:
    """Re-embed sector-coordinate vectors (columns) into the full space."""
    vectors = np.asarray(vectors)
    out = np.zeros((sector.parent.total_dim,) + vectors.shape[1:], dtype=np.result_type(vectors, np.complex128))
    out[sector.states] = vectors
    return out


# ---------------------------------------------------------------------------
# Operator bases and lattice symmetries
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _operator_basis(n: int) -> Tuple[np.ndarray, ...]:
    mats: List[np.ndarray] = []
    for j in range(n):
        for k in range(j + 1, n):
            sym = np.zeros((n, n), dtype=np.complex128)
            sym[j, k] = sym[k, j] = 1
            asym = np.zeros((n, n), dtype=np.complex128)
            asym[j, k], asym[k, j] = -1j, 1j
            mats += [sym, asym]
    for l in range(1, n):
        d = np.zeros(n)
        d[:l] = 1
        d[l] = -l
        mats.append(np.diag(d / l).astype(np.complex128))
    for a in mats:
        a.setflags(write=False)
    return tuple(mats)


def operator_basis(n: int) -> Tuple[np.ndarray, ...]:
    """Generalized Gell-Mann basis of traceless Hermitian n×n matrices, each of unit operator norm.

    For n = 2 this is (σ¹, σ², σ³).
    """
    if n < 2:
        raise DomainError("operator basis needs n >= 2")
    return _operator_basis(int(n))


def translation_operator(space: SpinSpace) -> SparseOperator:
    """Unitary moving the state of site x to site x+1 (mod L); needs equal site dimensions."""
    if len(set(space.site_dims)) != 1:
        raise DomainError("translation needs a uniform spin space")
    L, n = space.n_sites, space.site_dims[0]
    idx = np.arange(space.total_dim, dtype=np.int64)
    digits = np.stack(np.unravel_index(idx, space.site_dims), axis=1)
    shifted = np.roll(digits, 1, axis=1)
    new = np.ravel_multi_index(tuple(shifted.T), space.site_dims)
    T = sp.csr_matrix((np.ones(space.total_dim, dtype=np.complex128), (new, idx)), shape=(space.total_dim,) * 2)
    return SparseOperator(T)


def particle_sector(space: SpinSpace, n: int) -> SectorBasis:
    """Spin-1/2 sector with n down spins, i.e. M = |V|/2 − n."""
    if set(space.site_dims) != {2}:
        raise DomainError("particle sectors are defined for spin-1/2 spaces")
    if not 0 <= n <= space.n_sites:
        raise EmptySectorError(f"{n} particles do not fit on {space.n_sites} sites")
    sector = magnetization_sector(space, Fraction(space.n_sites, 2) - n)
    return SectorBasis(space, ("n", Fraction(n)), sector.states)
