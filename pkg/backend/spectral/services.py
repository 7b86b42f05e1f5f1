"""Hermitian eigensolvers: dense LAPACK below the cutoff, Lanczos with full
reorthogonalization and locking above it, plus sector restriction and gaps."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from hilbert.services import MatrixLike, SectorBasis, SparseOperator, as_operator, restrict
from spinlab.conf import setting
from spinlab.errors import ConvergenceError, DegenerateSpectrumError, DomainError, ResourceError, SectorLeakError

log = logging.getLogger(__name__)

# weight of the fixed-seed component mixed into the all-ones start vector
START_PERTURBATION = 0.5
START_SEED = 0


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    eigenvectors: Optional[np.ndarray] = None
    sector: Optional[tuple] = None
    residuals: Optional[np.ndarray] = None
    method: str = "dense"

    @property
    def n_levels(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def ground_energy(self) -> float:
        return float(self.eigenvalues[0])


@dataclass
class GapReport:
    ground_energy: float
    ground_degeneracy: int
    gap: float


def _matrix(H: MatrixLike) -> sp.csr_matrix:
    op = as_operator(H)
    return op.real_matrix()


def _residuals(A, values: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    if vectors.size == 0:
        return np.zeros(0)
    R = A @ vectors - vectors * values[None, :]
    return np.linalg.norm(R, axis=0)


def _reorthonormalize_blocks(values: np.ndarray, vectors: np.ndarray, tol: float) -> np.ndarray:
    """QR inside each degenerate block so the columns stay orthonormal."""
    out = vectors.copy()
    start = 0
    for k in range(1, values.size + 1):
        if k == values.size or values[k] - values[start] > tol:
            if k - start > 1:
                Q, R = np.linalg.qr(out[:, start:k])
                # fix signs so the diagonal of R is nonnegative
                d = np.sign(np.real(np.diag(R)))
                d[d == 0] = 1
                out[:, start:k] = Q * d[None, :]
            start = k
    return out


def full_spectrum(H: MatrixLike, want_vectors: bool = False) -> SpectrumReport:
    """Every eigenpair by dense Hermitian diagonalization."""
    A = _matrix(H)
    dim = A.shape[0]
    cutoff = setting("SPINLAB_DENSE_CUTOFF")
    if dim > cutoff:
        raise ResourceError("dense diagonalization refused; use extremal_eigs for the lowest levels",
                            dim=dim, cutoff=cutoff)
    t0 = time.perf_counter()
    dense = A.toarray()
    if not want_vectors:
        values = sla.eigh(dense, eigvals_only=True)
        log.debug("dense spectrum", extra={"dim": dim, "seconds": round(time.perf_counter() - t0, 4)})
        return SpectrumReport(np.asarray(values, dtype=float), method="dense")
    values, vectors = sla.eigh(dense)
    vectors = _reorthonormalize_blocks(values, vectors, setting("SPINLAB_DEGENERACY_TOL"))
    log.debug("dense eigenpairs", extra={"dim": dim, "seconds": round(time.perf_counter() - t0, 4)})
    return SpectrumReport(np.asarray(values, dtype=float), vectors, residuals=_residuals(A, values, vectors))


def start_vector(dim: int, dtype=float, perturbed: bool = False) -> np.ndarray:
    """Normalized all-ones; `perturbed` mixes in a fixed-seed random component.

    The plain all-ones vector is orthogonal to every level outside the fully
    symmetric momentum and reflection sectors. extremal_eigs starts from it and
    switches to the perturbed vector when a lower level turns up outside its reach.
    """
    v = np.ones(dim) / np.sqrt(dim)
    if perturbed:
        rng = np.random.default_rng(START_SEED)
        v = v + START_PERTURBATION * rng.standard_normal(dim) / np.sqrt(dim)
    return (v / np.linalg.norm(v)).astype(dtype)


def _project_out(v: np.ndarray, locked: np.ndarray) -> np.ndarray:
    if locked.shape[1]:
        for _ in range(2):
            v = v - locked @ (locked.conj().T @ v)
    return v


def _lanczos_lowest(A, locked: np.ndarray, start: np.ndarray, tol: float, maxiter: int
                    ) -> Tuple[float, np.ndarray, float, int]:
    """Lowest eigenpair of A on the orthogonal complement of `locked`."""
    n = A.shape[0]
    m_max = min(maxiter, n - locked.shape[1])
    q = _project_out(start.copy(), locked)
    nrm = np.linalg.norm(q)
    if nrm < 1e-10:
        # start vector lies in the locked span; fall back to a unit vector outside it
        for i in range(n):
            e = np.zeros(n, dtype=start.dtype)
            e[i] = 1
            q = _project_out(e, locked)
            nrm = np.linalg.norm(q)
            if nrm > 1e-6:
                break
    q = q / nrm
    Q = np.zeros((n, m_max), dtype=A.dtype if np.iscomplexobj(A.data) else start.dtype)
    alphas: List[float] = []
    betas: List[float] = []
    best = np.inf
    for j in range(m_max):
        Q[:, j] = q
        w = A @ q
        alpha = float(np.real(np.vdot(q, w)))
        alphas.append(alpha)
        w = w - alpha * q
        if j:
            w = w - betas[-1] * Q[:, j - 1]
        for _ in range(2):
            w = w - Q[:, : j + 1] @ (Q[:, : j + 1].conj().T @ w)
            w = _project_out(w, locked)
        beta = float(np.linalg.norm(w))
        last = j == m_max - 1
        if j % 5 == 4 or last or beta < 1e-13:
            if j == 0:
                theta, S = np.array([alphas[0]]), np.ones((1, 1))
            else:
                theta, S = sla.eigh_tridiagonal(np.array(alphas), np.array(betas))
            res = abs(beta * S[-1, 0])
            best = min(best, res)
            if res < tol or beta < 1e-13 or (last and m_max == n - locked.shape[1]):
                v = Q[:, : j + 1] @ S[:, 0]
                return float(theta[0]), v / np.linalg.norm(v), res, j + 1
        betas.append(beta)
        q = w / beta
    raise ConvergenceError("Lanczos did not converge", best_residual=float(best), iterations=m_max)


def _lock(A, start: np.ndarray, k: int, tol: float, maxiter: int) -> Tuple[np.ndarray, int]:
    locked = np.zeros((A.shape[0], 0), dtype=start.dtype)
    iterations = 0
    for _ in range(k):
        _, v, _, its = _lanczos_lowest(A, locked, start, tol, maxiter)
        iterations += its
        locked = np.column_stack([locked, v])
    return locked, iterations


def _misses_lower_level(A, locked: np.ndarray, start: np.ndarray, tol: float, maxiter: int) -> bool:
    """True when the complement of `locked` holds a level below the highest locked one."""
    small = locked.conj().T @ (A @ locked)
    top = float(np.linalg.eigvalsh((small + small.conj().T) / 2).max())
    theta, _, _, _ = _lanczos_lowest(A, locked, start, tol, maxiter)
    # a Ritz value bounds the true minimum from above
    return theta < top - 1e-8 * max(1.0, abs(top))


def extremal_eigs(H: MatrixLike, k: int = 1, tol: Optional[float] = None,
                  maxiter: Optional[int] = None, want_vectors: bool = True) -> SpectrumReport:
    """k lowest eigenpairs by restarted Lanczos, locking one converged vector per pass.

    Locking lets degenerate levels appear with their multiplicity, which a
    single Krylov space cannot resolve.
    """
    op = as_operator(H)
    if not op.hermitian:
        op = SparseOperator(op.matrix, hermitian=True)
    A = op.real_matrix()
    n = A.shape[0]
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    if k > n:
        raise DomainError(f"asked for {k} levels of a {n}-dimensional operator")
    tol = setting("SPINLAB_LANCZOS_TOL") if tol is None else tol
    maxiter = setting("SPINLAB_LANCZOS_MAXITER") if maxiter is None else maxiter
    dtype = np.complex128 if np.iscomplexobj(A.data) else float
    t0 = time.perf_counter()
    locked, iterations = _lock(A, start_vector(n, dtype), k, tol, maxiter)
    fallback = start_vector(n, dtype, perturbed=True)
    if k < n and _misses_lower_level(A, locked, fallback, tol, maxiter):
        log.debug("all-ones start missed a level", extra={"dim": n, "k": k})
        locked, more = _lock(A, fallback, k, tol, maxiter)
        iterations += more
    # Rayleigh-Ritz on the locked span
    small = locked.conj().T @ (A @ locked)
    small = (small + small.conj().T) / 2
    values, U = sla.eigh(small)
    vectors = locked @ U
    residuals = _residuals(A, values, vectors)
    log.debug("lanczos", extra={"dim": n, "k": k, "iterations": iterations, "tol": tol,
                                "max_residual": float(residuals.max()),
                                "seconds": round(time.perf_counter() - t0, 4)})
    bad = residuals.max()
    if bad >= max(tol, 1e-9) * 10:
        raise ConvergenceError("Lanczos eigenpairs failed the residual check", best_residual=float(bad),
                               iterations=iterations)
    return SpectrumReport(values, vectors if want_vectors else None, residuals=residuals, method="lanczos")


def lowest_levels(H: MatrixLike, k: int, want_vectors: bool = False) -> SpectrumReport:
    """Dense below the cutoff (truncated to k levels), Lanczos above."""
    n = as_operator(H).dim
    if n <= setting("SPINLAB_DENSE_CUTOFF"):
        rep = full_spectrum(H, want_vectors)
        return truncate(rep, k)
    return extremal_eigs(H, min(k, n), want_vectors=want_vectors)


def truncate(report: SpectrumReport, k: int) -> SpectrumReport:
    vecs = None if report.eigenvectors is None else report.eigenvectors[:, :k]
    res = None if report.residuals is None else report.residuals[:k]
    return SpectrumReport(report.eigenvalues[:k], vecs, report.sector, res, report.method)


def check_sector_invariance(H: MatrixLike, sector: SectorBasis, tol: float = 1e-10) -> None:
    """Raise SectorLeakError on the first matrix element coupling the sector to its complement."""
    m = as_operator(H).matrix
    rows = m[sector.states].tocoo()
    outside = ~np.isin(rows.col, sector.states)
    leaks = outside & (np.abs(rows.data) > tol)
    if leaks.any():
        i = int(np.flatnonzero(leaks)[0])
        raise SectorLeakError(f"operator does not preserve sector {sector.label}",
                              row=int(sector.states[rows.row[i]]), col=int(rows.col[i]), value=complex(rows.data[i]))


def sector_spectrum(H: MatrixLike, sector: SectorBasis, k: Union[int, str, None] = "all",
                    want_vectors: bool = False) -> SpectrumReport:
    """Spectrum of H restricted to a sector; vectors are in sector coordinates."""
    check_sector_invariance(H, sector)
    block = SparseOperator(restrict(as_operator(H), sector), hermitian=True)
    if k in (None, "all"):
        rep = full_spectrum(block, want_vectors)
    else:
        rep = lowest_levels(block, int(k), want_vectors)
    rep.sector = sector.label
    return rep


def spectral_gap(report: SpectrumReport, degeneracy_tol: Optional[float] = None) -> GapReport:
    tol = setting("SPINLAB_DEGENERACY_TOL") if degeneracy_tol is None else degeneracy_tol
    ev = np.sort(np.asarray(report.eigenvalues, dtype=float))
    if ev.size == 0:
        raise DegenerateSpectrumError("empty spectrum has no gap")
    E0 = float(ev[0])
    above = ev[ev > E0 + tol]
    if above.size == 0:
        raise DegenerateSpectrumError("fewer than two distinct levels", degeneracy=int(ev.size))
    return GapReport(E0, int(ev.size - above.size), float(above[0] - E0))


def ground_state(H: MatrixLike, degeneracy_tol: Optional[float] = None) -> Tuple[float, np.ndarray, GapReport]:
    """Unique ground state (E0, Ω) and the gap; DegenerateSpectrumError when it is not unique."""
    rep = lowest_levels(H, 2, want_vectors=True)
    gap = spectral_gap(rep, degeneracy_tol)
    if gap.ground_degeneracy != 1:
        raise DegenerateSpectrumError("ground state is not unique", degeneracy=gap.ground_degeneracy)
    return gap.ground_energy, rep.eigenvectors[:, 0], gap


def merge_reports(reports: Sequence[SpectrumReport]) -> SpectrumReport:
    """Union of sector spectra, reports taken in the order given; stable sort keeps ties in that order."""
    if not reports:
        return SpectrumReport(np.zeros(0), method="merged")
    values = np.concatenate([r.eigenvalues for r in reports])
    order = np.argsort(values, kind="stable")
    return SpectrumReport(values[order], method="merged")
