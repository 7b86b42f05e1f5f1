"""Finite-size stability checks around a frustration-free Hamiltonian."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla

from hamiltonians.services import Interaction, assemble
from hilbert.services import SpinSpace, hermitian_deviation, operator_norm
from spectral.services import SpectrumReport, lowest_levels, spectral_gap
from spinlab.conf import setting
from spinlab.errors import DegenerateSpectrumError, DomainError
from spinlab.pool import pool_map

log = logging.getLogger(__name__)

Builder = Callable[[int], Interaction]

# levels tracked per grid point; enough to see past a spin-1 triplet
TRACKED_LEVELS = 4


@dataclass
class FrustrationFreeReport:
    min_eigenvalue: float
    nonnegative: bool
    annihilation: float
    degeneracy: int
    c: float
    V0_size: int

    @property
    def a0_holds(self) -> bool:
        return self.nonnegative and self.degeneracy == 1 and self.c >= self.V0_size


def frustration_free_check(phi: Interaction, space: SpinSpace, V0_size: int,
                           require_unique: bool = True) -> FrustrationFreeReport:
    """H⁰ ≥ 0, H⁰Ω⁰ = 0 and the largest c with H⁰ ≥ c(1 − |Ω⁰⟩⟨Ω⁰|)."""
    H = assemble(phi, space)
    k = min(H.dim, TRACKED_LEVELS + 2)
    rep = lowest_levels(H, k, want_vectors=True)
    tol = setting("SPINLAB_DEGENERACY_TOL")
    E0 = rep.ground_energy
    omega = rep.eigenvectors[:, 0]
    annihilation = float(np.linalg.norm(H @ omega))
    degeneracy = int(np.sum(rep.eigenvalues <= E0 + tol))
    if degeneracy > 1 and require_unique:
        raise DegenerateSpectrumError("zero-energy ground state is not unique", degeneracy=degeneracy)
    try:
        c = spectral_gap(rep, tol).gap if abs(E0) <= tol else 0.0
    except DegenerateSpectrumError:
        c = math.nan
    report = FrustrationFreeReport(E0, E0 >= -tol, annihilation, degeneracy, c, V0_size)
    if report.nonnegative and not report.a0_holds:
        log.warning("frustration-free gap below the required bound",
                    extra={"c": c, "V0_size": V0_size, "dim": H.dim})
    return report


def _hermitian(name: str, m) -> np.ndarray:
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DomainError(f"{name} must be a square matrix")
    if hermitian_deviation(m) > setting("SPINLAB_HERMITIAN_TOL"):
        raise DomainError(f"{name} is not Hermitian")
    return (m + m.conj().T) / 2


def relative_bound_alpha(phi_r, h, tol: float = 1e-12) -> float:
    """Smallest α with |⟨ψ, φψ⟩| ≤ α ‖h^{1/2}ψ‖² for every ψ; math.inf when none exists."""
    phi_r, h = _hermitian("perturbation", phi_r), _hermitian("h", h)
    if phi_r.shape != h.shape:
        raise DomainError(f"shape mismatch {phi_r.shape} vs {h.shape}")
    w, U = sla.eigh(h)
    scale = max(1.0, float(np.abs(w).max()))
    if w.min() < -tol * scale:
        raise DomainError("h must be positive semidefinite")
    kernel = w <= tol * scale
    K, R = U[:, kernel], U[:, ~kernel]
    if K.shape[1] and np.abs(K.conj().T @ phi_r).max() > tol * max(1.0, np.abs(phi_r).max()):
        return math.inf
    if not R.shape[1]:
        return 0.0
    inv_sqrt = 1 / np.sqrt(w[~kernel])
    pencil = inv_sqrt[:, None] * (R.conj().T @ phi_r @ R) * inv_sqrt[None, :]
    return float(np.abs(sla.eigvalsh(pencil)).max())


def bounded_beta(phi_b: Interaction) -> float:
    """max_x ‖φ^(b)_x‖ over the bounded part of a perturbation."""
    return max((t.norm for t in phi_b), default=0.0)


@dataclass
class StabilitySweep:
    Ls: List[int]
    couplings: List[float]
    gaps: Dict[Tuple[int, float], float] = field(default_factory=dict)
    ground_energies: Dict[Tuple[int, float], float] = field(default_factory=dict)
    ground_degeneracies: Dict[Tuple[int, float], int] = field(default_factory=dict)
    levels: Dict[Tuple[int, float], np.ndarray] = field(default_factory=dict)
    perturbation_norms: Dict[int, float] = field(default_factory=dict)
    weyl_ok: Dict[Tuple[int, float], bool] = field(default_factory=dict)

    def stable_range(self) -> List[float]:
        """Couplings whose gap stays above half the unperturbed gap at the largest L."""
        L = max(self.Ls)
        base = self.gaps[(L, 0.0)]
        return [lam for lam in self.couplings if self.gaps[(L, lam)] > base / 2]

    def continuity_ok(self, tol: float = 1e-8) -> bool:
        for L in self.Ls:
            lams = sorted(self.couplings)
            for a, b in zip(lams, lams[1:]):
                if abs(self.gaps[(L, b)] - self.gaps[(L, a)]) > 2 * self.perturbation_norms[L] * abs(b - a) + tol:
                    return False
        return True

    def rows(self):
        for L in self.Ls:
            for lam in self.couplings:
                key = (L, lam)
                yield L, lam, self.ground_energies[key], self.ground_degeneracies[key], self.gaps[key]


def gap_sweep(base: Builder, pert: Builder, lambdas: Sequence[float], Ls: Sequence[int], spin=1,
              threads: Optional[int] = None) -> StabilitySweep:
    """Gap and ground degeneracy of H⁰ + λΣΦ_x over an (L, λ) grid."""
    lambdas = sorted({float(lam) for lam in lambdas} | {0.0})
    Ls = sorted(int(L) for L in Ls)
    sweep = StabilitySweep(Ls, lambdas)
    tol = setting("SPINLAB_DEGENERACY_TOL")
    for L in Ls:
        space = SpinSpace.uniform(L, spin)
        H0, V = assemble(base(L), space), assemble(pert(L), space)
        sweep.perturbation_norms[L] = operator_norm(V)
        k = min(H0.dim, TRACKED_LEVELS)

        def job(lam, H0=H0, V=V, k=k):
            H = H0 if lam == 0 else H0 + V * lam
            return lowest_levels(H, k).eigenvalues

        results = pool_map(job, lambdas, threads)
        for lam, ev in zip(lambdas, results):
            gap = spectral_gap_or_zero(ev, tol)
            key = (L, lam)
            sweep.levels[key] = ev
            sweep.gaps[key] = gap
            sweep.ground_energies[key] = float(ev[0])
            sweep.ground_degeneracies[key] = int(np.sum(ev <= ev[0] + tol))
        ref = sweep.levels[(L, 0.0)]
        for lam in lambdas:
            dev = np.abs(sweep.levels[(L, lam)] - ref).max()
            sweep.weyl_ok[(L, lam)] = bool(dev <= abs(lam) * sweep.perturbation_norms[L] + 1e-9)
        log.info("gap sweep", extra={"L": L, "dim": space.total_dim, "points": len(lambdas)})
    return sweep


def spectral_gap_or_zero(levels: np.ndarray, tol: float) -> float:
    """Gap above the ground level, 0 when every tracked level is degenerate with it."""
    try:
        return spectral_gap(SpectrumReport(np.asarray(levels)), tol).gap
    except DegenerateSpectrumError:
        return 0.0


@dataclass
class GapTrendRow:
    L: int
    ground_energy: float
    degeneracy: int
    gap: float


def gap_trend(base: Builder, Ls: Sequence[int], spin=1, threads: Optional[int] = None) -> List[GapTrendRow]:
    """Finite-size gap of H⁰ against L."""
    tol = setting("SPINLAB_DEGENERACY_TOL")

    def job(L):
        H = assemble(base(L), SpinSpace.uniform(L, spin))
        ev = lowest_levels(H, min(H.dim, TRACKED_LEVELS + 2)).eigenvalues
        return GapTrendRow(L, float(ev[0]), int(np.sum(ev <= ev[0] + tol)), spectral_gap_or_zero(ev, tol))

    return pool_map(job, sorted(Ls), threads)
