"""Exception hierarchy shared by every spinlab app.

The runs app maps these onto process exit codes; everything else just
raises and lets callers decide.
"""
from __future__ import annotations

from typing import Any, Optional


class SpinlabError(Exception):
    """Base class for every error raised by spinlab services."""


class DomainError(SpinlabError, ValueError):
    """Input outside the domain of an operation."""


class EmptySectorError(DomainError):
    """Requested magnetization / particle number is not achievable."""


class ResourceError(SpinlabError):
    def __init__(self, message: str, *, dim: int, cutoff: int):
        super().__init__(f"{message} (dim={dim}, cutoff={cutoff})")
        self.dim = dim
        self.cutoff = cutoff


class ConvergenceError(SpinlabError):
    def __init__(self, message: str, *, best_residual: float, iterations: int):
        super().__init__(f"{message} (best residual {best_residual:.3e} after {iterations} iterations)")
        self.best_residual = best_residual
        self.iterations = iterations


class SectorLeakError(SpinlabError):
    """Operator couples a sector to its complement."""

    def __init__(self, message: str, *, row: int, col: int, value: complex):
        super().__init__(f"{message}: H[{row},{col}] = {value!r} leaks out of the sector")
        self.row = row
        self.col = col
        self.value = value


class DegenerateSpectrumError(SpinlabError):
    def __init__(self, message: str, *, degeneracy: Optional[int] = None):
        if degeneracy is not None:
            message = f"{message} (degeneracy {degeneracy})"
        super().__init__(message)
        self.degeneracy = degeneracy


class ClassificationError(SpinlabError):
    def __init__(self, message: str, *, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class IncompleteTableError(SpinlabError):
    def __init__(self, message: str, *, missing: Any):
        super().__init__(f"{message}: missing {missing!r}")
        self.missing = missing


class ConjugacyError(SpinlabError):
    def __init__(self, message: str, *, max_deviation: float):
        super().__init__(f"{message} (max eigenvalue deviation {max_deviation:.3e})")
        self.max_deviation = max_deviation


class ConfigError(SpinlabError):
    def __init__(self, message: str, *, line: Optional[int] = None, key: Optional[str] = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key:
            where.append(f"key {key!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.line = line
        self.key = key


class OutputError(SpinlabError):
    """An artifact could not be written."""

    def __init__(self, message: str, *, path: str):
        super().__init__(f"{message}: {path}")
        self.path = path
