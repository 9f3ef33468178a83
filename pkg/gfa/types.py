"""
Shared domain types

Containers are frozen dataclasses holding read-only numpy arrays, so they can
be shared across threads and joblib workers. Algorithms live in
``gfa.analysis`` and ``gfa.synthesis``; this module only validates.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from scipy.linalg import eigvalsh, toeplitz

from gfa.config import Tolerances, settings
from gfa.errors import (
    NonFiniteError,
    PreconditionError,
    PSDViolationError,
    SymmetryError,
)
from gfa.models import ValidationReport

logger = logging.getLogger(__name__)

ENSEMBLE_KINDS = ("replicates", "timeseries")


def _frozen(values, ndim: Optional[int] = None) -> np.ndarray:
    arr = np.array(values, dtype=float, copy=True)
    if ndim is not None and arr.ndim != ndim:
        raise PreconditionError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


def orient_columns(vectors: np.ndarray, tol: float = 0.0) -> np.ndarray:
    """
    Flip column signs so the first nonzero component of each is positive

    Args:
        vectors: n x m matrix of column vectors
        tol: magnitude below which a component counts as zero

    Returns:
        A new matrix with the convention applied
    """
    out = np.array(vectors, dtype=float, copy=True)
    if out.ndim == 1:
        return orient_columns(out[:, None], tol)[:, 0]
    for j in range(out.shape[1]):
        nonzero = np.flatnonzero(np.abs(out[:, j]) > tol)
        if nonzero.size and out[nonzero[0], j] < 0:
            out[:, j] = -out[:, j]
    return out


def order_eigenpairs(vals: np.ndarray, vecs: np.ndarray, tol: float = 0.0) -> Tuple[np.ndarray, np.ndarray]:
    """
    Sort eigenpairs by descending eigenvalue with sign-fixed eigenvectors

    Eigenvalues within tol of the first of their run count as tied; tied
    pairs are ordered by descending lexicographic order of their vectors.
    """
    vals = np.asarray(vals, dtype=float)
    order = np.argsort(-vals, kind="stable")
    vals, vecs = vals[order].copy(), orient_columns(np.asarray(vecs, dtype=float)[:, order])
    start = 0
    for i in range(1, vals.size + 1):
        if i < vals.size and vals[start] - vals[i] <= tol:
            continue
        if i - start > 1:
            perm = np.lexsort(-vecs[::-1, start:i])
            vecs[:, start:i] = vecs[:, start:i][:, perm]
            vals[start:i] = vals[start:i][perm]
        start = i
    return vals, vecs


@dataclass(frozen=True)
class SampleEnsemble:
    """Observations of y: rows are the cross-section index, columns replicates or time"""
    data: np.ndarray
    kind: str = "replicates"
    seed_info: Optional[Dict[str, Any]] = None

    def __post_init__(self):
        data = _frozen(self.data)
        if data.ndim == 1:
            data = _frozen(data[:, None])
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise PreconditionError(f"ensemble must be a non-empty N x M matrix, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise NonFiniteError("ensemble contains non-finite entries")
        if self.kind not in ENSEMBLE_KINDS:
            raise PreconditionError(f"kind must be one of {ENSEMBLE_KINDS}, got '{self.kind}'")
        object.__setattr__(self, "data", data)

    @property
    def N(self) -> int:
        return self.data.shape[0]

    @property
    def M(self) -> int:
        return self.data.shape[1]

    def second_moment(self, n: Optional[int] = None) -> np.ndarray:
        """Uncentered sample covariance y y^T / M of the first n rows"""
        n = self.N if n is None else n
        block = self.data[:n]
        return block @ block.T / self.M


@dataclass(frozen=True)
class CovarianceSupplier:
    """
    Source of nested covariance truncations Sigma_n

    ``eval(n)`` returns the leading n x n block. Build instances through the
    classmethods rather than the raw constructor.
    """
    source: str
    max_n: int
    builder: Callable[[int], np.ndarray] = field(repr=False, compare=False)
    label: str = ""

    def __post_init__(self):
        if self.source not in ("analytic", "sample"):
            raise PreconditionError(f"source must be 'analytic' or 'sample', got '{self.source}'")
        if self.max_n < 1:
            raise PreconditionError("max_n must be at least 1")

    def eval(self, n: int) -> np.ndarray:
        if not 1 <= n <= self.max_n:
            raise PreconditionError(f"truncation n={n} outside [1, {self.max_n}]")
        return np.asarray(self.builder(int(n)), dtype=float)

    @classmethod
    def from_matrix(cls, matrix, source: str = "sample", label: str = "matrix") -> "CovarianceSupplier":
        full = _frozen(matrix, ndim=2)
        if full.shape[0] != full.shape[1]:
            raise PreconditionError(f"covariance must be square, got shape {full.shape}")
        return cls(source=source, max_n=full.shape[0], builder=lambda n: full[:n, :n].copy(), label=label)

    @classmethod
    def from_lags(cls, lags, source: str = "sample", label: str = "toeplitz") -> "CovarianceSupplier":
        """Toeplitz supplier: Sigma_n[i, j] = lags[|i - j|]"""
        lags = _frozen(lags, ndim=1)
        return cls(source=source, max_n=lags.size, builder=lambda n: toeplitz(lags[:n]), label=label)

    @classmethod
    def identity(cls, max_n: int = None) -> "CovarianceSupplier":
        return cls(source="analytic", max_n=max_n or settings.MAX_N, builder=np.eye, label="identity")

    @classmethod
    def exchangeable(cls, sigma2: float, rho: float, max_n: int = None) -> "CovarianceSupplier":
        """Variance sigma2 on the diagonal, covariance rho everywhere else"""
        def build(n: int) -> np.ndarray:
            return (sigma2 - rho) * np.eye(n) + rho * np.ones((n, n))

        return cls(source="analytic", max_n=max_n or settings.MAX_N, builder=build,
                   label=f"exchangeable(sigma2={sigma2}, rho={rho})")

    @classmethod
    def from_ensemble(cls, ensemble: SampleEnsemble) -> "CovarianceSupplier":
        return cls.from_matrix(ensemble.second_moment(), source="sample", label="sample")


@dataclass(frozen=True)
class EigenProfile:
    """Top-m eigenpairs of Sigma_n along an increasing grid of truncations"""
    grid: Tuple[int, ...]
    eigvals: np.ndarray             # G x m, descending within each row
    eigvecs: Tuple[np.ndarray, ...]  # one n x m block per grid point

    def __post_init__(self):
        grid = tuple(int(n) for n in self.grid)
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise PreconditionError(f"grid must be strictly increasing, got {grid}")
        eigvals = _frozen(self.eigvals, ndim=2)
        if eigvals.shape[0] != len(grid):
            raise PreconditionError("one eigenvalue row per grid point is required")
        eigvecs = tuple(_frozen(v, ndim=2) for v in self.eigvecs)
        for n, v in zip(grid, eigvecs):
            if v.shape != (n, eigvals.shape[1]):
                raise PreconditionError(f"eigenvector block at n={n} has shape {v.shape}")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "eigvals", eigvals)
        object.__setattr__(self, "eigvecs", eigvecs)

    @property
    def m(self) -> int:
        return self.eigvals.shape[1]

    def weyl_defect(self) -> float:
        """Largest relative decrease of any tracked eigenvalue along the grid"""
        if len(self.grid) < 2:
            return 0.0
        drops = self.eigvals[:-1] - self.eigvals[1:]
        scale = np.maximum(np.abs(self.eigvals[:-1]), 1.0)
        return float(max(0.0, np.max(drops / scale)))

    def orth_defect(self) -> float:
        return float(max(np.max(np.abs(v.T @ v - np.eye(self.m))) for v in self.eigvecs))


@dataclass(frozen=True)
class GFADecomposition:
    """Sigma_N split as F F^T + idiosyncratic covariance"""
    q: int
    loadings: np.ndarray
    idio_cov: np.ndarray
    growth_report: Any
    sli_report: Any = None

    def __post_init__(self):
        loadings = _frozen(self.loadings, ndim=2)
        idio = _frozen(self.idio_cov, ndim=2)
        if loadings.shape[1] != self.q or idio.shape != (loadings.shape[0],) * 2:
            raise PreconditionError("loadings and idiosyncratic covariance dimensions disagree with q")
        object.__setattr__(self, "loadings", loadings)
        object.__setattr__(self, "idio_cov", idio)

    @property
    def aggregate_cov(self) -> np.ndarray:
        return self.loadings @ self.loadings.T

    @property
    def total_cov(self) -> np.ndarray:
        return self.aggregate_cov + self.idio_cov


@dataclass(frozen=True)
class AveragingSequence:
    """Weight vector a_n, implicitly zero beyond its length"""
    weights: np.ndarray
    label: str
    norm2: float = field(init=False)

    def __post_init__(self):
        weights = _frozen(self.weights, ndim=1)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "norm2", float(np.linalg.norm(weights)))

    @property
    def n(self) -> int:
        return self.weights.size

    def apply(self, data: np.ndarray) -> np.ndarray:
        """a_n^T y for each column of data (rows beyond n are ignored)"""
        data = np.asarray(data, dtype=float)
        if data.shape[0] < self.n:
            raise PreconditionError(f"averaging sequence of length {self.n} needs at least {self.n} rows")
        return self.weights @ data[:self.n]


@dataclass(frozen=True)
class FactorRealization:
    """Realized factors and the aggregate / idiosyncratic split of a sample"""
    factors: np.ndarray          # q x M, orthonormalized
    aggregate: np.ndarray        # N x M
    idiosyncratic: np.ndarray    # N x M
    R: np.ndarray                # q x q, unit upper-triangular
    loadings: np.ndarray         # N x q, F' with aggregate = F' @ factors
    z: np.ndarray                # q x M, raw averages A y

    def __post_init__(self):
        for name in ("factors", "aggregate", "idiosyncratic", "R", "loadings", "z"):
            object.__setattr__(self, name, _frozen(getattr(self, name), ndim=2))

    @property
    def q(self) -> int:
        return self.factors.shape[0]


@dataclass(frozen=True)
class LineComponent:
    omega: float
    v: Union[float, np.ndarray]
    w: Union[float, np.ndarray]


@dataclass(frozen=True)
class PDLineModel:
    """Spectral lines of the purely deterministic part with amplitude estimates"""
    lines: Tuple[LineComponent, ...]

    def __post_init__(self):
        lines = tuple(self.lines)
        omegas = [ln.omega for ln in lines]
        if any(not 0.0 <= om < np.pi for om in omegas):
            raise PreconditionError(f"line frequencies must lie in [0, pi), got {omegas}")
        if any(b <= a for a, b in zip(omegas, omegas[1:])):
            raise PreconditionError(f"line frequencies must be distinct and ascending, got {omegas}")
        object.__setattr__(self, "lines", lines)

    @property
    def nu(self) -> int:
        return len(self.lines)

    @property
    def frequencies(self) -> List[float]:
        return [ln.omega for ln in self.lines]

    def reconstruct(self, length: int) -> np.ndarray:
        """
        Evaluate sum_i v_i cos(omega_i k) + w_i sin(omega_i k) for k = 1..length

        Returns:
            Vector of the given length, or a length x M matrix when the
            amplitudes are per-replicate arrays
        """
        k = np.arange(1, length + 1, dtype=float)
        out = None
        for ln in self.lines:
            v = np.asarray(ln.v, dtype=float)
            w = np.asarray(ln.w, dtype=float)
            term = np.multiply.outer(np.cos(ln.omega * k), v) + np.multiply.outer(np.sin(ln.omega * k), w)
            out = term if out is None else out + term
        return np.zeros(length) if out is None else out


@dataclass(frozen=True)
class SeparableField:
    """Space-time sample y(k, t), N rows by T columns"""
    data: np.ndarray
    space_model: Optional[CovarianceSupplier] = None
    time_model: Optional[str] = None
    truth: Optional[Dict[str, np.ndarray]] = field(default=None, compare=False)

    def __post_init__(self):
        data = _frozen(self.data)
        if data.ndim == 1:
            data = _frozen(data[:, None])
        if data.ndim != 2 or min(data.shape) < 1:
            raise PreconditionError(f"field must be a non-empty N x T matrix, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise NonFiniteError("field contains non-finite entries")
        object.__setattr__(self, "data", data)

    @property
    def N(self) -> int:
        return self.data.shape[0]

    @property
    def T(self) -> int:
        return self.data.shape[1]

    def scaled(self, c: float) -> "SeparableField":
        return SeparableField(self.data * c, self.space_model, self.time_model, self.truth)


def validate_covariance(c: CovarianceSupplier, n: int, tolerances: Tolerances = None) -> ValidationReport:
    """
    Check symmetry, positive semidefiniteness and nestedness of Sigma_n

    Args:
        c: Covariance supplier
        n: Truncation size, at most c.max_n
        tolerances: Overrides settings.TOLERANCES

    Returns:
        ValidationReport with the symmetry defect, the minimum eigenvalue and
        whether Sigma_{n//2} is the leading block of Sigma_n
    """
    tol = tolerances or settings.TOLERANCES
    if n > c.max_n:
        raise PreconditionError(f"n={n} exceeds supplier max_n={c.max_n}")
    sigma = c.eval(n)
    if not np.all(np.isfinite(sigma)):
        raise NonFiniteError(f"Sigma_{n} contains non-finite entries")

    scale = float(np.max(np.abs(sigma))) if sigma.size else 0.0
    sym_defect = float(np.max(np.abs(sigma - sigma.T)))
    if sym_defect > tol.num * max(scale, 1.0):
        raise SymmetryError(f"Sigma_{n} is not symmetric (max defect {sym_defect:.3g})")

    min_eig = float(eigvalsh(0.5 * (sigma + sigma.T), subset_by_index=[0, 0])[0])
    if min_eig < -tol.psd_rel * scale:
        raise PSDViolationError(f"Sigma_{n} has eigenvalue {min_eig:.6g} below -eps_psd")

    half = n // 2
    nested = True
    if half >= 1:
        nested = bool(np.allclose(c.eval(half), sigma[:half, :half], rtol=0.0, atol=tol.num * max(scale, 1.0)))
    logger.debug("validated %s at n=%d: sym=%.3g min_eig=%.6g nested=%s",
                 c.label, n, sym_defect, min_eig, nested)
    return ValidationReport(n=n, sym_defect=sym_defect, min_eig=min_eig, nested=nested)
