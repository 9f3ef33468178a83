"""
Nested eigenvalue profiling and factor-count detection

Builds the limit-PCA decomposition Sigma = F F^T + idiosyncratic part from a
covariance supplier: eigenvalues of growing truncations are tracked along a
geometric grid, indices whose eigenvalues keep growing are counted as
factors, and loadings and averaging sequences are extracted from the top
eigenpairs.
"""
import logging
import math
import warnings
from typing import List, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed
from scipy.linalg import eigh, eigvalsh, qr, solve_triangular

from gfa.config import Tolerances, settings
from gfa.errors import (
    CollinearityWarning,
    DegenerateFactorError,
    InsufficientReplicatesError,
    NoDecompositionError,
    PreconditionError,
    PSDViolationError,
    RankDeficiencyError,
    SupplierInconsistencyError,
    SymmetryError,
)
from gfa.models import GrowthClass, GrowthEntry, GrowthReport, RealizationReport, StrongLIReport
from gfa.types import (
    CovarianceSupplier,
    EigenProfile,
    FactorRealization,
    GFADecomposition,
    SampleEnsemble,
    order_eigenpairs,
)

logger = logging.getLogger(__name__)


def default_grid(N: int, points: int = None) -> List[int]:
    """Geometric grid with ratio 2 ending at N"""
    points = points or settings.GRID_POINTS
    grid = sorted({max(1, N >> (points - 1 - i)) for i in range(points)})
    return grid


def sample_grid(N: int, M: int, points: int = None, m: int = None) -> List[int]:
    """
    Default grid for the second moment of M replicates: doubling up to min(N, M)

    Past n = M the sample bulk edge grows like (1 + sqrt(n / M))^2, so the
    growth statistic no longer separates factors from noise. The cap is
    raised when needed so that the smallest size still holds m eigenvalues.
    """
    points = points or settings.GRID_POINTS
    m = m or settings.TOP_M
    return default_grid(min(N, max(M, m << (points - 1))), points)


def _check_grid(grid: Sequence[int], max_n: int) -> List[int]:
    grid = [int(n) for n in grid]
    if not grid or grid[0] < 1:
        raise PreconditionError("grid must contain positive sizes")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise PreconditionError(f"grid must be strictly increasing, got {grid}")
    if grid[-1] > max_n:
        raise PreconditionError(f"grid maximum {grid[-1]} exceeds supplier max_n={max_n}")
    return grid


def _top_eigenpairs(sigma: np.ndarray, m: int, tol: Tolerances = None) -> Tuple[np.ndarray, np.ndarray]:
    tol = tol or settings.TOLERANCES
    n = sigma.shape[0]
    vals, vecs = eigh(sigma, subset_by_index=[n - m, n - 1])
    return order_eigenpairs(vals, vecs, tol.num * max(1.0, float(np.max(np.abs(vals)))))


def _profile_point(c: CovarianceSupplier, n: int, m: int, tol: Tolerances):
    return _top_eigenpairs(c.eval(n), m, tol)


def eigen_profile(
    c: CovarianceSupplier,
    grid: Sequence[int] = None,
    m: int = None,
    tolerances: Tolerances = None,
    n_jobs: int = None,
) -> EigenProfile:
    """
    Top-m eigenpairs of Sigma_n for each n on the grid

    Args:
        c: Covariance supplier
        grid: Increasing truncation sizes (defaults to default_grid(c.max_n))
        m: Number of eigenpairs tracked, at most min(grid)
        tolerances: Overrides settings.TOLERANCES
        n_jobs: joblib workers for the per-grid eigendecompositions

    Returns:
        EigenProfile with eigenvalues sorted descending

    Raises:
        SupplierInconsistencyError: an eigenvalue decreased along the grid
            beyond the Weyl tolerance, so the truncations are not nested
    """
    tol = tolerances or settings.TOLERANCES
    grid = _check_grid(grid or default_grid(c.max_n), c.max_n)
    m = m or min(settings.TOP_M, grid[0])
    if not 1 <= m <= grid[0]:
        raise PreconditionError(f"m={m} must lie in [1, min(grid)={grid[0]}]")

    logger.info("Profiling %s on grid %s (m=%d)", c.label or c.source, grid, m)
    results = Parallel(n_jobs=n_jobs or settings.N_JOBS)(
        delayed(_profile_point)(c, n, m, tol) for n in grid
    )
    eigvals = np.vstack([vals for vals, _ in results])
    profile = EigenProfile(grid=tuple(grid), eigvals=eigvals, eigvecs=tuple(vecs for _, vecs in results))

    scale = max(1.0, float(np.max(np.abs(eigvals))))
    drops = eigvals[:-1] - eigvals[1:]
    if drops.size and np.max(drops) > tol.weyl_rel * scale:
        g, k = np.unravel_index(int(np.argmax(drops)), drops.shape)
        raise SupplierInconsistencyError(
            f"eigenvalue {k + 1} decreased from {eigvals[g, k]:.6g} (n={grid[g]}) "
            f"to {eigvals[g + 1, k]:.6g} (n={grid[g + 1]}): supplier is not nested"
        )
    return profile


def growth_ratios(values: np.ndarray, grid: Sequence[int], zero: float) -> np.ndarray:
    """
    Per-doubling growth ratios between consecutive grid points

    Values below ``zero`` are clipped to it, so an index that stays at
    numerical zero has ratio 1.

    Args:
        values: G x m (or length G) values along the grid
        grid: the G truncation sizes
        zero: clipping floor

    Returns:
        (G-1) x m ratios (lambda_{n2}/lambda_{n1})^{log 2 / log(n2/n1)}
    """
    vals = np.maximum(np.asarray(values, dtype=float), zero)
    grid = np.asarray(grid, dtype=float)
    exponents = np.log(2.0) / np.log(grid[1:] / grid[:-1])
    if vals.ndim == 1:
        return (vals[1:] / vals[:-1]) ** exponents
    return (vals[1:] / vals[:-1]) ** exponents[:, None]


def detect_factor_count(
    p: EigenProfile,
    gamma: float = None,
    tau: float = None,
    tolerances: Tolerances = None,
) -> Tuple[int, GrowthReport]:
    """
    Count the diverging eigenvalues of an eigen profile

    An index is DIVERGING when its mean per-doubling growth ratio exceeds
    gamma and its eigenvalue at the largest n exceeds tau times the
    reference level (median final eigenvalue of the ratio-bounded indices).
    The count q is the number of leading DIVERGING indices.

    Raises:
        PreconditionError: fewer than 3 grid points, or a step below 2x
        NoDecompositionError: every tracked eigenvalue diverges
    """
    tol = tolerances or settings.TOLERANCES
    gamma = settings.GAMMA if gamma is None else gamma
    tau = settings.TAU if tau is None else tau
    grid = list(p.grid)
    if len(grid) < 3:
        raise PreconditionError(f"detection needs at least 3 grid points, got {len(grid)}")
    if any(b < 2 * a for a, b in zip(grid, grid[1:])):
        raise PreconditionError(f"each grid size must be at least twice the previous, got {grid}")

    lam = p.eigvals
    top = float(np.max(np.abs(lam)))
    zero = tol.psd_rel * top if top > 0 else np.finfo(float).tiny
    ratios = growth_ratios(lam, grid, zero)
    mean_ratio = ratios.mean(axis=0)
    final = np.maximum(lam[-1], zero)

    bounded_by_ratio = mean_ratio <= gamma
    reference = float(np.median(final[bounded_by_ratio])) if bounded_by_ratio.any() else zero
    reference = max(reference, zero)

    classes = []
    for k in range(p.m):
        if bounded_by_ratio[k]:
            classes.append(GrowthClass.BOUNDED)
        elif final[k] > tau * reference:
            classes.append(GrowthClass.DIVERGING)
        else:
            classes.append(GrowthClass.AMBIGUOUS)

    if all(cls is GrowthClass.DIVERGING for cls in classes):
        raise NoDecompositionError(
            f"all {p.m} tracked eigenvalues diverge: no GFA decomposition detected at m={p.m}"
        )

    q = 0
    while classes[q] is GrowthClass.DIVERGING:
        q += 1
    gap_ok = classes[q] is GrowthClass.BOUNDED
    stray = any(cls is GrowthClass.DIVERGING for cls in classes[q:])
    verdict = "OK" if gap_ok and not stray else "AMBIGUOUS"

    entries = [
        GrowthEntry(
            index=k + 1,
            ratios=[float(r) for r in ratios[:, k]],
            mean_ratio=float(mean_ratio[k]),
            final_value=float(lam[-1, k]),
            normalized_final=float(final[k] / reference),
            growth_class=classes[k],
        )
        for k in range(p.m)
    ]
    report = GrowthReport(
        grid=grid,
        eigvals=[[float(v) for v in row] for row in lam],
        gamma=gamma,
        tau=tau,
        reference=reference,
        q=q,
        gap_ok=gap_ok,
        verdict=verdict,
        entries=entries,
    )
    logger.info("Detected q=%d (%s); mean ratios %s", q, verdict,
                ", ".join(f"{r:.3f}" for r in mean_ratio))
    return q, report


def extract_loadings(sigma: np.ndarray, q: int, tolerances: Tolerances = None) -> np.ndarray:
    """
    Limit-PCA loadings F = U_q Lambda_q^{1/2}

    Args:
        sigma: N x N symmetric PSD covariance
        q: number of factors

    Returns:
        N x q loading matrix with the eigenvector sign convention applied
    """
    tol = tolerances or settings.TOLERANCES
    sigma = np.asarray(sigma, dtype=float)
    N = sigma.shape[0]
    if sigma.ndim != 2 or sigma.shape[1] != N:
        raise PreconditionError(f"covariance must be square, got shape {sigma.shape}")
    if not 0 <= q <= N:
        raise PreconditionError(f"q={q} must lie in [0, N={N}]")
    scale = float(np.max(np.abs(sigma))) if sigma.size else 0.0
    if np.max(np.abs(sigma - sigma.T)) > tol.num * max(scale, 1.0):
        raise SymmetryError("covariance passed to extract_loadings is not symmetric")
    sigma = 0.5 * (sigma + sigma.T)
    min_eig = float(eigvalsh(sigma, subset_by_index=[0, 0])[0])
    if min_eig < -tol.psd_rel * scale:
        raise PSDViolationError(f"covariance has eigenvalue {min_eig:.6g} below -eps_psd")
    if q == 0:
        return np.zeros((N, 0))

    vals, vecs = _top_eigenpairs(sigma, q, tol)
    if vals[0] <= 0 or vals[-1] <= tol.rank_rel * vals[0]:
        raise DegenerateFactorError(f"eigenvalue {q} ({vals[-1]:.6g}) is numerically zero")
    return vecs * np.sqrt(vals)


def loading_gramian_eigenvalues(F: np.ndarray) -> np.ndarray:
    """Eigenvalues of F^T F, descending (the nonzero spectrum of F F^T)"""
    F = np.asarray(F, dtype=float)
    return eigvalsh(F.T @ F)[::-1]


def _as_grid_loadings(loadings, grid: Sequence[int]) -> List[np.ndarray]:
    if isinstance(loadings, np.ndarray) and loadings.ndim == 2:
        if grid[-1] > loadings.shape[0]:
            raise PreconditionError("grid exceeds the loading length")
        return [loadings[:n] for n in grid]
    blocks = [np.asarray(F, dtype=float) for F in loadings]
    if len(blocks) != len(grid):
        raise PreconditionError("one loading block per grid point is required")
    return blocks


def strong_li_diagnostic(
    loadings: Union[np.ndarray, Sequence[np.ndarray]],
    grid: Sequence[int],
    gamma_sli: float = None,
    tolerances: Tolerances = None,
) -> StrongLIReport:
    """
    Residual norm of each loading against the span of the others

    Args:
        loadings: one N x q matrix (truncated at each grid size) or a list
            of n x q blocks, one per grid point
        grid: truncation sizes
        gamma_sli: minimum mean per-doubling growth for a STRONG verdict

    Returns:
        StrongLIReport with residual norms per factor and grid point
    """
    tol = tolerances or settings.TOLERANCES
    gamma_sli = settings.GAMMA_SLI if gamma_sli is None else gamma_sli
    grid = [int(n) for n in grid]
    blocks = _as_grid_loadings(loadings, grid)
    qs = {F.shape[1] for F in blocks}
    if len(qs) != 1:
        raise PreconditionError(f"factor count differs across the grid: {sorted(qs)}")
    q = qs.pop()
    if q == 0:
        raise PreconditionError("strong linear independence needs at least one factor")

    norms = np.zeros((q, len(grid)))
    collinear = False
    for g, F in enumerate(blocks):
        svals = np.linalg.svd(F, compute_uv=False)
        if svals[-1] <= math.sqrt(tol.rank_rel) * svals[0]:
            collinear = True
            warnings.warn(f"loading columns are collinear at n={grid[g]}", CollinearityWarning)
        for i in range(q):
            f = F[:, i]
            if q == 1:
                norms[i, g] = np.linalg.norm(f)
                continue
            others = np.delete(F, i, axis=1)
            coef = np.linalg.lstsq(others, f, rcond=None)[0]
            norms[i, g] = np.linalg.norm(f - others @ coef)

    if len(grid) > 1:
        zero = np.finfo(float).tiny
        growth = growth_ratios(norms.T, grid, zero).mean(axis=0)
    else:
        growth = np.full(q, np.nan)
    strong = not collinear and bool(np.all(growth >= gamma_sli))
    logger.info("Strong-LI growth per factor: %s -> %s",
                ", ".join(f"{g:.3f}" for g in growth), "STRONG" if strong else "WEAK")
    return StrongLIReport(
        grid=grid,
        residual_norms=norms.tolist(),
        growth=[float(g) for g in growth],
        gamma_sli=gamma_sli,
        collinear=collinear,
        verdict="STRONG" if strong else "WEAK",
    )


def build_averaging_sequences(F: np.ndarray, tolerances: Tolerances = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Q-R averaging sequences for a loading matrix

    F = Q R with R unit upper-triangular and Q having orthogonal (not
    normalized) columns g_i. Row i of A is g_i^T / |g_i|^2, so A F = R.

    Returns:
        (Q, R, A) with shapes N x q, q x q and q x N

    Raises:
        RankDeficiencyError: a column of F lies in the span of the previous ones
    """
    tol = tolerances or settings.TOLERANCES
    F = np.asarray(F, dtype=float)
    if F.ndim != 2:
        raise PreconditionError(f"loadings must be N x q, got shape {F.shape}")
    N, q = F.shape
    if q == 0:
        return np.zeros((N, 0)), np.zeros((0, 0)), np.zeros((0, N))
    if q > N:
        raise RankDeficiencyError(f"{q} loadings cannot be independent in dimension {N}", column=N)

    Q0, R0 = qr(F, mode="economic")
    d = np.diag(R0).copy()
    col_norms = np.linalg.norm(F, axis=0)
    floor = math.sqrt(tol.rank_rel) * max(float(col_norms.max()), np.finfo(float).tiny)
    for i in range(q):
        if abs(d[i]) <= floor:
            raise RankDeficiencyError(f"loading column {i} is in the span of the previous columns", column=i)

    G = Q0 * d
    R = R0 / d[:, None]
    A = (G / (d ** 2)).T
    return G, R, A


def canonical_correlations(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Canonical correlations between the row spaces of two q x M sample matrices"""
    qa = np.linalg.qr(np.atleast_2d(a).T)[0]
    qb = np.linalg.qr(np.atleast_2d(b).T)[0]
    return np.clip(np.linalg.svd(qa.T @ qb, compute_uv=False), 0.0, 1.0)


def _sym_sqrt_pair(C: np.ndarray, tol: Tolerances) -> Tuple[np.ndarray, np.ndarray]:
    w, V = eigh(0.5 * (C + C.T))
    if w[0] <= tol.rank_rel * max(w[-1], 0.0) or w[-1] <= 0:
        raise InsufficientReplicatesError(
            f"covariance of the averaged samples is singular (eigenvalues {w[0]:.3g}..{w[-1]:.3g})"
        )
    root = np.sqrt(w)
    return (V / root) @ V.T, (V * root) @ V.T


def realize_factors(
    y: Union[SampleEnsemble, np.ndarray],
    F: np.ndarray,
    A: np.ndarray,
    R: np.ndarray,
    mode: str = "sample",
    tolerances: Tolerances = None,
) -> FactorRealization:
    """
    Realize orthonormal factors from a sample by averaging

    z = A y is whitened to x; the aggregate part F R^{-1} z = F' x and the
    idiosyncratic part is the remainder.

    Args:
        y: N x M sample
        F: N x q loadings
        A: q x N averaging matrix from build_averaging_sequences
        R: q x q unit upper-triangular factor
        mode: "sample" whitens with the sample second moment of z,
            "analytic" with (R R^T)^{-1/2}

    Returns:
        FactorRealization
    """
    tol = tolerances or settings.TOLERANCES
    data = y.data if isinstance(y, SampleEnsemble) else np.asarray(y, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    F = np.asarray(F, dtype=float)
    A = np.asarray(A, dtype=float)
    R = np.asarray(R, dtype=float)
    N, M = data.shape
    q = F.shape[1]
    if F.shape[0] != N or A.shape != (q, N) or R.shape != (q, q):
        raise PreconditionError(
            f"dimension mismatch: y {data.shape}, F {F.shape}, A {A.shape}, R {R.shape}"
        )
    if mode not in ("sample", "analytic"):
        raise PreconditionError(f"mode must be 'sample' or 'analytic', got '{mode}'")
    if q == 0:
        return FactorRealization(factors=np.zeros((0, M)), aggregate=np.zeros_like(data),
                                 idiosyncratic=data.copy(), R=R, loadings=F, z=np.zeros((0, M)))

    z = A @ data
    if mode == "sample":
        if M < q:
            raise InsufficientReplicatesError(f"{M} samples cannot whiten {q} factors")
        W, W_inv = _sym_sqrt_pair(z @ z.T / M, tol)
    else:
        W, W_inv = _sym_sqrt_pair(R @ R.T, tol)

    x = W @ z
    R_inv_z = solve_triangular(R, z, lower=False)
    aggregate = F @ R_inv_z
    loadings = F @ solve_triangular(R, W_inv, lower=False)
    idiosyncratic = data - aggregate
    return FactorRealization(factors=x, aggregate=aggregate, idiosyncratic=idiosyncratic,
                             R=R, loadings=loadings, z=z)


def realization_report(realization: FactorRealization, tolerances: Tolerances = None) -> RealizationReport:
    """
    Check that realized factors are orthonormal and uncorrelated with the residual

    The cross moment of factor i and residual row k is scaled by the RMS of
    that row; rows with zero RMS are skipped.
    """
    tol = tolerances or settings.TOLERANCES
    x, resid = realization.factors, realization.idiosyncratic
    q, M = x.shape
    factor_defect = float(np.max(np.abs(x @ x.T / M - np.eye(q)))) if q else 0.0
    cross_max = 0.0
    if q:
        rms = np.sqrt(np.mean(resid ** 2, axis=1))
        live = rms > tol.num * max(1.0, float(rms.max()))
        if live.any():
            cross = (x @ resid[live].T / M) / rms[live]
            cross_max = float(np.max(np.abs(cross)))
    ok = factor_defect <= tol.fact and cross_max <= tol.orth_xy
    if not ok:
        logger.warning("Realized factors off tolerance: defect %.3g (fact=%g), cross %.3g (orth_xy=%g)",
                       factor_defect, tol.fact, cross_max, tol.orth_xy)
    return RealizationReport(factor_defect=factor_defect, cross_max=cross_max,
                             fact=tol.fact, orth_xy=tol.orth_xy, within_tolerance=ok)


def decompose(
    c: CovarianceSupplier,
    grid: Sequence[int] = None,
    m: int = None,
    gamma: float = None,
    tau: float = None,
    gamma_sli: float = None,
    tolerances: Tolerances = None,
    n_jobs: int = None,
    extract_n: int = None,
) -> Tuple[GFADecomposition, EigenProfile]:
    """
    Profile, detect, extract: Sigma_N = F F^T + idiosyncratic covariance

    The count is detected on the grid; loadings are extracted at
    N = extract_n, which defaults to max(grid) and may lie beyond it. The
    strong-LI report uses the limit-PCA loadings of each grid truncation.
    """
    profile = eigen_profile(c, grid, m, tolerances, n_jobs)
    q, report = detect_factor_count(profile, gamma, tau, tolerances)
    N = profile.grid[-1] if extract_n is None else int(extract_n)
    if not profile.grid[-1] <= N <= c.max_n:
        raise PreconditionError(f"extract_n={N} must lie in [{profile.grid[-1]}, {c.max_n}]")
    sigma = c.eval(N)
    F = extract_loadings(sigma, q, tolerances)
    sli = None
    if q > 0:
        blocks = [vecs[:, :q] * np.sqrt(np.maximum(vals[:q], 0.0))
                  for vecs, vals in zip(profile.eigvecs, profile.eigvals)]
        sli = strong_li_diagnostic(blocks, profile.grid, gamma_sli, tolerances)
    decomposition = GFADecomposition(q=q, loadings=F, idio_cov=sigma - F @ F.T,
                                     growth_report=report, sli_report=sli)
    return decomposition, profile
