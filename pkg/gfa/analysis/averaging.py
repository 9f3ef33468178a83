"""
Averaging-sequence families and the idiosyncrasy test
"""
import logging
from typing import Callable, List, Sequence, Union

import numpy as np
from scipy.linalg import eigh

from gfa.analysis.spectral import build_averaging_sequences, growth_ratios
from gfa.config import Tolerances, settings
from gfa.errors import PreconditionError
from gfa.models import GrowthClass, IdiosyncrasyReport
from gfa.types import AveragingSequence, CovarianceSupplier, SampleEnsemble

logger = logging.getLogger(__name__)


class AveragingFamily:
    """A family a_n of averaging sequences indexed by truncation size n"""

    def __init__(self, label: str, builder: Callable[[int], np.ndarray]):
        """
        Args:
            label: provenance tag reported with results
            builder: maps n to the weight vector a_n (any length)
        """
        self.label = label
        self._builder = builder

    def sequence(self, n: int) -> AveragingSequence:
        if n < 1:
            raise PreconditionError(f"averaging sequence index must be positive, got {n}")
        return AveragingSequence(weights=self._builder(int(n)), label=self.label)

    def norms(self, grid: Sequence[int]) -> List[float]:
        return [self.sequence(n).norm2 for n in grid]

    @classmethod
    def arithmetic_mean(cls) -> "AveragingFamily":
        return cls("arithmetic-mean", lambda n: np.full(n, 1.0 / n))

    @classmethod
    def unit_spike(cls) -> "AveragingFamily":
        """d_n = e_n / sqrt(n)"""
        def build(n: int) -> np.ndarray:
            w = np.zeros(n)
            w[-1] = 1.0 / np.sqrt(n)
            return w

        return cls("unit-spike", build)

    @classmethod
    def shifted_functional(cls, a: Callable[[np.ndarray], np.ndarray], label: str = "a") -> "AveragingFamily":
        """
        Left-shifted square-summable functional: (P_n a)(k) = a(k + n), k = 1..n

        Args:
            a: vectorized map from indices k >= 1 to a(k), square-summable
        """
        def build(n: int) -> np.ndarray:
            return np.asarray(a(np.arange(n + 1, 2 * n + 1, dtype=float)), dtype=float)

        return cls(f"shifted-functional({label})", build)

    @classmethod
    def sinusoid(cls, omega: float, channel: str = "sin") -> "AveragingFamily":
        """(1/n) sin(omega k) or (1/n) cos(omega k), k = 1..n"""
        if channel not in ("sin", "cos"):
            raise PreconditionError(f"channel must be 'sin' or 'cos', got '{channel}'")
        trig = np.sin if channel == "sin" else np.cos

        def build(n: int) -> np.ndarray:
            return trig(omega * np.arange(1, n + 1, dtype=float)) / n

        return cls(f"{channel}({omega:g})", build)

    @classmethod
    def top_eigenvector(cls, c: CovarianceSupplier) -> "AveragingFamily":
        """u_{n,1} / sqrt(lambda_{n,1}); an averaging sequence only when lambda_1 diverges"""
        def build(n: int) -> np.ndarray:
            sigma = c.eval(n)
            vals, vecs = eigh(sigma, subset_by_index=[n - 1, n - 1])
            u = vecs[:, 0] if vecs[0, 0] >= 0 else -vecs[:, 0]
            return u / np.sqrt(vals[0])

        return cls("eigvec-derived", build)

    @classmethod
    def qr_row(cls, F: np.ndarray, i: int, tolerances: Tolerances = None) -> "AveragingFamily":
        """Row i of the Q-R averaging matrix of F truncated to n"""
        F = np.asarray(F, dtype=float)

        def build(n: int) -> np.ndarray:
            return build_averaging_sequences(F[:n], tolerances)[2][i]

        return cls(f"qr-row({i})", build)


def top_sample_eigenvalue(data: np.ndarray, n: int) -> float:
    """Largest eigenvalue of Y_n Y_n^T / M, through the smaller Gram matrix"""
    block = np.asarray(data, dtype=float)[:n]
    M = block.shape[1]
    gram = block.T @ block if M < n else block @ block.T
    k = gram.shape[0]
    return float(eigh(gram / M, eigvals_only=True, subset_by_index=[k - 1, k - 1])[0])


def idiosyncrasy_test(
    y: Union[SampleEnsemble, np.ndarray],
    family: AveragingFamily,
    grid: Sequence[int] = None,
    delta: float = None,
    gamma: float = None,
    tolerances: Tolerances = None,
) -> IdiosyncrasyReport:
    """
    Apply an averaging family along the grid and check the variance decays

    Args:
        y: N x M sample (columns independent replicates)
        family: averaging sequences a_n with |a_n| -> 0
        grid: truncation sizes, at least 3 and at most N
        delta: required decay factor between the first and last grid point
        gamma: growth threshold for the eigenvalue-side check

    Returns:
        IdiosyncrasyReport; the verdict needs both the variance decay and
        a bounded top sample eigenvalue
    """
    tol = tolerances or settings.TOLERANCES
    delta = settings.IDIO_DECAY if delta is None else delta
    gamma = settings.GAMMA if gamma is None else gamma
    data = y.data if isinstance(y, SampleEnsemble) else np.asarray(y, dtype=float)
    grid = [int(n) for n in (grid or [n for n in (data.shape[0] >> s for s in (4, 3, 2, 1, 0)) if n >= 1])]
    if len(grid) < 3:
        raise PreconditionError(f"idiosyncrasy test needs at least 3 grid points, got {len(grid)}")
    if any(b <= a for a, b in zip(grid, grid[1:])) or grid[-1] > data.shape[0]:
        raise PreconditionError(f"grid must be increasing and at most N={data.shape[0]}, got {grid}")

    variances, norms = [], []
    for n in grid:
        a = family.sequence(n)
        s = a.apply(data)
        variances.append(float(np.mean(s ** 2)))
        norms.append(a.norm2)
    last = variances[-1]
    decay = variances[0] / last if last > 0 else float("inf")

    top = [top_sample_eigenvalue(data, n) for n in grid]
    zero = tol.psd_rel * max(max(top), np.finfo(float).tiny)
    mean_ratio = float(growth_ratios(np.array(top), grid, zero).mean())
    eigen_class = GrowthClass.BOUNDED if mean_ratio <= gamma else GrowthClass.DIVERGING

    consistent = decay >= delta and eigen_class is GrowthClass.BOUNDED
    logger.info("Idiosyncrasy test (%s): decay %.3g, top-eigenvalue ratio %.3f -> %s",
                family.label, decay, mean_ratio, "consistent" if consistent else "not idiosyncratic")
    return IdiosyncrasyReport(
        label=family.label,
        grid=grid,
        variances=variances,
        as_norms=norms,
        decay=decay,
        delta=delta,
        top_eigvals=top,
        eigen_class=eigen_class,
        verdict="IDIOSYNCRATIC-CONSISTENT" if consistent else "NOT-IDIOSYNCRATIC",
    )
