"""
Stationary series analysis: autocovariances, spectral lines and the split
into a purely deterministic (line) part and its remainder
"""
import logging
import warnings
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.linalg import eigh, toeplitz
from scipy.signal import correlate
from scipy.signal.windows import bartlett, hann

from gfa.analysis.spectral import default_grid, detect_factor_count, eigen_profile
from gfa.config import Tolerances, settings
from gfa.errors import IncompleteSplitWarning, PreconditionError
from gfa.models import GrowthReport, LineEntry, LineModelReport, SpectralDiagnostic
from gfa.types import CovarianceSupplier, LineComponent, PDLineModel

logger = logging.getLogger(__name__)

ESTIMATORS = ("biased", "unbiased", "circular")

# Minimum FFT length for smoothed density estimates
_DENSITY_NFFT = 4096


def _as_series(series) -> np.ndarray:
    y = np.asarray(series, dtype=float)
    if y.ndim == 2 and 1 in y.shape:
        y = y.ravel()
    if y.ndim != 1 or y.size < 1:
        raise PreconditionError(f"expected a single series, got shape {np.shape(series)}")
    return y


@dataclass(frozen=True)
class AutocovEstimate:
    """Estimated lags sigma(0..L) of a stationary series"""
    lags: np.ndarray
    N_used: int
    estimator: str = "biased"

    def __post_init__(self):
        lags = np.array(self.lags, dtype=float, copy=True)
        if lags.ndim != 1 or lags.size < 1:
            raise PreconditionError("autocovariance needs at least lag 0")
        if not lags[0] > 0:
            raise PreconditionError("lag-0 autocovariance must be positive (series has no energy)")
        lags.setflags(write=False)
        object.__setattr__(self, "lags", lags)

    @property
    def L(self) -> int:
        return self.lags.size - 1

    def toeplitz(self, n: int = None) -> np.ndarray:
        n = self.lags.size if n is None else n
        if not 1 <= n <= self.lags.size:
            raise PreconditionError(f"Toeplitz size {n} needs lags up to {n - 1}, have {self.L}")
        return toeplitz(self.lags[:n])

    def as_supplier(self) -> CovarianceSupplier:
        return CovarianceSupplier.from_lags(self.lags, source="sample", label=f"{self.estimator} autocov")


def autocov_lags(y: np.ndarray, L: int, estimator: str = "biased") -> np.ndarray:
    """Raw lag estimates without validation of the result"""
    N = y.size
    if estimator == "circular":
        spec = np.abs(np.fft.rfft(y)) ** 2
        return np.fft.irfft(spec, n=N)[:L + 1] / N
    raw = correlate(y, y, mode="full")[N - 1:N + L]
    if estimator == "biased":
        return raw / N
    return raw / (N - np.arange(L + 1))


def sample_autocov(series, L: int = None, estimator: str = "biased") -> AutocovEstimate:
    """
    Autocovariance of one realization

    biased divides lag h by N, unbiased by N - h; circular wraps indices
    modulo N, which makes the full Toeplitz matrix circulant and PSD.

    Raises:
        PreconditionError: if L >= N or the estimator is unknown
    """
    y = _as_series(series)
    N = y.size
    L = N - 1 if L is None else int(L)
    if not 0 <= L < N:
        raise PreconditionError(f"max lag L={L} must satisfy 0 <= L < N={N}")
    if estimator not in ESTIMATORS:
        raise PreconditionError(f"estimator must be one of {ESTIMATORS}, got '{estimator}'")
    return AutocovEstimate(lags=autocov_lags(y, L, estimator), N_used=N, estimator=estimator)


def _smoothed_density(lags: np.ndarray, window: int) -> Tuple[np.ndarray, np.ndarray]:
    weights = bartlett(2 * window + 1)[window:]
    c = lags[:window + 1] * weights[:lags[:window + 1].size]
    nfft = max(_DENSITY_NFFT, 8 * window)
    spectrum = 2.0 * np.fft.rfft(c, nfft).real - c[0]
    omegas = 2.0 * np.pi * np.arange(spectrum.size) / nfft
    return omegas, spectrum


def spectral_density_diagnostic(
    a: AutocovEstimate,
    window: int = None,
    tolerances: Tolerances = None,
) -> SpectralDiagnostic:
    """
    Bartlett-smoothed spectral density summary

    Reports the sup of the density estimate, lambda_1 of the Toeplitz matrix
    of the windowed lags (bounded by that sup), and flags a likely spectral
    line when the sup keeps growing with the window. The verdict is
    indicative only: finite data cannot prove a density bounded.
    """
    tol = tolerances or settings.TOLERANCES
    window = min(window or settings.SPECTRAL_WINDOW, a.L)
    if window < 2:
        raise PreconditionError(f"smoothing window needs at least 2 lags, have L={a.L}")

    omegas, density = _smoothed_density(a.lags, window)
    peak = int(np.argmax(density))
    sup = float(density[peak])
    sup_half = float(np.max(_smoothed_density(a.lags, window // 2)[1]))

    weights = bartlett(2 * window + 1)[window:]
    n = min(a.lags.size, 8 * window)
    tapered = np.zeros(n)
    m = min(n, window + 1)
    tapered[:m] = a.lags[:m] * weights[:m]
    operator_norm = float(eigh(toeplitz(tapered), eigvals_only=True, subset_by_index=[n - 1, n - 1])[0])

    szego_ok = operator_norm <= sup * (1.0 + tol.szego) + tol.num
    line_suspect = sup_half > 0 and sup / sup_half > settings.LINE_GROWTH
    logger.debug("density sup %.4g at omega=%.4f (half window %.4g), lambda_1 %.4g",
                 sup, omegas[peak], sup_half, operator_norm)
    return SpectralDiagnostic(
        window=window,
        sup_density=sup,
        argmax_omega=float(omegas[peak]),
        sup_half_window=sup_half,
        operator_norm=operator_norm,
        n=n,
        szego_ok=szego_ok,
        line_suspect=line_suspect,
        verdict="LINE-SUSPECT" if line_suspect else "BOUNDED-INDICATIVE",
    )


def hann_periodogram(y: np.ndarray) -> np.ndarray:
    """Hann-windowed periodogram on the bins 2 pi j / N in [0, pi)"""
    N = y.size
    taper = hann(N, sym=False)
    power = np.abs(np.fft.rfft(y * taper)) ** 2 / np.sum(taper ** 2)
    bins = (N + 1) // 2
    return power[:bins]


def hann_leakage(distance) -> np.ndarray:
    """
    Upper envelope of the Hann sidelobe power at a distance in bins, relative
    to the main-lobe peak

    The window response is sinc(d) / (1 - d^2), so its sidelobes stay below
    1 / (pi d |d^2 - 1|). One bin is taken off the distance to cover a peak
    that falls between bins. The main lobe (two bins either side) is
    unbounded.
    """
    d = np.asarray(distance, dtype=float)
    e = np.maximum(d - 1.0, 1.5)
    return np.where(d <= 2.0, np.inf, 1.0 / (np.pi * e * (e ** 2 - 1.0)) ** 2)


def _reject_leakage(power: np.ndarray, candidates: np.ndarray, margin: float) -> List[int]:
    """Keep candidates, strongest first, that rise above every stronger peak's sidelobes"""
    accepted: List[int] = []
    for j in sorted(candidates, key=lambda c: -power[c]):
        if accepted:
            stronger = np.asarray(accepted)
            envelope = margin * power[stronger] * hann_leakage(np.abs(stronger - j))
            if np.any(power[j] <= envelope):
                logger.debug("bin %d rejected as sidelobe leakage", j)
                continue
        accepted.append(int(j))
    return sorted(accepted)


def detect_lines(
    series,
    max_lines: int = None,
    threshold: float = None,
    leakage_margin: float = None,
) -> List[float]:
    """
    Frequencies of spectral lines in one realization

    A line is a local maximum (over +-2 bins) of the Hann periodogram that
    exceeds threshold x median. Candidates that fit under the sidelobe
    envelope of a stronger accepted peak, scaled by leakage_margin, are
    window leakage and are dropped. The frequency is refined by quadratic
    interpolation of the log-periodogram.

    Returns:
        At most max_lines frequencies in [0, pi), sorted ascending
    """
    y = _as_series(series)
    N = y.size
    if N < settings.MIN_SERIES_LENGTH:
        raise PreconditionError(f"line detection needs N >= {settings.MIN_SERIES_LENGTH}, got {N}")
    threshold = settings.LINE_THRESHOLD if threshold is None else threshold
    margin = settings.LINE_LEAKAGE_MARGIN if leakage_margin is None else leakage_margin

    power = hann_periodogram(y)
    if not np.any(power > 0):
        return []
    level = threshold * float(np.median(power))
    padded = np.pad(power, 2, constant_values=-np.inf)
    local_max = power >= sliding_window_view(padded, 5).max(axis=1)
    candidates = _reject_leakage(power, np.flatnonzero(local_max & (power > level)), margin)

    logp = np.log(np.maximum(power, np.finfo(float).tiny))
    found = []
    for j in candidates:
        left = logp[j - 1] if j > 0 else logp[1]
        right = logp[j + 1] if j + 1 < power.size else logp[j - 1]
        curvature = left - 2.0 * logp[j] + right
        shift = 0.5 * (left - right) / curvature if curvature < 0 else 0.0
        shift = float(np.clip(shift, -0.5, 0.5))
        omega = float(np.clip(2.0 * np.pi * (j + shift) / N, 0.0, np.nextafter(np.pi, 0.0)))
        found.append((power[j], omega))

    limit = max_lines if max_lines is not None else len(found)
    strongest = sorted(found, key=lambda item: -item[0])[:limit]
    omegas = sorted(om for _, om in strongest)
    logger.info("Detected %d line(s) at %s", len(omegas), ", ".join(f"{om:.5f}" for om in omegas))
    return omegas


def _near_endpoint(omega: float, n: int) -> bool:
    guard = 4.0 * np.pi / n
    return omega < guard or omega > np.pi - guard


def recover_amplitudes(series, omega: float, n: int = None, channel: str = "both"):
    """
    Amplitudes of the line at omega by sin/cos averaging

    v = (2/n) sum cos(omega k) y(k), w = (2/n) sum sin(omega k) y(k) over
    k = 1..n. Within 4 pi / n of 0 or pi only the cos channel exists; it is
    normalized by sum cos^2, which gives the plain mean at omega = 0.

    Args:
        series: length-N series or N x M matrix of series in columns
        omega: line frequency in [0, pi)
        n: averaging window, at most N
        channel: "both", "cos" or "sin"

    Returns:
        (v, w); the unrequested channel is None. Per-column arrays for
        matrix input.
    """
    y = np.asarray(series, dtype=float)
    N = y.shape[0]
    n = N if n is None else int(n)
    if not 1 <= n <= N:
        raise PreconditionError(f"window n={n} must lie in [1, N={N}]")
    if not 0.0 <= omega < np.pi:
        raise PreconditionError(f"frequency {omega} outside [0, pi)")
    if channel not in ("both", "cos", "sin"):
        raise PreconditionError(f"channel must be 'both', 'cos' or 'sin', got '{channel}'")

    k = np.arange(1, n + 1, dtype=float)
    cos_k = np.cos(omega * k)
    block = y[:n]
    if _near_endpoint(omega, n):
        if channel != "cos":
            raise PreconditionError(
                f"sin channel undefined within 4*pi/n of the endpoints (omega={omega:.6g}, n={n})"
            )
        return cos_k @ block / (cos_k @ cos_k), None

    v = 2.0 / n * (cos_k @ block) if channel != "sin" else None
    w = 2.0 / n * (np.sin(omega * k) @ block) if channel != "cos" else None
    return v, w


def dft_power(y: np.ndarray, omega: float) -> float:
    """|sum_k y(k) e^{-i omega k}|^2 / N at an arbitrary frequency"""
    k = np.arange(1, y.size + 1, dtype=float)
    return float(np.abs(np.exp(-1j * omega * k) @ y) ** 2 / y.size)


def wold_split(
    series,
    lines: Sequence[float] = None,
    threshold: float = None,
    max_lines: int = None,
) -> Tuple[np.ndarray, np.ndarray, PDLineModel]:
    """
    Split a series into its line part and the remainder

    Args:
        series: one realization
        lines: line frequencies; detected when None
        threshold: residual check level, x median of the residual periodogram

    Returns:
        (pd_part, pnd_part, PDLineModel) with pd_part + pnd_part == series
    """
    y = _as_series(series)
    N = y.size
    threshold = settings.LINE_THRESHOLD if threshold is None else threshold
    if lines is None:
        lines = detect_lines(y, max_lines=max_lines)
    omegas = sorted(set(float(om) for om in lines))

    components = []
    for om in omegas:
        if _near_endpoint(om, N):
            v, w = recover_amplitudes(y, om, channel="cos")
            w = 0.0
        else:
            v, w = recover_amplitudes(y, om)
        components.append(LineComponent(omega=om, v=float(v), w=float(w)))
    model = PDLineModel(lines=tuple(components))

    pd_part = model.reconstruct(N)
    pnd_part = y - pd_part
    if omegas:
        floor = float(np.median(np.abs(np.fft.rfft(pnd_part)) ** 2 / N))
        for om in omegas:
            level = dft_power(pnd_part, om)
            if level > threshold * floor:
                warnings.warn(
                    f"residual still peaked at omega={om:.6g} ({level / max(floor, 1e-300):.1f}x median)",
                    IncompleteSplitWarning,
                )
    return pd_part, pnd_part, model


def line_model_report(model: PDLineModel, **extra) -> LineModelReport:
    def _plain(value):
        if value is None:
            return None
        arr = np.asarray(value, dtype=float)
        return float(arr) if arr.ndim == 0 else arr.tolist()

    entries = [LineEntry(omega=ln.omega, v=_plain(ln.v), w=_plain(ln.w)) for ln in model.lines]
    return LineModelReport(lines=entries, **extra)


def stationary_factor_count(
    series,
    grid: Sequence[int] = None,
    m: int = None,
    gamma: float = None,
    tau: float = None,
    lag_fraction: int = None,
) -> Tuple[int, GrowthReport]:
    """
    Space-domain factor count of a stationary series

    Runs the diverging-eigenvalue detector on the Toeplitz matrix of
    unbiased autocovariances up to lag N / lag_fraction. Each line in
    (0, pi) contributes two diverging eigenvalues.
    """
    y = _as_series(series)
    lag_fraction = lag_fraction or settings.STATIONARY_LAG_FRACTION
    L = y.size // lag_fraction - 1
    estimate = sample_autocov(y, L=L, estimator="unbiased")
    supplier = estimate.as_supplier()
    grid = grid or default_grid(supplier.max_n)
    m = m or min(8, grid[0])
    profile = eigen_profile(supplier, grid, m)
    return detect_factor_count(profile, gamma, tau)
