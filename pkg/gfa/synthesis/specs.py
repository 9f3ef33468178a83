"""
Declarative specs for synthetic scenarios

Each spec is a frozen pydantic model that can be built from a short text form
such as ``constant(1.0)`` or ``moving_average(1, 0.5)``, as used in scenario
files.
"""
import re
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from scipy.linalg import toeplitz
from scipy.signal import lfilter

from gfa.errors import PreconditionError

_CALL = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?:\((.*)\))?\s*$")

# Frequency grid used to locate the maximum of an MA spectral symbol
_SYMBOL_GRID = 8192


def parse_call(text: str) -> Tuple[str, List[float]]:
    """
    Split ``name(a, b, ...)`` into its name and float arguments

    Raises:
        PreconditionError: if the text is not of that form
    """
    match = _CALL.match(text)
    if not match:
        raise PreconditionError(f"cannot parse '{text}' as name(args)")
    name, args = match.group(1), match.group(2)
    if args is None or not args.strip():
        return name, []
    try:
        return name, [float(a) for a in args.split(",")]
    except ValueError:
        raise PreconditionError(f"non-numeric argument in '{text}'")


def _build(model, text: str, **fields):
    try:
        return model(**fields)
    except ValidationError as e:
        raise PreconditionError(f"invalid spec '{text}': {e.errors()[0]['msg']}")


class LoadingSpec(BaseModel):
    """Loading sequence f(k), k = 1..N"""
    model_config = ConfigDict(frozen=True)

    family: Literal["constant", "sign_pattern", "cosine", "geometric", "saturating", "custom"]
    param: float = 1.0
    vector: Optional[Tuple[float, ...]] = None

    @model_validator(mode="after")
    def _check(self):
        if self.family == "sign_pattern" and (self.param < 2 or self.param % 2):
            raise ValueError("sign_pattern period must be an even integer >= 2")
        if self.family in ("geometric", "saturating") and not 0 < abs(self.param) < 1:
            raise ValueError(f"{self.family} ratio must satisfy 0 < |lambda| < 1")
        if self.family == "custom" and not self.vector:
            raise ValueError("custom loading needs a non-empty vector")
        return self

    @classmethod
    def parse(cls, text: str) -> "LoadingSpec":
        name, args = parse_call(text)
        if name == "custom":
            return _build(cls, text, family=name, vector=tuple(args))
        if len(args) > 1:
            raise PreconditionError(f"loading '{name}' takes at most one argument")
        return _build(cls, text, family=name, **({"param": args[0]} if args else {}))

    def values(self, N: int) -> np.ndarray:
        k = np.arange(1, N + 1, dtype=float)
        if self.family == "constant":
            return np.full(N, self.param)
        if self.family == "sign_pattern":
            half = int(self.param) // 2
            return np.where(((np.arange(N) // half) % 2) == 0, 1.0, -1.0)
        if self.family == "cosine":
            return np.cos(self.param * k)
        if self.family == "geometric":
            return self.param ** k
        if self.family == "saturating":
            return 1.0 - self.param ** k
        if N > len(self.vector):
            raise PreconditionError(f"custom loading has {len(self.vector)} entries, {N} requested")
        return np.array(self.vector[:N], dtype=float)

    def __str__(self) -> str:
        if self.family == "custom":
            return f"custom({len(self.vector)} values)"
        return f"{self.family}({self.param:g})"


class NoiseSpec(BaseModel):
    """Zero-mean Gaussian noise across the cross-section"""
    model_config = ConfigDict(frozen=True)

    kind: Literal["white", "white_growing", "moving_average", "banded"]
    sigma: float = Field(default=1.0, ge=0)
    coeffs: Tuple[float, ...] = ()
    bandwidth: int = Field(default=1, ge=0)
    decay: float = 0.5

    @model_validator(mode="after")
    def _check(self):
        if self.kind == "moving_average" and not self.coeffs:
            raise ValueError("moving_average needs at least one coefficient")
        return self

    @classmethod
    def parse(cls, text: str) -> "NoiseSpec":
        name, args = parse_call(text)
        if name == "white":
            return _build(cls, text, kind=name, **({"sigma": args[0]} if args else {}))
        if name == "white_growing":
            return _build(cls, text, kind=name)
        if name == "moving_average":
            return _build(cls, text, kind=name, coeffs=tuple(args))
        if name == "banded":
            if len(args) != 2:
                raise PreconditionError("banded takes (bandwidth, decay)")
            return _build(cls, text, kind=name, bandwidth=int(args[0]), decay=args[1])
        raise PreconditionError(f"unknown noise kind '{name}'")

    @classmethod
    def moving_average(cls, order: int, coeffs) -> "NoiseSpec":
        coeffs = tuple(float(c) for c in coeffs)
        if not coeffs:
            raise PreconditionError("moving_average needs at least one coefficient")
        if len(coeffs) != order + 1:
            raise PreconditionError(f"MA({order}) needs {order + 1} coefficients, got {len(coeffs)}")
        return cls(kind="moving_average", coeffs=coeffs)

    @property
    def taps(self) -> np.ndarray:
        """Filter taps for the moving-average kinds"""
        if self.kind == "moving_average":
            return self.sigma * np.asarray(self.coeffs, dtype=float)
        if self.kind == "banded":
            return self.sigma * self.decay ** np.arange(self.bandwidth + 1, dtype=float)
        return np.array([self.sigma])

    @property
    def bounded(self) -> bool:
        return self.kind != "white_growing"

    def autocov(self) -> np.ndarray:
        """Lags gamma(0..order) of a stationary kind"""
        if not self.bounded:
            raise PreconditionError("white_growing is not stationary")
        taps = self.taps
        return np.correlate(taps, taps, mode="full")[taps.size - 1:]

    def covariance(self, n: int) -> np.ndarray:
        if self.kind == "white_growing":
            return np.diag(np.arange(1, n + 1, dtype=float))
        lags = np.zeros(n)
        acv = self.autocov()[:n]
        lags[:acv.size] = acv
        return toeplitz(lags)

    def spectral_sup(self) -> float:
        """Maximum over omega of |sum_j c_j e^{-i omega j}|^2 (infinite for white_growing)"""
        if not self.bounded:
            return float("inf")
        return float(np.max(np.abs(np.fft.rfft(self.taps, _SYMBOL_GRID)) ** 2))

    def sample(self, N: int, M: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "white_growing":
            return np.sqrt(np.arange(1, N + 1, dtype=float))[:, None] * rng.standard_normal((N, M))
        taps = self.taps
        burn = taps.size - 1
        eps = rng.standard_normal((N + burn, M))
        return lfilter(taps, [1.0], eps, axis=0)[burn:]

    def __str__(self) -> str:
        if self.kind == "moving_average":
            return f"moving_average({', '.join(f'{c:g}' for c in self.coeffs)})"
        if self.kind == "banded":
            return f"banded({self.bandwidth}, {self.decay:g})"
        if self.kind == "white":
            return f"white({self.sigma:g})"
        return self.kind


class TimeSpec(BaseModel):
    """Unit-variance stationary time process u(t)"""
    model_config = ConfigDict(frozen=True)

    kind: Literal["iid", "ar1", "sinusoid"]
    phi: float = 0.0
    omega: float = 1.0
    amplitude: float = 1.0
    phase: float = 0.0

    @model_validator(mode="after")
    def _check(self):
        if self.kind == "ar1" and not -1 < self.phi < 1:
            raise ValueError("AR(1) coefficient must satisfy |phi| < 1")
        return self

    @classmethod
    def parse(cls, text: str) -> "TimeSpec":
        name, args = parse_call(text)
        if name == "iid":
            return _build(cls, text, kind=name)
        if name == "ar1":
            if len(args) != 1:
                raise PreconditionError("ar1 takes (phi)")
            return _build(cls, text, kind=name, phi=args[0])
        if name == "sinusoid":
            keys = ("omega", "amplitude", "phase")
            return _build(cls, text, kind=name, **dict(zip(keys, args)))
        raise PreconditionError(f"unknown time process '{name}'")

    def sample(self, T: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "iid":
            return rng.standard_normal(T)
        if self.kind == "ar1":
            start = rng.standard_normal()
            eps = rng.standard_normal(T)
            scale = np.sqrt(1.0 - self.phi ** 2)
            return lfilter([scale], [1.0, -self.phi], eps, zi=[self.phi * start])[0]
        t = np.arange(1, T + 1, dtype=float)
        return self.amplitude * np.sin(self.omega * t + self.phase)

    def __str__(self) -> str:
        if self.kind == "ar1":
            return f"ar1({self.phi:g})"
        if self.kind == "sinusoid":
            return f"sinusoid({self.omega:g}, {self.amplitude:g}, {self.phase:g})"
        return "iid"


class SpaceSpec(BaseModel):
    """Space process v(k) = sum_i f_i(k) z_i + noise(k)"""
    model_config = ConfigDict(frozen=True)

    loadings: Tuple[LoadingSpec, ...] = ()
    noise: Optional[NoiseSpec] = None
    factor_values: Optional[Tuple[float, ...]] = None

    @model_validator(mode="after")
    def _check(self):
        if self.factor_values is not None and len(self.factor_values) != len(self.loadings):
            raise ValueError("factor_values needs one value per loading")
        if not self.loadings and self.noise is None:
            raise ValueError("space process needs loadings or noise")
        return self

    @classmethod
    def exchangeable(cls, sigma2: float, rho: float) -> "SpaceSpec":
        """Variance sigma2, equal covariance rho > 0: loading sqrt(rho), white residual"""
        if rho <= 0 or sigma2 < rho:
            raise PreconditionError("exchangeable space needs 0 < rho <= sigma2")
        noise = NoiseSpec(kind="white", sigma=np.sqrt(sigma2 - rho)) if sigma2 > rho else None
        return cls(loadings=(LoadingSpec(family="constant", param=np.sqrt(rho)),), noise=noise)

    def loading_matrix(self, N: int) -> np.ndarray:
        if not self.loadings:
            return np.zeros((N, 0))
        return np.column_stack([spec.values(N) for spec in self.loadings])

    def covariance(self, n: int) -> np.ndarray:
        """Analytic covariance of v truncated to n (fixed factor values add nothing)"""
        out = np.zeros((n, n))
        if self.factor_values is None and self.loadings:
            F = self.loading_matrix(n)
            out += F @ F.T
        if self.noise is not None:
            out += self.noise.covariance(n)
        return out


class LineSpec(BaseModel):
    """One spectral line: frequency, amplitude variance, optional fixed amplitudes"""
    model_config = ConfigDict(frozen=True)

    omega: float = Field(ge=0.0, lt=np.pi)
    variance: float = Field(default=1.0, ge=0.0)
    v: Optional[float] = None
    w: Optional[float] = None

    @classmethod
    def parse(cls, text: str) -> "LineSpec":
        parts = [p.strip() for p in text.split(":")]
        try:
            values = [float(p) for p in parts]
        except ValueError:
            raise PreconditionError(f"line '{text}' must be omega[:variance] or omega:v:w")
        if len(values) == 1:
            return _build(cls, text, omega=values[0])
        if len(values) == 2:
            return _build(cls, text, omega=values[0], variance=values[1])
        if len(values) == 3:
            return _build(cls, text, omega=values[0], v=values[1], w=values[2])
        raise PreconditionError(f"line '{text}' has too many fields")
