"""
Pydantic models for analysis reports

Every report is JSON-serializable via ``model_dump_json`` and carries the
thresholds it was computed with.
"""
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple, Union

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field


class GrowthClass(str, Enum):
    DIVERGING = "DIVERGING"
    BOUNDED = "BOUNDED"
    AMBIGUOUS = "AMBIGUOUS"


class ValidationReport(BaseModel):
    """Outcome of validate_covariance"""
    n: int
    sym_defect: float
    min_eig: float
    nested: bool


class GrowthEntry(BaseModel):
    """Growth statistics of one eigenvalue index along the grid"""
    index: int = Field(ge=1)
    ratios: List[float]
    mean_ratio: float
    final_value: float
    normalized_final: float
    growth_class: GrowthClass


class GrowthReport(BaseModel):
    """Per-eigenvalue divergence classification"""
    grid: List[int]
    eigvals: List[List[float]]  # one row per grid point, top-m descending
    gamma: float
    tau: float
    reference: float
    q: int = Field(ge=0)
    gap_ok: bool
    verdict: str = Field(pattern="^(OK|AMBIGUOUS)$")
    entries: List[GrowthEntry]

    def to_rows(self) -> List[Dict]:
        """
        Flatten into plot-ready rows

        Returns:
            One dict per (n, k) with keys n, k, lambda, ratio, class. The
            ratio is the per-doubling ratio against the previous grid point
            and is empty at the first one.
        """
        rows = []
        for g, n in enumerate(self.grid):
            for entry in self.entries:
                k = entry.index
                rows.append({
                    "n": n,
                    "k": k,
                    "lambda": self.eigvals[g][k - 1],
                    "ratio": entry.ratios[g - 1] if g > 0 else None,
                    "class": entry.growth_class.value,
                })
        return rows

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.to_rows(), columns=["n", "k", "lambda", "ratio", "class"])


class StrongLIReport(BaseModel):
    """Residual norms of each loading against the span of the others"""
    grid: List[int]
    residual_norms: List[List[float]]  # q rows, one column per grid point
    growth: List[float]                # mean per-doubling growth per factor
    gamma_sli: float
    collinear: bool
    verdict: str = Field(pattern="^(STRONG|WEAK)$")


class RealizationReport(BaseModel):
    """Sample checks on realized factors against the statistical tolerances"""
    factor_defect: float   # max |x x^T / M - I|
    cross_max: float       # max |x_i ytilde_k^T| / (M rms(ytilde_k)) over factors and rows
    fact: float
    orth_xy: float
    within_tolerance: bool


class IdiosyncrasyReport(BaseModel):
    """Variance decay of an averaging-sequence family applied to a sample"""
    label: str
    grid: List[int]
    variances: List[float]
    as_norms: List[float]
    decay: float
    delta: float
    top_eigvals: List[float]
    eigen_class: GrowthClass
    verdict: str = Field(pattern="^(IDIOSYNCRATIC-CONSISTENT|NOT-IDIOSYNCRATIC)$")


class SpectralDiagnostic(BaseModel):
    """Smoothed spectral density summary of one autocovariance estimate"""
    window: int
    sup_density: float
    argmax_omega: float
    sup_half_window: float
    operator_norm: float
    n: int
    szego_ok: bool
    line_suspect: bool
    verdict: str = Field(pattern="^(BOUNDED-INDICATIVE|LINE-SUSPECT)$")


class LineEntry(BaseModel):
    omega: float
    v: Union[float, List[float]]
    w: Optional[Union[float, List[float]]] = None


class LineModelReport(BaseModel):
    """Serialized purely deterministic line model"""
    lines: List[LineEntry]
    threshold: Optional[float] = None
    max_lines: Optional[int] = None
    n: Optional[int] = None
    energy_pd: Optional[float] = None
    energy_pnd: Optional[float] = None


class SeparabilityReport(BaseModel):
    """Rank-1 rearrangement test on the sub-block covariance"""
    block: Tuple[int, int]
    n_blocks: int
    defect: float = Field(ge=0.0, le=1.0)
    singular_values: List[float]


class FlockReport(BaseModel):
    """Outcome of flock extraction on a separable field"""
    q: int = Field(ge=0)
    verdict: str = Field(pattern="^(FLOCK|NO-FLOCK)$")
    growth: GrowthReport
    single_snapshot_q: Optional[int] = None
    single_snapshot_t: Optional[int] = None
    snapshot_discrepancy: float
    defect: Optional[float] = None
    loadings_file: Optional[str] = None
    factors_file: Optional[str] = None


class RunReport(BaseModel):
    """Top-level CLI report: flags, input fingerprint and outputs; command results are extra top-level fields"""
    model_config = ConfigDict(extra="allow")

    command: str
    version: str
    created: str
    flags: Dict[str, Any]
    input_file: Optional[str] = None
    input_sha256: Optional[str] = None
    outputs: Dict[str, str] = Field(default_factory=dict)
