"""
Configuration for the GFA toolkit

All defaults live here. Environment variables prefixed with ``GFA_`` (or a
``.env`` file) override them, e.g. ``GFA_GAMMA=1.8`` or
``GFA_TOLERANCES__PSD_REL=1e-7``.
"""
from pydantic import BaseModel, ConfigDict, Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Tolerances(BaseModel):
    """Numerical and statistical tolerances shared by every check"""
    model_config = ConfigDict(frozen=True)

    # Machine-precision checks
    psd_rel: float = Field(default=1e-8, gt=0)    # scaled by max |Sigma_n|
    weyl_rel: float = Field(default=1e-8, gt=0)
    orth: float = Field(default=1e-10, gt=0)
    rank_rel: float = Field(default=1e-10, gt=0)  # scaled by the top eigenvalue
    num: float = Field(default=1e-10, gt=0)
    szego: float = Field(default=1e-2, ge=0)

    # Sample-statistical checks
    fact: float = Field(default=0.1, gt=0)
    orth_xy: float = Field(default=0.1, gt=0)


class Settings(BaseSettings):
    """Toolkit settings"""
    model_config = SettingsConfigDict(
        env_prefix="GFA_",
        env_file=".env",
        env_nested_delimiter="__",
        case_sensitive=False,
        extra="ignore",
    )

    TOLERANCES: Tolerances = Tolerances()

    # Factor-count detection
    GAMMA: float = 1.5             # per-doubling growth threshold
    TAU: float = 10.0              # cap relative to the median bounded eigenvalue
    GRID_POINTS: int = 5
    TOP_M: int = 5

    # Strong linear independence / idiosyncrasy
    GAMMA_SLI: float = 1.3
    IDIO_DECAY: float = 2.0

    # Stationary analysis
    LINE_THRESHOLD: float = 20.0          # x periodogram median
    LINE_LEAKAGE_MARGIN: float = 10.0     # x Hann sidelobe envelope of a stronger peak
    LINE_GROWTH: float = 1.6              # sup growth from half to full window
    SPECTRAL_WINDOW: int = 64
    STATIONARY_LAG_FRACTION: int = 8
    MIN_SERIES_LENGTH: int = 64

    # Separable fields
    MAX_SUBGRID: int = 20

    # Limits and execution
    MAX_N: int = 10000
    N_JOBS: int = 1

    # Output
    CSV_DIGITS: int = 17
    LOG_LEVEL: str = "INFO"


settings = Settings()
