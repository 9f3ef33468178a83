"""
Factor Analysis Pipeline

Runs the full decomposition of a replicate ensemble:
- Profile the nested eigenvalues of the sample second moment
- Detect the diverging eigenvalues and extract limit-PCA loadings
- Realize the factors through Q-R averaging sequences
- Save report, curves, loadings and factors
"""
import logging
from pathlib import Path
from typing import Dict, Optional, Sequence, Union

from gfa.analysis.spectral import (
    build_averaging_sequences,
    decompose,
    realization_report,
    realize_factors,
    sample_grid,
)
from gfa.config import Tolerances, settings
from gfa.errors import PreconditionError
from gfa.io.reports import write_json
from gfa.io.tables import read_matrix, write_frame, write_matrix
from gfa.models import RealizationReport
from gfa.types import CovarianceSupplier, EigenProfile, FactorRealization, GFADecomposition, SampleEnsemble

logger = logging.getLogger(__name__)


class FactorAnalyzer:
    """Decomposes a sample ensemble into aggregate and idiosyncratic parts"""

    def __init__(
        self,
        grid: Sequence[int] = None,
        m: int = None,
        gamma: float = None,
        tau: float = None,
        gamma_sli: float = None,
        tolerances: Tolerances = None,
        n_jobs: int = None,
    ):
        """
        Initialize analyzer

        Args:
            grid: Truncation grid (defaults to a doubling grid ending at min(N, M))
            m: Number of eigenvalues tracked (defaults to settings.TOP_M)
            gamma: Growth threshold (defaults to settings.GAMMA)
            tau: Divergence cap (defaults to settings.TAU)
            gamma_sli: Strong-LI growth threshold (defaults to settings.GAMMA_SLI)
            tolerances: Overrides settings.TOLERANCES
            n_jobs: joblib workers (defaults to settings.N_JOBS)
        """
        self.grid = list(grid) if grid else None
        self.m = m
        self.gamma = settings.GAMMA if gamma is None else gamma
        self.tau = settings.TAU if tau is None else tau
        self.gamma_sli = gamma_sli
        self.tolerances = tolerances or settings.TOLERANCES
        self.n_jobs = n_jobs

        self.ensemble: Optional[SampleEnsemble] = None
        self.profile: Optional[EigenProfile] = None
        self.decomposition: Optional[GFADecomposition] = None
        self.realization: Optional[FactorRealization] = None
        self.realization_report: Optional[RealizationReport] = None

    def load(self, path: Union[str, Path], header: bool = False) -> SampleEnsemble:
        """Load an N x M ensemble from CSV"""
        logger.info("Loading ensemble from %s", path)
        self.ensemble = SampleEnsemble(read_matrix(path, header=header), kind="replicates")
        logger.info("Loaded %d x %d ensemble", self.ensemble.N, self.ensemble.M)
        return self.ensemble

    def fit(self, ensemble: SampleEnsemble = None) -> GFADecomposition:
        """
        Decompose the uncentered sample covariance and realize the factors

        Args:
            ensemble: Sample to analyze (defaults to the loaded one)

        Returns:
            The GFA decomposition with loadings over all N rows
        """
        if ensemble is not None:
            self.ensemble = ensemble
        if self.ensemble is None:
            raise PreconditionError("No ensemble loaded")

        supplier = CovarianceSupplier.from_ensemble(self.ensemble)
        grid = self.grid or sample_grid(self.ensemble.N, self.ensemble.M, m=self.m)
        if grid[-1] < self.ensemble.N:
            logger.info("Detection grid capped at n=%d (M=%d); loadings use all N=%d rows",
                        grid[-1], self.ensemble.M, self.ensemble.N)
        self.decomposition, self.profile = decompose(
            supplier, grid, self.m, self.gamma, self.tau, self.gamma_sli, self.tolerances, self.n_jobs,
            extract_n=self.ensemble.N,
        )
        q = self.decomposition.q
        N = self.ensemble.N
        F = self.decomposition.loadings
        _, R, A = build_averaging_sequences(F, self.tolerances)
        self.realization = realize_factors(self.ensemble.data[:N], F, A, R, mode="sample",
                                           tolerances=self.tolerances)
        self.realization_report = realization_report(self.realization, self.tolerances)
        logger.info("Decomposition: q=%d, verdict %s", q, self.decomposition.growth_report.verdict)
        return self.decomposition

    def summary(self) -> Dict:
        if self.decomposition is None:
            raise PreconditionError("Run fit() first")
        report = self.decomposition.growth_report
        summary = {
            "q": self.decomposition.q,
            "growth_report": report,
            "strong_li": self.decomposition.sli_report,
            "grid": list(self.profile.grid),
            "N_used": self.decomposition.loadings.shape[0],
            "realization": self.realization_report,
        }
        return summary

    def save(self, out_dir: Union[str, Path]) -> Dict[str, Path]:
        """
        Write the growth report, eigenvalue curves, loadings and factors

        Returns:
            Mapping of output name to path
        """
        if self.decomposition is None:
            raise PreconditionError("Run fit() first")
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        report = self.decomposition.growth_report
        outputs = {
            "growth_report": write_json(out_dir / "growth_report.json", report),
            "curves": write_frame(out_dir / "curves.csv", report.to_frame()),
            "loadings": write_matrix(out_dir / "loadings.csv", self.realization.loadings),
            "factors": write_matrix(out_dir / "factors.csv", self.realization.factors),
        }
        if self.decomposition.sli_report is not None:
            outputs["strong_li"] = write_json(out_dir / "strong_li.json", self.decomposition.sli_report)
        logger.info("Saved %d outputs to %s", len(outputs), out_dir)
        return outputs
