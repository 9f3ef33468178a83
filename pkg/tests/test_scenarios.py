"""
End-to-end checks on the shipped scenario files
"""
from pathlib import Path

import numpy as np
import pytest

from gfa.analysis.field import extract_flock
from gfa.analysis.pipeline import FactorAnalyzer
from gfa.analysis.spectral import (
    build_averaging_sequences,
    canonical_correlations,
    extract_loadings,
    loading_gramian_eigenvalues,
    realize_factors,
    strong_li_diagnostic,
)
from gfa.analysis.wold import detect_lines, wold_split
from gfa.synthesis.scenario import parse_scenario, run_scenario
from gfa.types import SampleEnsemble, SeparableField

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def generate(name, **overrides):
    cfg = parse_scenario(SCENARIOS / f"{name}.cfg")
    return cfg, run_scenario(cfg, **overrides)


@pytest.mark.parametrize("name, q", [("exchangeable", 1), ("white_noise", 0), ("geometric", 0)])
def test_factor_count(name, q):
    _, result = generate(name)
    analyzer = FactorAnalyzer()
    decomposition = analyzer.fit(SampleEnsemble(result.data))
    assert decomposition.q == q


def test_two_pd_is_weakly_independent():
    _, result = generate("two_pd")
    F = result.truth["loadings"]
    assert abs(loading_gramian_eigenvalues(F)[1] - 1 / 6) < 1e-3
    assert strong_li_diagnostic(F, [1250, 2500, 5000, 10_000]).verdict == "WEAK"


def test_factor_recovery():
    _, result = generate("factor_recovery")
    ensemble = SampleEnsemble(result.data)
    F = extract_loadings(ensemble.second_moment(), 2)
    _, R, A = build_averaging_sequences(F)
    realization = realize_factors(ensemble, F, A, R)
    assert np.all(canonical_correlations(realization.factors, result.truth["factors"]) >= 0.95)


def test_two_lines():
    _, result = generate("two_lines")
    series = result.data[:, 0]
    omegas = detect_lines(series)
    assert np.allclose(omegas, [0.7, 2.1], atol=4 * np.pi / series.size)
    pd_part, pnd_part, model = wold_split(series, omegas)
    assert model.nu == 2
    assert pnd_part @ pnd_part < 0.1 * (pd_part @ pd_part)


def test_flock_exchangeable():
    _, result = generate("flock_exchangeable")
    assert abs(result.truth["z"][0]) < 0.25
    flock = extract_flock(SeparableField(result.data))
    assert flock.report.verdict == "FLOCK"
    assert flock.report.q == 1
    target = result.truth["z"][0] * result.truth["u"]
    assert abs(np.corrcoef(flock.factors[0], target)[0, 1]) >= 0.95
    assert flock.report.defect <= 0.1


def test_flock_ma():
    _, result = generate("flock_ma")
    assert extract_flock(SeparableField(result.data)).report.verdict == "NO-FLOCK"
