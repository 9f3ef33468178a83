import numpy as np
import pytest
from numpy.testing import assert_allclose

from gfa.analysis.averaging import AveragingFamily, idiosyncrasy_test, top_sample_eigenvalue
from gfa.errors import PreconditionError
from gfa.synthesis.generators import gen_idiosyncratic, loading_matrix
from gfa.synthesis.specs import NoiseSpec

GRID = [50, 100, 200, 400, 800]


def test_arithmetic_mean_and_spike_norms():
    grid = [4, 16, 64]
    assert_allclose(AveragingFamily.arithmetic_mean().norms(grid), [0.5, 0.25, 0.125])
    assert_allclose(AveragingFamily.unit_spike().norms(grid), [0.5, 0.25, 0.125])
    assert AveragingFamily.unit_spike().sequence(4).weights[-1] == 0.5


def test_sinusoid_norm_decay():
    grid = [100, 200, 400, 800, 1600]
    norms = AveragingFamily.sinusoid(1.0, "sin").norms(grid)
    assert np.all(np.diff(norms) < 0)
    assert_allclose(norms, np.sqrt(1 / (2 * np.array(grid))), rtol=0.05)
    with pytest.raises(PreconditionError):
        AveragingFamily.sinusoid(1.0, "tan")


def test_shifted_functional_weights():
    family = AveragingFamily.shifted_functional(lambda k: 0.9 ** k, label="0.9^k")
    assert_allclose(family.sequence(3).weights, 0.9 ** np.array([4.0, 5.0, 6.0]))
    assert family.label == "shifted-functional(0.9^k)"


def test_top_eigenvector_family(exchangeable):
    family = AveragingFamily.top_eigenvector(exchangeable)
    grid = [10, 100, 1000]
    assert_allclose(family.norms(grid), 1 / np.sqrt(1 + np.array(grid)), rtol=1e-10)
    assert np.all(family.sequence(10).weights > 0)


def test_qr_row_family(strong_pair):
    F = loading_matrix(strong_pair, 200)
    family = AveragingFamily.qr_row(F, 1)
    assert_allclose(family.sequence(100).weights, F[:100, 1] / 100, atol=1e-14)


def test_top_sample_eigenvalue_uses_smaller_side(rng):
    data = rng.standard_normal((30, 10))
    for n in (5, 30):
        block = data[:n]
        expected = np.linalg.eigvalsh(block @ block.T / 10).max()
        assert_allclose(top_sample_eigenvalue(data, n), expected, rtol=1e-10)


def test_white_noise_mean_is_idiosyncratic():
    y = gen_idiosyncratic(NoiseSpec(kind="white"), 800, 4000, seed=1)
    report = idiosyncrasy_test(y, AveragingFamily.arithmetic_mean(), GRID)
    scaled = np.array(report.variances) * np.array(GRID)
    assert np.all((scaled > 0.85) & (scaled < 1.15))
    assert report.verdict == "IDIOSYNCRATIC-CONSISTENT"


def test_growing_noise_spike_is_not_idiosyncratic():
    y = gen_idiosyncratic(NoiseSpec(kind="white_growing"), 800, 500, seed=2)
    report = idiosyncrasy_test(y, AveragingFamily.unit_spike(), GRID)
    assert np.all((np.array(report.variances) > 0.75) & (np.array(report.variances) < 1.25))
    assert report.decay < 2.0
    assert report.verdict == "NOT-IDIOSYNCRATIC"


def test_shifted_functional_on_moving_average(ma1):
    y = gen_idiosyncratic(ma1, 800, 500, seed=3)
    family = AveragingFamily.shifted_functional(lambda k: 0.9 ** k)
    report = idiosyncrasy_test(y, family, [10, 20, 40, 80, 160])
    assert report.decay >= 2.0
    assert report.verdict == "IDIOSYNCRATIC-CONSISTENT"


def test_idiosyncrasy_grid_preconditions():
    y = np.ones((100, 5))
    with pytest.raises(PreconditionError):
        idiosyncrasy_test(y, AveragingFamily.arithmetic_mean(), [10, 20])
    with pytest.raises(PreconditionError):
        idiosyncrasy_test(y, AveragingFamily.arithmetic_mean(), [10, 20, 400])
