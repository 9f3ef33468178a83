import numpy as np
import pytest
from numpy.testing import assert_allclose

from gfa.analysis.field import extract_flock, separability_check, snapshot_autocov, snapshot_lags
from gfa.analysis.wold import sample_autocov
from gfa.errors import PreconditionError
from gfa.synthesis.generators import gen_separable_field
from gfa.synthesis.specs import LoadingSpec, NoiseSpec, SpaceSpec, TimeSpec
from gfa.types import SeparableField

EXCHANGEABLE = SpaceSpec.exchangeable(2.0, 1.0)
AR1 = TimeSpec(kind="ar1", phi=0.9)
CONSTANT_SPACE = SpaceSpec(loadings=(LoadingSpec(family="constant"),), factor_values=(1.0,))


def exchangeable_field(N=2000, T=200, seed=7):
    return gen_separable_field(EXCHANGEABLE, AR1, N, T, seed=seed)


@pytest.fixture(scope="module")
def flock_run():
    field = exchangeable_field()
    return field, extract_flock(field)


# --- snapshot autocovariance ----------------------------------------------------

def test_constant_snapshot_lags():
    N = 40
    u = np.array([1.0, 2.0, -0.5])
    field = SeparableField(np.outer(np.ones(N), u))
    lags = snapshot_autocov(field, 1, L=5).lags
    assert_allclose(lags, 4.0 * (N - np.arange(6)) / N)


def test_snapshot_lags_scale_with_time_factor():
    field = gen_separable_field(EXCHANGEABLE, TimeSpec(kind="iid"), 200, 5, seed=1)
    v, u = field.truth["v"], field.truth["u"]
    reference = sample_autocov(v, L=20).lags
    for t0 in range(5):
        expected = u[t0] ** 2 * reference
        assert_allclose(snapshot_autocov(field, t0, L=20).lags, expected, rtol=1e-10, atol=1e-12 * expected[0])


def test_snapshot_lag_ratio_is_constant():
    field = gen_separable_field(EXCHANGEABLE, TimeSpec(kind="iid"), 200, 2, seed=2)
    a = snapshot_autocov(field, 0, L=20).lags
    b = snapshot_autocov(field, 1, L=20).lags
    assert_allclose(a * b[0], b * a[0], rtol=1e-10, atol=1e-12 * a[0] * b[0])


def test_snapshot_preconditions():
    field = SeparableField(np.ones((10, 3)))
    with pytest.raises(PreconditionError):
        snapshot_autocov(field, 3)
    with pytest.raises(PreconditionError):
        snapshot_autocov(field, 0, L=10)


def test_all_snapshot_lags_are_circular(rng):
    field = SeparableField(rng.standard_normal((64, 7)))
    lags = snapshot_lags(field, n_jobs=2)
    assert lags.shape == (64, 7)
    assert_allclose(lags[:, 3], sample_autocov(field.data[:, 3], estimator="circular").lags, atol=1e-12)


# --- flock extraction --------------------------------------------------------------

def test_exchangeable_flock(flock_run):
    field, result = flock_run
    report = result.report
    assert report.q == 1
    assert report.verdict == "FLOCK"
    target = field.truth["z"][0] * field.truth["u"]
    assert abs(np.corrcoef(result.factors[0], target)[0, 1]) >= 0.95
    assert report.defect <= 0.1
    assert report.snapshot_discrepancy <= 1e-8


def test_flock_and_residual_add_up(flock_run):
    field, result = flock_run
    assert_allclose(result.flock + result.residual, field.data, atol=1e-10)


def test_residual_is_orthogonal_to_loadings(flock_run):
    field, result = flock_run
    projection = result.loadings[:, 0] @ result.residual
    assert np.max(np.abs(projection)) <= 1e-8 * np.linalg.norm(result.loadings) * np.abs(field.data).max()
    cross = np.mean(result.flock * result.residual) / (result.flock.std() * result.residual.std())
    assert abs(cross) <= 5 / np.sqrt(field.T)


def test_flock_is_scale_equivariant(flock_run):
    field, result = flock_run
    scaled = extract_flock(field.scaled(3.0))
    assert scaled.report.q == result.report.q
    assert_allclose(scaled.flock, 3.0 * result.flock, rtol=1e-6, atol=1e-8)


def test_moving_average_space_has_no_flock(ma1):
    field = gen_separable_field(SpaceSpec(noise=ma1), AR1, 2000, 200, seed=3)
    result = extract_flock(field)
    assert result.report.q == 0
    assert result.report.verdict == "NO-FLOCK"
    assert np.all(result.flock == 0)
    assert_allclose(result.residual, field.data)
    assert result.factors.shape == (0, 200)


def test_deterministic_space_is_all_flock():
    field = gen_separable_field(CONSTANT_SPACE, AR1, 400, 50, seed=4)
    result = extract_flock(field)
    assert result.report.q == 1
    assert_allclose(result.flock, field.data, atol=1e-10)
    assert_allclose(result.residual, 0.0, atol=1e-10)


def test_zero_field_rejected():
    with pytest.raises(PreconditionError):
        extract_flock(SeparableField(np.zeros((64, 4))))


# --- separability -------------------------------------------------------------------

def test_product_field_is_separable():
    field = SeparableField(np.outer(np.arange(1.0, 41.0), np.arange(1.0, 31.0)))
    report = separability_check(field, (5, 5))
    assert report.defect < 1e-6
    assert report.n_blocks == 8 * 6


def test_generated_field_is_separable():
    field = gen_separable_field(EXCHANGEABLE, TimeSpec(kind="iid"), 500, 500, seed=5)
    assert separability_check(field, (10, 10)).defect <= 0.1


def test_sum_of_separable_fields_is_not():
    smooth = gen_separable_field(CONSTANT_SPACE, AR1, 500, 500, seed=6)
    rough = gen_separable_field(SpaceSpec(noise=NoiseSpec(kind="white")), TimeSpec(kind="iid"), 500, 500, seed=7)
    separable = separability_check(smooth, (10, 10)).defect
    mixed = separability_check(SeparableField(smooth.data + rough.data), (10, 10)).defect
    assert mixed > 0.03
    assert mixed > 1000 * separable


def test_subgrid_limits():
    field = SeparableField(np.ones((50, 50)))
    with pytest.raises(PreconditionError):
        separability_check(field, (21, 5))
    with pytest.raises(PreconditionError):
        separability_check(SeparableField(np.ones((4, 50))), (5, 5))
