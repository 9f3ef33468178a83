import numpy as np
import pytest
from numpy.testing import assert_allclose

from gfa.analysis.spectral import eigen_profile, loading_gramian_eigenvalues
from gfa.errors import PreconditionError
from gfa.synthesis.generators import (
    aggregate_supplier,
    gen_aggregate,
    gen_factor_model,
    gen_idiosyncratic,
    gen_pd_stationary,
    gen_separable_field,
    loading_matrix,
    noise_supplier,
)
from gfa.synthesis.specs import LineSpec, LoadingSpec, NoiseSpec, SpaceSpec, TimeSpec


# --- specs ---------------------------------------------------------------

@pytest.mark.parametrize("text, family, param", [
    ("constant(2.5)", "constant", 2.5),
    ("sign_pattern(4)", "sign_pattern", 4.0),
    ("geometric(0.5)", "geometric", 0.5),
    ("saturating( 0.25 )", "saturating", 0.25),
    ("cosine(1.3)", "cosine", 1.3),
])
def test_loading_spec_parse(text, family, param):
    spec = LoadingSpec.parse(text)
    assert spec.family == family
    assert spec.param == param


@pytest.mark.parametrize("text", ["geometric(1.0)", "sign_pattern(3)", "unknown(1)", "constant(a)", "constant(1, 2)"])
def test_loading_spec_parse_rejects(text):
    with pytest.raises(PreconditionError):
        LoadingSpec.parse(text)


def test_loading_values():
    assert_allclose(LoadingSpec(family="sign_pattern", param=2).values(4), [1, -1, 1, -1])
    assert_allclose(LoadingSpec(family="sign_pattern", param=4).values(6), [1, 1, -1, -1, 1, 1])
    assert_allclose(LoadingSpec(family="geometric", param=0.5).values(3), [0.5, 0.25, 0.125])
    assert_allclose(LoadingSpec(family="saturating", param=0.5).values(2), [0.5, 0.75])


def test_empty_moving_average_rejected():
    with pytest.raises(ValueError):
        NoiseSpec(kind="moving_average", coeffs=())
    with pytest.raises(PreconditionError):
        NoiseSpec.moving_average(1, [])
    with pytest.raises(PreconditionError):
        NoiseSpec.moving_average(2, [1.0, 0.5])


def test_ma1_autocov_and_symbol(ma1):
    assert_allclose(ma1.autocov(), [1.25, 0.5])
    assert_allclose(ma1.spectral_sup(), 2.25, rtol=1e-12)


def test_ma1_top_eigenvalue_bounded(ma1):
    profile = eigen_profile(noise_supplier(ma1, max_n=500), [125, 250, 500], m=1)
    assert np.all(profile.eigvals <= 2.25)


def test_line_spec_parse():
    assert LineSpec.parse("0.7").omega == 0.7
    assert LineSpec.parse("0.7:2.0").variance == 2.0
    line = LineSpec.parse("0.7:1.0:-0.5")
    assert (line.v, line.w) == (1.0, -0.5)
    with pytest.raises(PreconditionError):
        LineSpec.parse("3.5")
    with pytest.raises(PreconditionError):
        LineSpec.parse("x:1")


# --- aggregate ------------------------------------------------------------

def test_constant_loading_with_fixed_factor():
    ensemble, x = gen_aggregate([LoadingSpec(family="constant")], 3, 1, factors=[[1.7]])
    assert_allclose(ensemble.data[:, 0], [1.7, 1.7, 1.7])
    assert_allclose(x, [[1.7]])


def test_aggregate_preconditions():
    with pytest.raises(PreconditionError):
        gen_aggregate([LoadingSpec(family="constant")], 0, 10)
    with pytest.raises(PreconditionError):
        gen_aggregate([LoadingSpec(family="constant"), LoadingSpec(family="constant")], 10, 10)


def test_generation_is_reproducible(strong_pair):
    a, _ = gen_aggregate(strong_pair, 50, 20, seed=99)
    b, _ = gen_aggregate(strong_pair, 50, 20, seed=99)
    c, _ = gen_aggregate(strong_pair, 50, 20, seed=100)
    assert np.array_equal(a.data, b.data)
    assert not np.array_equal(a.data, c.data)


def test_weakly_independent_gramian(weak_pair):
    F = loading_matrix(weak_pair, 10_000)
    lam = loading_gramian_eigenvalues(F)
    assert_allclose(lam[1], 1 / 6, atol=1e-3)
    # |f2|^2 = n - 2 sum 2^-k + sum 4^-k -> n - 5/3
    assert_allclose(F[:, 1] @ F[:, 1], 10_000 - 5 / 3, atol=1e-8)


def test_geometric_loading_eigenvalue():
    supplier = aggregate_supplier([LoadingSpec(family="geometric", param=0.5)], max_n=50)
    lam = eigen_profile(supplier, [50], m=1).eigvals[0, 0]
    assert_allclose(lam, 1 / 3, atol=1e-6)


def test_sample_covariance_converges(strong_pair):
    M = 20_000
    ensemble, _ = gen_aggregate(strong_pair, 20, M, seed=4)
    F = loading_matrix(strong_pair, 20)
    target = F @ F.T
    assert np.max(np.abs(ensemble.second_moment() - target)) <= 10 / np.sqrt(M) * np.max(np.abs(target))


# --- idiosyncratic ----------------------------------------------------------

def test_white_noise_mean_variance():
    N, M = 1000, 4000
    ensemble = gen_idiosyncratic(NoiseSpec(kind="white"), N, M, seed=1)
    variance = np.mean(ensemble.data.mean(axis=0) ** 2)
    assert_allclose(variance * N, 1.0, rtol=0.1)


def test_growing_white_noise_spike_does_not_decay():
    N, M = 1000, 1000
    ratios = []
    for trial in range(100):
        data = gen_idiosyncratic(NoiseSpec(kind="white_growing"), N, M, seed=trial).data
        for n in (10, 100, 1000):
            s = data[n - 1] / np.sqrt(n)
            ratios.append(np.mean(s ** 2))
    ratios = np.array(ratios)
    assert np.all((ratios > 0.8) & (ratios < 1.2))
    assert 0.9 < ratios.mean() < 1.1


@pytest.mark.parametrize("noise", [
    NoiseSpec(kind="white"),
    NoiseSpec(kind="moving_average", coeffs=(1.0, 0.5)),
    NoiseSpec(kind="banded", bandwidth=3, decay=0.5),
])
def test_bounded_noise_mean_variance_decays(noise):
    for trial in range(100):
        data = gen_idiosyncratic(noise, 10_000, 40, seed=trial).data
        variances = [np.mean(data[:n].mean(axis=0) ** 2) for n in (100, 1000, 10_000)]
        assert variances[0] > variances[1] > variances[2]


def test_factor_model_truth(strong_pair, ma1):
    ensemble, truth = gen_factor_model(strong_pair, ma1, 100, 30, seed=3)
    noise = gen_idiosyncratic(ma1, 100, 30, seed=3).data
    assert_allclose(ensemble.data, truth["aggregate"] + noise)
    assert_allclose(truth["aggregate"], truth["loadings"] @ truth["factors"])


# --- purely deterministic stationary ------------------------------------------

def test_single_fixed_line():
    ensemble, _ = gen_pd_stationary([LineSpec(omega=np.pi / 4, v=1.0, w=0.0)], 8, 1)
    k = np.arange(1, 9)
    assert_allclose(ensemble.data[:, 0], np.cos(np.pi * k / 4), atol=1e-12)


def test_no_lines_is_zero():
    ensemble, truth = gen_pd_stationary([], 16, 3)
    assert np.all(ensemble.data == 0)
    assert truth["v"].shape == (0, 3)


def test_two_lines_have_rank_four():
    ensemble, _ = gen_pd_stationary([LineSpec(omega=0.5), LineSpec(omega=2.0)], 50, 10, seed=6)
    assert np.linalg.matrix_rank(ensemble.data) == 4


def test_pd_stationary_is_reproducible():
    lines = [LineSpec(omega=0.5), LineSpec(omega=2.0, variance=3.0)]
    a, truth_a = gen_pd_stationary(lines, 64, 5, seed=11)
    b, truth_b = gen_pd_stationary(lines, 64, 5, seed=11)
    c, _ = gen_pd_stationary(lines, 64, 5, seed=12)
    assert np.array_equal(a.data, b.data)
    assert np.array_equal(truth_a["v"], truth_b["v"])
    assert np.array_equal(truth_a["w"], truth_b["w"])
    assert not np.array_equal(a.data, c.data)


def test_duplicate_frequencies_rejected():
    with pytest.raises(PreconditionError):
        gen_pd_stationary([LineSpec(omega=1.0), LineSpec(omega=1.0, variance=2.0)], 20, 1)


# --- separable fields ----------------------------------------------------------

def test_deterministic_space_sinusoid_time():
    space = SpaceSpec(loadings=(LoadingSpec(family="constant"),), factor_values=(1.0,))
    field = gen_separable_field(space, TimeSpec(kind="sinusoid", omega=1.0), 4, 30, seed=2)
    t = np.arange(1, 31)
    assert_allclose(field.data, np.tile(np.sin(t), (4, 1)), atol=1e-12)
    assert field.space_model is None


def test_snapshot_covariance_structure():
    space = SpaceSpec.exchangeable(2.0, 1.0)
    field = gen_separable_field(space, TimeSpec(kind="iid"), 3, 10, seed=5)
    v, u = field.truth["v"], field.truth["u"]
    t0 = 4
    assert_allclose(np.outer(field.data[:, t0], field.data[:, t0]), u[t0] ** 2 * np.outer(v, v))
    assert_allclose(field.space_model.eval(3), [[2, 1, 1], [1, 2, 1], [1, 1, 2]])


def test_flock_truth():
    space = SpaceSpec(loadings=(LoadingSpec(family="constant"),), noise=NoiseSpec(kind="white", sigma=0.3))
    field = gen_separable_field(space, TimeSpec(kind="ar1", phi=0.9), 20, 15, seed=1)
    z, u = field.truth["z"], field.truth["u"]
    assert_allclose(field.truth["flock"], np.outer(np.ones(20) * z[0], u))


def test_ar1_is_unit_variance():
    field = gen_separable_field(SpaceSpec(loadings=(LoadingSpec(family="constant"),), factor_values=(1.0,)),
                                TimeSpec(kind="ar1", phi=0.9), 1, 20_000, seed=8)
    assert abs(np.var(field.truth["u"]) - 1.0) < 0.15


def test_field_preconditions():
    with pytest.raises(PreconditionError):
        gen_separable_field(SpaceSpec.exchangeable(2.0, 1.0), TimeSpec(kind="iid"), 5, 0)
    with pytest.raises(PreconditionError):
        SpaceSpec.exchangeable(1.0, 2.0)
