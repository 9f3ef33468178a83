"""
Ground-truth ensemble generators

All randomness comes from Philox streams spawned from one SeedSequence, one
stream per role, so a (spec, seed) pair always reproduces the same draws.
"""
import logging
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from gfa.config import settings
from gfa.errors import PreconditionError
from gfa.synthesis.specs import LineSpec, LoadingSpec, NoiseSpec, SpaceSpec, TimeSpec
from gfa.types import CovarianceSupplier, SampleEnsemble, SeparableField

logger = logging.getLogger(__name__)

STREAM_ROLES = ("factors", "noise", "time", "space")


def rng_streams(seed: int) -> Dict[str, np.random.Generator]:
    """Independent counter-based generators keyed by role"""
    children = np.random.SeedSequence(seed).spawn(len(STREAM_ROLES))
    return {role: np.random.Generator(np.random.Philox(child)) for role, child in zip(STREAM_ROLES, children)}


def _check_size(**sizes):
    for name, value in sizes.items():
        if value is None or value < 1:
            raise PreconditionError(f"{name} must be at least 1, got {value}")


def loading_matrix(specs: Sequence[LoadingSpec], N: int) -> np.ndarray:
    return np.column_stack([spec.values(N) for spec in specs]) if specs else np.zeros((N, 0))


def gen_aggregate(
    specs: Sequence[LoadingSpec],
    N: int,
    M: int,
    seed: int = 0,
    factors: Optional[np.ndarray] = None,
) -> Tuple[SampleEnsemble, np.ndarray]:
    """
    Draw a q-aggregate sequence y = sum_i f_i x_i

    Args:
        specs: q distinct loading specs
        N: cross-section size
        M: number of replicates
        seed: 64-bit seed
        factors: optional fixed q x M factor values instead of standard normal draws

    Returns:
        (ensemble, true factor draws q x M)
    """
    _check_size(N=N, M=M)
    if not specs:
        raise PreconditionError("at least one loading spec is required")
    if len(set(specs)) != len(specs):
        raise PreconditionError("loading specs must be distinct")
    q = len(specs)
    if factors is None:
        x = rng_streams(seed)["factors"].standard_normal((q, M))
    else:
        x = np.asarray(factors, dtype=float).reshape(q, M)
    F = loading_matrix(specs, N)
    logger.debug("aggregate: q=%d N=%d M=%d seed=%d", q, N, M, seed)
    info = {"generator": "aggregate", "seed": seed, "loadings": [str(s) for s in specs]}
    return SampleEnsemble(F @ x, kind="replicates", seed_info=info), x


def gen_idiosyncratic(spec: NoiseSpec, N: int, M: int, seed: int = 0) -> SampleEnsemble:
    """Draw M independent columns of the given noise process"""
    _check_size(N=N, M=M)
    data = spec.sample(N, M, rng_streams(seed)["noise"])
    info = {"generator": "idiosyncratic", "seed": seed, "noise": str(spec)}
    return SampleEnsemble(data, kind="replicates", seed_info=info)


def gen_factor_model(
    specs: Sequence[LoadingSpec],
    noise: Optional[NoiseSpec],
    N: int,
    M: int,
    seed: int = 0,
) -> Tuple[SampleEnsemble, Dict[str, np.ndarray]]:
    """
    Aggregate part plus independent idiosyncratic noise

    Returns:
        (ensemble, truth) with truth keys loadings, factors, aggregate
    """
    aggregate, x = gen_aggregate(specs, N, M, seed)
    data = aggregate.data
    if noise is not None:
        data = data + gen_idiosyncratic(noise, N, M, seed).data
    info = {"generator": "factor_model", "seed": seed,
            "loadings": [str(s) for s in specs], "noise": str(noise) if noise else None}
    truth = {"loadings": loading_matrix(specs, N), "factors": x, "aggregate": np.array(aggregate.data)}
    return SampleEnsemble(data, kind="replicates", seed_info=info), truth


def gen_pd_stationary(
    lines: Sequence[LineSpec],
    N: int,
    M: int,
    seed: int = 0,
) -> Tuple[SampleEnsemble, Dict[str, np.ndarray]]:
    """
    Purely deterministic stationary signal y(k) = sum_i v_i cos(w_i k) + w_i sin(w_i k)

    Rows are the time index k = 1..N, columns are independent realizations.
    Amplitudes are zero-mean normals with the line's variance unless the
    line fixes them.

    Returns:
        (ensemble, truth) with truth keys omega (nu,), v and w (nu x M)
    """
    _check_size(N=N, M=M)
    omegas = [ln.omega for ln in lines]
    if len(set(omegas)) != len(omegas):
        raise PreconditionError(f"line frequencies must be distinct, got {omegas}")
    rng = rng_streams(seed)["factors"]
    k = np.arange(1, N + 1, dtype=float)
    data = np.zeros((N, M))
    v = np.zeros((len(lines), M))
    w = np.zeros((len(lines), M))
    for i, ln in enumerate(lines):
        scale = np.sqrt(ln.variance)
        draws = rng.standard_normal((2, M)) * scale
        v[i] = draws[0] if ln.v is None else ln.v
        w[i] = draws[1] if ln.w is None else ln.w
        data += np.outer(np.cos(ln.omega * k), v[i]) + np.outer(np.sin(ln.omega * k), w[i])
    info = {"generator": "pd_stationary", "seed": seed, "omegas": omegas}
    truth = {"omega": np.array(omegas), "v": v, "w": w}
    return SampleEnsemble(data, kind="timeseries", seed_info=info), truth


def gen_separable_field(
    space: SpaceSpec,
    time: TimeSpec,
    N: int,
    T: int,
    seed: int = 0,
) -> SeparableField:
    """
    Separable field y(k, t) = v(k) u(t)

    One draw of the space process per field, independent of the time series.
    The truth dict keeps v, u, z, the loadings and the flocking component
    F z u(t).
    """
    _check_size(N=N, T=T)
    streams = rng_streams(seed)
    F = space.loading_matrix(N)
    q = F.shape[1]
    if space.factor_values is not None:
        z = np.asarray(space.factor_values, dtype=float)
    else:
        z = streams["space"].standard_normal(q)
    aggregate = F @ z
    v = aggregate.copy()
    if space.noise is not None:
        v = v + space.noise.sample(N, 1, streams["noise"])[:, 0]
    u = time.sample(T, streams["time"])
    truth = {
        "v": v,
        "u": u,
        "z": z,
        "loadings": F,
        "flock": np.outer(aggregate, u),
    }
    random_space = space.noise is not None or space.factor_values is None
    space_model = None
    if random_space:
        space_model = CovarianceSupplier(source="analytic", max_n=N, builder=space.covariance, label="space")
    logger.debug("field: N=%d T=%d q=%d time=%s seed=%d", N, T, q, time, seed)
    return SeparableField(np.outer(v, u), space_model=space_model, time_model=str(time), truth=truth)


def aggregate_supplier(
    specs: Sequence[LoadingSpec],
    noise: Optional[NoiseSpec] = None,
    max_n: int = None,
) -> CovarianceSupplier:
    """Analytic supplier of Sigma = F F^T + Sigma_noise"""
    max_n = max_n or settings.MAX_N
    F_full = loading_matrix(specs, max_n)

    def build(n: int) -> np.ndarray:
        F = F_full[:n]
        sigma = F @ F.T
        if noise is not None:
            sigma = sigma + noise.covariance(n)
        return sigma

    label = " + ".join([str(s) for s in specs] + ([str(noise)] if noise else []))
    return CovarianceSupplier(source="analytic", max_n=max_n, builder=build, label=label)


def noise_supplier(noise: NoiseSpec, max_n: int = None) -> CovarianceSupplier:
    return CovarianceSupplier(source="analytic", max_n=max_n or settings.MAX_N,
                              builder=noise.covariance, label=str(noise))
