"""Random channels and identifiers for simulations.

All draws use numpy's PCG64 generator (``np.random.default_rng``) so that a
seed fully determines the result.
"""
import numpy as np
from loguru import logger

from ddsr.core.exceptions import InfeasibleSeparation
from ddsr.models.channel import ChannelSpec, IdentifierPoly, ProblemDims, SincIdentifier
from ddsr.models.solvers import RegularGrid


def derive_seed(master_seed: int, index: int) -> int:
    """Stable per-trial seed derived from a master seed and a trial index."""
    state = np.random.SeedSequence([master_seed, index]).generate_state(1, dtype=np.uint64)
    return int(state[0])


def _unimodular(rng: np.random.Generator, size: int) -> np.ndarray:
    return np.exp(2j * np.pi * rng.uniform(0.0, 1.0, size))


def random_channel(dims: ProblemDims, S: int, rng_seed: int) -> ChannelSpec:
    """S features, uniform on X, with amplitudes on the complex unit circle."""
    if S < 0:
        raise ValueError("feature count must be nonnegative")
    rng = np.random.default_rng(rng_seed)
    tau = rng.uniform(-dims.T / 2, dims.T / 2, S)
    nu = rng.uniform(-dims.Omega / 2, dims.Omega / 2, S)
    eta = _unimodular(rng, S)
    return ChannelSpec.from_arrays(dims, eta, tau, nu)


def random_channel_on_grid(dims: ProblemDims, S: int, grid: RegularGrid, rng_seed: int) -> ChannelSpec:
    """S distinct points of a regular grid with unimodular amplitudes."""
    P, Q = grid.shape
    if S < 0 or S > P * Q:
        raise ValueError(f"cannot place {S} features on a {P}x{Q} grid")
    rng = np.random.default_rng(rng_seed)
    flat = np.sort(rng.choice(P * Q, size=S, replace=False))
    points = np.array([grid.point(int(i)) for i in flat]).reshape(-1, 2)
    return ChannelSpec.from_arrays(dims, _unimodular(rng, S), points[:, 0], points[:, 1])


def min_separation(dims: ProblemDims, tau: np.ndarray, nu: np.ndarray) -> float:
    """min over pairs j != k of min{|tau_j - tau_k| / T, |nu_j - nu_k| / Omega}."""
    tau = np.asarray(tau, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if tau.size < 2:
        return float("inf")
    d_tau = np.abs(np.subtract.outer(tau, tau)) / dims.T
    d_nu = np.abs(np.subtract.outer(nu, nu)) / dims.Omega
    d = np.minimum(d_tau, d_nu)
    return float(d[np.triu_indices(tau.size, k=1)].min())


def _gapped_positions(
    rng: np.random.Generator, S: int, delta: float
) -> np.ndarray:
    """Sorted offsets in [0, 1 - (S-1)*delta]; adding k*delta spaces them by >= delta."""
    free = max(1.0 - (S - 1) * delta, 0.0)
    return np.sort(rng.uniform(0.0, free, S))


def random_channel_min_sep(
    dims: ProblemDims,
    S: int,
    delta: float,
    rng_seed: int,
    max_attempts: int = 100,
) -> ChannelSpec:
    """Random channel whose minimal relative separation equals ``delta`` exactly.

    Each axis is drawn uniformly from the configurations whose sorted
    neighbours are at least ``delta`` apart (the law rejection sampling would
    produce). The pair with the smallest slack is then pulled together until
    its separation is exactly ``delta``; points beyond it shift by the same
    amount, so no other separation shrinks.
    """
    if S < 0 or delta < 0:
        raise ValueError("feature count and separation must be nonnegative")
    if S >= 2 and (S - 1) * delta > 1.0:
        raise InfeasibleSeparation(
            f"{S} features cannot be separated by {delta} on a unit interval"
        )
    rng = np.random.default_rng(rng_seed)
    gaps = delta * np.arange(S)
    for attempt in range(max_attempts):
        offsets = [_gapped_positions(rng, S, delta), _gapped_positions(rng, S, delta)]
        if S >= 2:
            slacks = [np.diff(o) for o in offsets]
            axis = int(np.argmin([s.min() for s in slacks]))
            i = int(np.argmin(slacks[axis]))
            offsets[axis][i + 1 :] -= slacks[axis][i]
        tau = dims.T * (offsets[0] + gaps - 0.5)
        nu = dims.Omega * (offsets[1] + gaps - 0.5)
        nu = nu[rng.permutation(S)]
        tau, nu = dims.clip(tau, nu)
        sep = min_separation(dims, tau, nu)
        if S < 2 or abs(sep - delta) <= 1e-12:
            return ChannelSpec.from_arrays(dims, _unimodular(rng, S), tau, nu)
        logger.debug(f"Separation attempt {attempt} realized {sep!r}, retrying")
    raise InfeasibleSeparation(
        f"no channel with separation {delta} after {max_attempts} attempts"
    )


def random_identifier(dims: ProblemDims, rng_seed: int) -> IdentifierPoly:
    """Trigonometric identifier with coefficients on the complex unit circle."""
    rng = np.random.default_rng(rng_seed)
    return IdentifierPoly.from_array(dims, _unimodular(rng, dims.L1))


def random_sinc_identifier(dims: ProblemDims, rng_seed: int) -> SincIdentifier:
    """Sinc-sum identifier with real unimodular (+1/-1) base coefficients."""
    rng = np.random.default_rng(rng_seed)
    base = rng.choice(np.array([-1.0, 1.0]), size=dims.L1)
    return SincIdentifier(base=tuple(float(b) for b in base), dims=dims)
