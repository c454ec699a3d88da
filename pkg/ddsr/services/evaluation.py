"""Comparison of estimated and true channels.

The operator-norm error treats H restricted to the identifier space as an
operator into L2([-T/2, T/2]). Identifiers are represented by their
coefficients and the codomain by midpoint-rule samples weighted with
sqrt(T/M), so the largest singular value of the resulting M x L1 matrix
approximates the operator norm.
"""
import math
from typing import Callable, Optional, Union

import numpy as np
from loguru import logger
from scipy.optimize import linear_sum_assignment

from ddsr.models.channel import ChannelSpec, ProblemDims, require_same_dims
from ddsr.models.evaluation import MatchedErrors, NormBasis, OperatorNormReport

# Relative change between M and 2M above which the discretization is reported as unresolved.
_RESOLUTION_TOL = 1e-3


def match_features(truth: ChannelSpec, estimate: ChannelSpec) -> MatchedErrors:
    """Optimal injective matching on the distance sqrt((dtau/T)^2 + (dnu/Omega)^2)."""
    dims = require_same_dims(truth.dims, estimate.dims)
    t_tau, t_nu, t_eta = truth.taus(), truth.nus(), truth.etas()
    e_tau, e_nu, e_eta = estimate.taus(), estimate.nus(), estimate.etas()
    if truth.S == 0 or estimate.S == 0:
        return MatchedErrors(
            max_tau_err=None,
            max_nu_err=None,
            max_eta_err=None,
            unmatched_truth=truth.S,
            unmatched_estimate=estimate.S,
        )
    cost = np.hypot(
        np.subtract.outer(t_tau, e_tau) / dims.T,
        np.subtract.outer(t_nu, e_nu) / dims.Omega,
    )
    rows, cols = linear_sum_assignment(cost)
    return MatchedErrors(
        max_tau_err=float(np.abs(t_tau[rows] - e_tau[cols]).max()),
        max_nu_err=float(np.abs(t_nu[rows] - e_nu[cols]).max()),
        max_eta_err=float(np.abs(t_eta[rows] - e_eta[cols]).max()),
        assignment=[(int(i), int(j)) for i, j in zip(rows, cols)],
        total_cost=float(cost[rows, cols].sum()),
        unmatched_truth=truth.S - len(rows),
        unmatched_estimate=estimate.S - len(cols),
    )


def trig_synthesis(dims: ProblemDims, x: np.ndarray) -> np.ndarray:
    """exp(2 pi i Omega k x / L1) for k = -N1..N1, shape (len(x), L1)."""
    return np.exp(2j * np.pi * (dims.Omega / dims.L1) * np.multiply.outer(x, dims.u_indices))


def sinc_synthesis(dims: ProblemDims, x: np.ndarray, R: int = 1) -> np.ndarray:
    """Partially periodic sinc sums, one per base coefficient, shape (len(x), L1)."""
    m = dims.u_indices
    shifts = np.arange(-R, R + 1) * dims.L1
    arg = dims.Omega * x[:, None, None] - m[None, :, None] - shifts[None, None, :]
    return np.sinc(arg).sum(axis=-1).astype(complex)


Synthesis = Callable[[ProblemDims, np.ndarray], np.ndarray]
_SYNTHESIS = {NormBasis.TRIG: trig_synthesis, NormBasis.SINC: sinc_synthesis}


def coefficient_to_samples(channel: ChannelSpec, M: int, synthesis: Synthesis) -> np.ndarray:
    """M x L1 matrix from identifier coefficients to weighted midpoint samples of H w."""
    dims = channel.dims
    t = -dims.T / 2 + (np.arange(M) + 0.5) * dims.T / M
    if channel.S == 0:
        return np.zeros((M, dims.L1), dtype=complex)
    shifted = np.subtract.outer(t, channel.taus())
    basis = synthesis(dims, shifted.ravel()).reshape(M, channel.S, dims.L1)
    weights = np.exp(2j * np.pi * np.outer(t, channel.nus())) * channel.etas()
    return np.sqrt(dims.T / M) * np.einsum("ms,msk->mk", weights, basis)


def _operator_norm(channel: ChannelSpec, M: int, synthesis: Synthesis) -> float:
    if channel.S == 0:
        return 0.0
    return float(np.linalg.norm(coefficient_to_samples(channel, M, synthesis), ord=2))


def _difference_norm(
    truth: ChannelSpec, estimate: ChannelSpec, M: int, synthesis: Synthesis
) -> float:
    K = coefficient_to_samples(truth, M, synthesis) - coefficient_to_samples(estimate, M, synthesis)
    return float(np.linalg.norm(K, ord=2))


def operator_norm(
    channel: ChannelSpec, M: Optional[int] = None, basis: Union[NormBasis, str] = NormBasis.TRIG
) -> float:
    """Operator norm of a single channel on the chosen identifier space."""
    basis = NormBasis(basis)
    return _operator_norm(channel, M or 8 * channel.dims.L1, _SYNTHESIS[basis])


def to_db(ratio: float) -> float:
    if ratio == 0:
        return -math.inf
    return float(10 * np.log10(ratio))


def operator_norm_err(
    truth: ChannelSpec,
    estimate: ChannelSpec,
    M: Optional[int] = None,
    basis: Union[NormBasis, str] = NormBasis.TRIG,
    check_resolution: bool = True,
) -> OperatorNormReport:
    """||H_truth - H_estimate|| and its dB ratio against ||H_truth||.

    M defaults to 8*L1. With ``check_resolution`` the error is recomputed at
    2M and the relative change is stored on the report.
    """
    dims = require_same_dims(truth.dims, estimate.dims)
    basis = NormBasis(basis)
    M = M or 8 * dims.L1
    if M < dims.L1:
        raise ValueError(f"need at least L1={dims.L1} discretization points, got {M}")
    synthesis = _SYNTHESIS[basis]

    abs_err = _difference_norm(truth, estimate, M, synthesis)
    reference = _operator_norm(truth, M, synthesis)

    change = None
    if check_resolution and abs_err > 0:
        finer = _difference_norm(truth, estimate, 2 * M, synthesis)
        change = abs(finer - abs_err) / abs_err
        if change > _RESOLUTION_TOL:
            logger.warning(
                f"Operator norm not resolved at M={M}: relative change {change:.2e} at 2M"
            )

    if abs_err == 0:
        rel_db = -math.inf
    elif reference == 0:
        rel_db = math.inf
    else:
        rel_db = to_db(abs_err / reference)
    return OperatorNormReport(
        abs_err=abs_err,
        rel_err_db=rel_db,
        reference_norm=reference,
        M=M,
        basis=basis,
        resolution_change=change,
    )


def classify_success(report: OperatorNormReport, threshold_db: float = -40.0) -> bool:
    """Success when the relative error is at most ``threshold_db``."""
    return report.rel_err_db <= threshold_db
