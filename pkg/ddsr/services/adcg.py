"""Alternating descent conditional gradient over the continuous domain X.

Locations are optimized in the scaled coordinates p = Omega * tau and
q = T * nu, where one unit corresponds to one sample spacing of the
Dirichlet kernels in either direction.
"""
from typing import Callable, List, Tuple

import numpy as np
from loguru import logger

from ddsr.models.channel import ChannelSpec, ProblemDims, SampleVector
from ddsr.models.solvers import (
    AdcgConfig,
    DescentConfig,
    DescentResult,
    IterationRecord,
    RecoveryResult,
    RegularGrid,
    StopReason,
)
from ddsr.services.measurement import MeasurementOperator
from ddsr.services.sparse_solvers import lasso_with_config
from ddsr.utils.atoms import correlate_grid


def location_objective_grad(
    eta: np.ndarray,
    tau: np.ndarray,
    nu: np.ndarray,
    G: MeasurementOperator,
    y: np.ndarray,
) -> Tuple[float, np.ndarray, np.ndarray]:
    """F(tau, nu) = ||G Z(tau, nu) eta - y||^2 and its gradients in tau and nu."""
    eta = np.asarray(eta, dtype=complex)
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    nu = np.atleast_1d(np.asarray(nu, dtype=float))
    y = np.asarray(y, dtype=complex)
    if not (eta.shape == tau.shape == nu.shape):
        raise ValueError("eta, tau and nu must have the same length")
    if tau.size == 0:
        return float(np.linalg.norm(y) ** 2), np.zeros(0), np.zeros(0)
    rho = G.atom_images(tau, nu) @ eta - y
    g_tau, g_nu = G.atom_image_jacobians(tau, nu)
    grad_tau = 2.0 * np.real(eta.conj() * (g_tau.conj().T @ rho))
    grad_nu = 2.0 * np.real(eta.conj() * (g_nu.conj().T @ rho))
    return float(np.vdot(rho, rho).real), grad_tau, grad_nu


def _projected_search(
    dims: ProblemDims,
    value_grad: Callable[[np.ndarray, np.ndarray], Tuple[float, np.ndarray, np.ndarray]],
    tau: np.ndarray,
    nu: np.ndarray,
    cfg: DescentConfig,
    stop_below: float,
) -> DescentResult:
    """Armijo-backtracked projected gradient descent in scaled coordinates."""
    bound = dims.time_bandwidth / 2
    p, q = dims.Omega * tau, dims.T * nu
    F, g_tau, g_nu = value_grad(tau, nu)
    trace = [F]
    steps = 0
    for _ in range(cfg.max_steps):
        gp, gq = g_tau / dims.Omega, g_nu / dims.T
        gmax = max(np.abs(gp).max(initial=0.0), np.abs(gq).max(initial=0.0))
        if np.sqrt(gp @ gp + gq @ gq) <= stop_below or gmax == 0:
            break
        alpha = cfg.initial_step / gmax
        accepted = False
        while alpha * gmax >= cfg.step_floor:
            p_new = np.clip(p - alpha * gp, -bound, bound)
            q_new = np.clip(q - alpha * gq, -bound, bound)
            t_new, n_new = dims.clip(p_new / dims.Omega, q_new / dims.T)
            F_new, gt_new, gn_new = value_grad(t_new, n_new)
            decrease = cfg.armijo * (gp @ (p - p_new) + gq @ (q - q_new))
            if F_new <= F - decrease:
                accepted = True
                break
            alpha /= 2
        if not accepted:
            break
        p, q, tau, nu = p_new, q_new, t_new, n_new
        F, g_tau, g_nu = F_new, gt_new, gn_new
        trace.append(F)
        steps += 1
    return DescentResult(tau=tau, nu=nu, objective_trace=trace, steps=steps)


def local_descent(
    eta: np.ndarray,
    tau: np.ndarray,
    nu: np.ndarray,
    G: MeasurementOperator,
    y: np.ndarray,
    cfg: DescentConfig = DescentConfig(),
) -> DescentResult:
    """Minimize F over the locations with eta fixed; F never increases."""
    y = np.asarray(y, dtype=complex)
    tau, nu = G.dims.clip(np.asarray(tau, dtype=float), np.asarray(nu, dtype=float))
    stop_below = cfg.grad_tol * float(np.linalg.norm(y) ** 2)
    return _projected_search(
        G.dims,
        lambda t, n: location_objective_grad(eta, t, n, G, y),
        tau,
        nu,
        cfg,
        stop_below,
    )


def refine_expansion_point(
    G: MeasurementOperator, residual: np.ndarray, tau: float, nu: float, cfg: DescentConfig
) -> Tuple[float, float]:
    """Local ascent of |<r, G a(tau, nu)>|^2 from a grid maximizer."""

    def negative_correlation(t: np.ndarray, n: np.ndarray):
        image = G.atom_images(t, n)[:, 0]
        g_tau, g_nu = G.atom_image_jacobians(t, n)
        s = np.vdot(image, residual)
        grad_tau = -2.0 * np.real(np.conj(s) * np.vdot(g_tau[:, 0], residual))
        grad_nu = -2.0 * np.real(np.conj(s) * np.vdot(g_nu[:, 0], residual))
        return -float(abs(s) ** 2), np.array([grad_tau]), np.array([grad_nu])

    result = _projected_search(
        G.dims, negative_correlation, np.array([tau]), np.array([nu]), cfg, 0.0
    )
    return float(result.tau[0]), float(result.nu[0])


def adcg(y: SampleVector, G: MeasurementOperator, cfg: AdcgConfig = AdcgConfig()) -> RecoveryResult:
    """Grid expansion, then alternating LASSO and location descent, until a stop fires.

    Stops when ``max_features`` atoms survive pruning, when the residual drops
    below ``residual_tol * ||y||``, when the objective decreases by less than
    ``stagnation_tol`` relative over an outer iteration, or after
    ``max_outer_iters`` outer iterations.
    """
    dims = G.dims
    data = y.array()
    y_norm = float(np.linalg.norm(data))
    grid = RegularGrid.over(dims, *cfg.grid)
    tau = np.zeros(0)
    nu = np.zeros(0)
    eta = np.zeros(0, dtype=complex)
    residual = data.copy()
    objective = y_norm**2
    history: List[IterationRecord] = []
    stop = StopReason.MAX_ITERATIONS

    if y_norm <= cfg.residual_tol * y_norm:
        stop = StopReason.RESIDUAL
    else:
        for outer in range(cfg.max_outer_iters):
            corr = correlate_grid(dims, G.adjoint(residual), grid)
            t_new, n_new = grid.point(int(np.argmax(corr)))
            if cfg.refine_expansion:
                t_new, n_new = refine_expansion_point(G, residual, t_new, n_new, cfg.descent)
            tau = np.append(tau, t_new)
            nu = np.append(nu, n_new)
            eta = np.append(eta, 0j)

            for _ in range(cfg.inner_iters):
                eta = lasso_with_config(G.atom_images(tau, nu), data, cfg.lam, cfg.lasso, x0=eta).eta
                if cfg.local_descent:
                    moved = local_descent(eta, tau, nu, G, data, cfg.descent)
                    tau, nu = moved.tau, moved.nu

            mags = np.abs(eta)
            keep = mags > cfg.prune_tol * mags.max(initial=0.0)
            tau, nu, eta = tau[keep], nu[keep], eta[keep]

            residual = data - G.atom_images(tau, nu) @ eta if eta.size else data.copy()
            res_norm = float(np.linalg.norm(residual))
            previous, objective = objective, res_norm**2 + cfg.lam * float(np.abs(eta).sum())
            history.append(
                IterationRecord(
                    iteration=outer, features=eta.size, residual_norm=res_norm, objective=objective
                )
            )
            logger.debug(
                f"ADCG iteration {outer}: {eta.size} features, residual {res_norm:.3e}, "
                f"objective {objective:.6e}"
            )

            if res_norm <= cfg.residual_tol * y_norm:
                stop = StopReason.RESIDUAL
                break
            if cfg.max_features is not None and eta.size >= cfg.max_features:
                stop = StopReason.MAX_FEATURES
                break
            if previous - objective < cfg.stagnation_tol * previous:
                stop = StopReason.STAGNATION
                break

    logger.info(f"ADCG stopped ({stop.value}) with {eta.size} features")
    return RecoveryResult(
        algorithm="adcg",
        channel=ChannelSpec.from_arrays(dims, eta, tau, nu),
        stop_reason=stop,
        residual_norm=float(np.linalg.norm(residual)),
        history=history,
    )
