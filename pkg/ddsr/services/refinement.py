"""Multi-level time-frequency refinement.

A coarse OMP run seeds small local grids around the selected atoms. Each
level solves the l1-regularized problem on the current point set and
replaces it by finer local grids around the important atoms, either the
dominant atoms themselves or the barycenters of important neighbourhoods.
"""
from typing import List, Optional, Tuple

import numpy as np
from loguru import logger

from ddsr.models.channel import ChannelSpec, ProblemDims, SampleVector
from ddsr.models.solvers import (
    IterationRecord,
    OmpConfig,
    RecoveryResult,
    RefinementConfig,
    RefinementStrategy,
    RegularGrid,
    StopReason,
)
from ddsr.services.measurement import MeasurementOperator
from ddsr.services.sparse_solvers import GridAtomSet, lasso_with_config, least_squares, omp

Step = Tuple[float, float]


def local_grid(dims: ProblemDims, center: Tuple[float, float], step: Step, k: int) -> np.ndarray:
    """k x k regular grid centred on ``center``, clipped to X, as (k*k, 2)."""
    offsets = np.arange(k) - (k - 1) / 2
    taus = center[0] + step[0] * offsets
    nus = center[1] + step[1] * offsets
    tt, nn = np.meshgrid(taus, nus, indexing="ij")
    tau, nu = dims.clip(tt.ravel(), nn.ravel())
    return np.column_stack([tau, nu])


def _union(dims: ProblemDims, centers: np.ndarray, step: Step, k: int) -> np.ndarray:
    if len(centers) == 0:
        return np.empty((0, 2))
    grids = np.vstack([local_grid(dims, tuple(c), step, k) for c in centers])
    return np.unique(grids, axis=0)


def dominant_atoms(
    points: np.ndarray, eta_star: np.ndarray, epsilon: float
) -> Tuple[np.ndarray, np.ndarray]:
    """Points with |eta*_j| >= epsilon and their magnitudes."""
    mags = np.abs(eta_star)
    keep = (mags >= epsilon) & (mags > 0)
    return points[keep], mags[keep]


def find_barycenters(
    points: np.ndarray, eta_star: np.ndarray, epsilon: float, radius: Step
) -> Tuple[np.ndarray, np.ndarray]:
    """Barycenters of the important neighbourhoods, most important first.

    The neighbourhood U_j is the closed box of half-widths ``radius`` around
    point j. Returns the centers and their importances gamma_j.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    mags = np.abs(np.asarray(eta_star))
    near = (np.abs(np.subtract.outer(points[:, 0], points[:, 0])) <= radius[0]) & (
        np.abs(np.subtract.outer(points[:, 1], points[:, 1])) <= radius[1]
    )
    remaining = np.ones(len(points), dtype=bool)
    centers: List[np.ndarray] = []
    importances: List[float] = []
    while remaining.any():
        gamma = near[:, remaining] @ mags[remaining]
        gamma[~remaining] = -np.inf
        j = int(np.argmax(gamma))
        if gamma[j] < epsilon or gamma[j] <= 0:
            break
        members = near[j] & remaining
        centers.append(mags[members] @ points[members] / gamma[j])
        importances.append(float(gamma[j]))
        remaining &= ~members
    return np.array(centers).reshape(-1, 2), np.array(importances)


def strategy_dominant(
    dims: ProblemDims,
    points: np.ndarray,
    eta_star: np.ndarray,
    epsilon: float,
    step: Step,
    k: int,
    max_centers: Optional[int] = None,
) -> np.ndarray:
    """Union of k x k grids around the dominant atoms.

    With ``max_centers`` only that many of the largest dominant atoms are
    kept, which bounds the point set at max_centers * k * k.
    """
    centers, mags = dominant_atoms(points, eta_star, epsilon)
    if max_centers is not None and len(centers) > max_centers:
        centers = centers[np.sort(np.argsort(-mags, kind="stable")[:max_centers])]
    return _union(dims, centers, step, k)


def strategy_barycenter(
    dims: ProblemDims,
    points: np.ndarray,
    eta_star: np.ndarray,
    epsilon: float,
    radius: Step,
    step: Step,
    k: int,
) -> np.ndarray:
    """Union of k x k grids around the barycenters of important neighbourhoods."""
    if radius[0] <= 0 or radius[1] <= 0:
        raise ValueError("neighbourhood radius must be positive")
    centers, _ = find_barycenters(points, eta_star, epsilon, radius)
    return _union(dims, centers, step, k)


def _radius(step: Step, k: int) -> Step:
    half = (k - 1) / 2
    return half * step[0], half * step[1]


def _empty_result(dims: ProblemDims, y: np.ndarray, history: List[IterationRecord]) -> RecoveryResult:
    logger.warning("Refinement left no important atom; returning an empty channel")
    return RecoveryResult(
        algorithm="refine",
        channel=ChannelSpec.empty(dims),
        stop_reason=StopReason.EMPTY_ATOM_SET,
        residual_norm=float(np.linalg.norm(y)),
        history=history,
    )


def refine(y: SampleVector, G: MeasurementOperator, cfg: RefinementConfig = RefinementConfig()) -> RecoveryResult:
    """Multi-level refinement starting from OMP on the coarse grid."""
    dims = G.dims
    data = y.array()
    k = cfg.local_grid
    coarse = RegularGrid.over(dims, *cfg.initial_grid)
    seed = omp(
        y,
        G,
        coarse,
        OmpConfig(
            grid=cfg.initial_grid,
            max_atoms=cfg.initial_atoms,
            residual_tol=cfg.initial_residual_tol,
        ),
    )
    history: List[IterationRecord] = []
    if seed.channel.S == 0:
        return _empty_result(dims, data, history)

    step: Step = (coarse.tau_step or dims.T, coarse.nu_step or dims.Omega)
    centers = np.column_stack([seed.channel.taus(), seed.channel.nus()])
    points = _union(dims, centers, step, k)

    def solve(pts: np.ndarray, level: int) -> np.ndarray:
        atoms = GridAtomSet(G, pts[:, 0], pts[:, 1])
        sol = lasso_with_config(atoms.GZ, data, cfg.lam, cfg.lasso)
        history.append(
            IterationRecord(
                iteration=level,
                features=len(pts),
                residual_norm=sol.residual_norm,
                objective=sol.objective,
            )
        )
        logger.debug(
            f"Refinement level {level}: {len(pts)} atoms, objective {sol.objective:.6e}"
        )
        return sol.eta

    max_centers = cfg.max_features or cfg.initial_atoms
    eta_star = solve(points, 0)
    for level in range(1, cfg.levels + 1):
        threshold = cfg.epsilon * np.abs(eta_star).max()
        radius = _radius(step, k)
        step = (step[0] * cfg.shrink, step[1] * cfg.shrink)
        if cfg.strategy == RefinementStrategy.DOMINANT:
            new_points = strategy_dominant(
                dims, points, eta_star, threshold, step, k, max_centers=max_centers
            )
        else:
            new_points = strategy_barycenter(dims, points, eta_star, threshold, radius, step, k)
        if len(new_points) == 0:
            return _empty_result(dims, data, history)
        points = new_points
        eta_star = solve(points, level)

    threshold = cfg.epsilon * np.abs(eta_star).max()
    if cfg.strategy == RefinementStrategy.DOMINANT:
        centers, importance = dominant_atoms(points, eta_star, threshold)
    else:
        centers, importance = find_barycenters(points, eta_star, threshold, _radius(step, k))
    if len(centers) == 0:
        return _empty_result(dims, data, history)
    if cfg.max_features is not None and len(centers) > cfg.max_features:
        order = np.argsort(-importance, kind="stable")[: cfg.max_features]
        centers = centers[np.sort(order)]

    tau, nu = dims.clip(centers[:, 0], centers[:, 1])
    fit = least_squares(G.atom_images(tau, nu), data)
    logger.info(f"Refinement finished after {cfg.levels} levels with {len(tau)} features")
    return RecoveryResult(
        algorithm="refine",
        channel=ChannelSpec.from_arrays(dims, fit.eta, tau, nu),
        stop_reason=StopReason.MAX_ITERATIONS,
        residual_norm=fit.residual_norm,
        history=history,
    )
