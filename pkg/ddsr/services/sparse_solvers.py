"""Finite-dimensional solvers: least squares, complex LASSO and OMP."""
from functools import cached_property
from typing import Optional

import numpy as np
from loguru import logger

from ddsr.models.channel import ChannelSpec, SampleVector
from ddsr.models.solvers import (
    IterationRecord,
    LassoConfig,
    LeastSquaresResult,
    OmpConfig,
    RecoveryResult,
    RegularGrid,
    SparseSolution,
    StopReason,
)
from ddsr.services.measurement import MeasurementOperator
from ddsr.utils.atoms import atom_matrix, correlate_grid


class GridAtomSet:
    """Atoms of a finite parameter set together with their images under G."""

    def __init__(self, G: MeasurementOperator, taus: np.ndarray, nus: np.ndarray):
        self.G = G
        self.taus = np.asarray(taus, dtype=float)
        self.nus = np.asarray(nus, dtype=float)

    def __len__(self) -> int:
        return self.taus.size

    @cached_property
    def Z(self) -> np.ndarray:
        return atom_matrix(self.G.dims, self.taus, self.nus)

    @cached_property
    def GZ(self) -> np.ndarray:
        if len(self) == 0:
            return np.zeros((self.G.dims.L2, 0), dtype=complex)
        return self.G.atom_images(self.taus, self.nus)


def least_squares(A: np.ndarray, y: np.ndarray) -> LeastSquaresResult:
    """Minimum-norm minimizer of ||A eta - y||_2."""
    A = np.asarray(A, dtype=complex)
    y = np.asarray(y, dtype=complex)
    if A.shape[1] == 0:
        return LeastSquaresResult(
            eta=np.zeros(0, dtype=complex),
            residual_norm=float(np.linalg.norm(y)),
            rank=0,
            rank_deficient=False,
        )
    eta, _, rank, _ = np.linalg.lstsq(A, y, rcond=None)
    rank_deficient = int(rank) < A.shape[1]
    if rank_deficient:
        logger.warning(f"Least-squares system is rank deficient: rank {rank} < {A.shape[1]}")
    return LeastSquaresResult(
        eta=eta,
        residual_norm=float(np.linalg.norm(A @ eta - y)),
        rank=int(rank),
        rank_deficient=rank_deficient,
    )


def soft_threshold(x: np.ndarray, threshold: float) -> np.ndarray:
    """Complex soft-thresholding: shrink magnitudes, keep phases."""
    mag = np.abs(x)
    scale = np.maximum(mag - threshold, 0.0) / np.where(mag > 0, mag, 1.0)
    return x * scale


def largest_singular_value_sq(A: np.ndarray, iterations: int = 100) -> float:
    """Power iteration on A* A from a fixed start vector, using only products with A and A*."""
    A = np.asarray(A, dtype=complex)
    Ah = A.conj().T
    x = np.ones(A.shape[1], dtype=complex) / np.sqrt(A.shape[1])
    estimate = 0.0
    for _ in range(iterations):
        z = Ah @ (A @ x)
        norm = np.linalg.norm(z)
        if norm == 0:
            return 0.0
        x = z / norm
        if abs(norm - estimate) <= 1e-12 * norm:
            estimate = norm
            break
        estimate = norm
    return float(estimate)


def lasso_objective(A: np.ndarray, y: np.ndarray, eta: np.ndarray, lam: float) -> float:
    return float(np.linalg.norm(A @ eta - y) ** 2 + lam * np.abs(eta).sum())


def lasso(
    GZ: np.ndarray,
    y: np.ndarray,
    lam: float,
    tol: float = 1e-8,
    max_iter: int = 5000,
    x0: Optional[np.ndarray] = None,
    power_iter: int = 100,
) -> SparseSolution:
    """Monotone FISTA for min ||GZ eta - y||^2 + lam ||eta||_1 over complex eta.

    The objective never increases across iterations; when ``max_iter`` is hit
    the best iterate is returned with ``converged=False``.
    """
    if lam < 0:
        raise ValueError("regularization parameter must be nonnegative")
    A = np.asarray(GZ, dtype=complex)
    y = np.asarray(y, dtype=complex)
    J = A.shape[1]
    x = np.zeros(J, dtype=complex) if x0 is None else np.asarray(x0, dtype=complex).copy()
    if J == 0:
        norm = float(np.linalg.norm(y))
        return SparseSolution(
            eta=x, objective=norm**2, iterations=0, residual_norm=norm, converged=True, lam=lam
        )

    # 1.01 covers the power-iteration underestimate of the Lipschitz constant.
    lipschitz = 2.0 * largest_singular_value_sq(A, power_iter) * 1.01
    if lipschitz == 0:
        lipschitz = 1.0
    step = 1.0 / lipschitz
    Ah = A.conj().T

    def grad(v: np.ndarray) -> np.ndarray:
        return 2.0 * (Ah @ (A @ v - y))

    f_x = lasso_objective(A, y, x, lam)
    z = x.copy()
    t = 1.0
    converged = False
    iteration = 0
    for iteration in range(1, max_iter + 1):
        u = soft_threshold(z - step * grad(z), lam * step)
        f_u = lasso_objective(A, y, u, lam)
        x_old = x
        if f_u <= f_x:
            x, f_x = u, f_u
        t_new = (1.0 + np.sqrt(1.0 + 4.0 * t * t)) / 2.0
        z = x + (t / t_new) * (u - x) + ((t - 1.0) / t_new) * (x - x_old)
        t = t_new
        # Fixed-point residual of the proximal-gradient map at the accepted iterate.
        gap = np.linalg.norm(x - soft_threshold(x - step * grad(x), lam * step))
        if gap <= tol * max(np.linalg.norm(x), np.finfo(float).tiny):
            converged = True
            break

    if not converged:
        logger.warning(f"LASSO hit max_iter={max_iter} before reaching tol={tol}")
    return SparseSolution(
        eta=x,
        objective=lasso_objective(A, y, x, lam),
        iterations=iteration,
        residual_norm=float(np.linalg.norm(A @ x - y)),
        converged=converged,
        lam=lam,
    )


def lasso_with_config(
    GZ: np.ndarray,
    y: np.ndarray,
    lam: float,
    cfg: LassoConfig,
    x0: Optional[np.ndarray] = None,
) -> SparseSolution:
    return lasso(GZ, y, lam, tol=cfg.tol, max_iter=cfg.max_iter, x0=x0, power_iter=cfg.power_iter)


def omp(
    y: SampleVector,
    G: MeasurementOperator,
    grid: RegularGrid,
    cfg: OmpConfig = OmpConfig(),
) -> RecoveryResult:
    """Orthogonal matching pursuit over a regular grid.

    Each step picks the grid atom with the largest normalized correlation
    |<r, G a>| / ||G a|| (lowest row-major index on ties), never the same
    point twice, and refits all selected amplitudes by least squares.
    """
    dims = G.dims
    data = y.array()
    y_norm = float(np.linalg.norm(data))
    norms = G.grid_image_norms(grid)
    norms = np.where(norms > 0, norms, np.inf)
    selected = np.zeros(grid.shape, dtype=bool)
    taus, nus = [], []
    eta = np.zeros(0, dtype=complex)
    residual = data.copy()
    history = []
    stop = StopReason.MAX_FEATURES
    max_atoms = min(cfg.max_atoms, selected.size)

    if np.linalg.norm(residual) <= cfg.residual_tol * y_norm:
        stop = StopReason.RESIDUAL
        max_atoms = 0
    for k in range(max_atoms):
        score = correlate_grid(dims, G.adjoint(residual), grid) / norms
        score[selected] = -1.0
        idx = int(np.argmax(score))
        selected.flat[idx] = True
        tau, nu = grid.point(idx)
        taus.append(tau)
        nus.append(nu)

        GZ = G.atom_images(np.array(taus), np.array(nus))
        eta = least_squares(GZ, data).eta
        residual = data - GZ @ eta
        res_norm = float(np.linalg.norm(residual))
        history.append(
            IterationRecord(
                iteration=k, features=len(taus), residual_norm=res_norm, objective=res_norm**2
            )
        )
        logger.debug(f"OMP step {k}: picked ({tau:.6g}, {nu:.6g}), residual {res_norm:.3e}")
        if res_norm <= cfg.residual_tol * y_norm:
            stop = StopReason.RESIDUAL
            break

    logger.info(f"OMP stopped ({stop.value}) with {len(taus)} atoms")
    return RecoveryResult(
        algorithm="omp",
        channel=ChannelSpec.from_arrays(dims, eta, taus, nus),
        stop_reason=stop,
        residual_norm=float(np.linalg.norm(residual)),
        history=history,
    )
