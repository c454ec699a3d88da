"""Dispatch to the three recovery algorithms."""
from typing import Tuple, Union

from loguru import logger

from ddsr.core.exceptions import ConfigError
from ddsr.models.channel import SampleVector
from ddsr.models.experiment import Algorithm, SolverSuite
from ddsr.models.solvers import RecoveryResult, RegularGrid
from ddsr.services.adcg import adcg
from ddsr.services.measurement import MeasurementOperator
from ddsr.services.refinement import refine
from ddsr.services.sparse_solvers import omp


def scan_grid(algorithm: Algorithm, solvers: SolverSuite) -> Tuple[int, int]:
    if algorithm == Algorithm.OMP:
        return solvers.omp.grid
    if algorithm == Algorithm.REFINE:
        return solvers.refine.initial_grid
    return solvers.adcg.grid


def check_grid_budget(algorithm: Algorithm, solvers: SolverSuite, max_grid_points: int) -> None:
    """Reject scan grids with more than ``max_grid_points`` points."""
    P, Q = scan_grid(algorithm, solvers)
    if P * Q > max_grid_points:
        raise ConfigError(
            f"{algorithm.value} grid {P}x{Q} exceeds the limit of {max_grid_points} points"
        )


def recover(
    algorithm: Union[Algorithm, str],
    y: SampleVector,
    G: MeasurementOperator,
    solvers: SolverSuite = SolverSuite(),
) -> RecoveryResult:
    algorithm = Algorithm(algorithm)
    logger.debug(f"Recovering with {algorithm.value}")
    if algorithm == Algorithm.OMP:
        grid = RegularGrid.over(G.dims, *solvers.omp.grid)
        return omp(y, G, grid, solvers.omp)
    if algorithm == Algorithm.REFINE:
        return refine(y, G, solvers.refine)
    return adcg(y, G, solvers.adcg)
