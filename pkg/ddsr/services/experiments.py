"""Seeded trial loops for the recovery studies.

Every trial draws its channel, identifier and noise from seeds derived from
the master seed and the trial index, so reports are reproducible and the
same trial sees the same channel in every cell of a noise sweep.
"""
import math
import multiprocessing as mp
import time
from typing import Callable, List, Optional

from loguru import logger
from pydantic import BaseModel

from ddsr.core.config import Settings
from ddsr.core.exceptions import ConfigError, DdsrError
from ddsr.models.channel import ChannelSpec, ProblemDims
from ddsr.models.evaluation import NormBasis
from ddsr.models.experiment import (
    Algorithm,
    ExperimentConfig,
    ExperimentKind,
    ExperimentReport,
    MismatchArm,
    TrialRow,
)
from ddsr.models.solvers import RegularGrid
from ddsr.services.evaluation import classify_success, match_features, operator_norm_err
from ddsr.services.generator import (
    derive_seed,
    random_channel,
    random_channel_min_sep,
    random_channel_on_grid,
    random_identifier,
    random_sinc_identifier,
)
from ddsr.services.measurement import (
    MeasurementOperator,
    add_noise,
    build_g,
    forward_direct,
    forward_sinc,
    noise_ratio,
)
from ddsr.services.recovery import check_grid_budget, recover, scan_grid

ProgressCallback = Callable[[int, int], None]

# Sub-seed slots of a trial seed.
_CHANNEL, _IDENTIFIER, _NOISE = 0, 1, 2


def lambda_for_noise(
    noise_db: Optional[float],
    anchor: float = 500.0,
    anchor_db: float = -10.0,
    floor_db: float = -70.0,
) -> float:
    """Regularization proportional to the noise ratio, 500 at -10 dB.

    Clean data and levels below ``floor_db`` use the value at ``floor_db``.
    """
    if noise_db is None or noise_db == -math.inf:
        level = floor_db
    else:
        level = max(noise_db, floor_db)
    return anchor * noise_ratio(level) / noise_ratio(anchor_db)


def square_dims(L: int) -> ProblemDims:
    """T = 1 and Omega = L1 = L2 = L."""
    return ProblemDims(T=1.0, Omega=float(L), N1=(L - 1) // 2, N2=(L - 1) // 2)


class TrialTask(BaseModel):
    """One trial of one sweep cell, self-contained so it can cross process boundaries."""

    config: ExperimentConfig
    trial: int
    seed: int
    dims: ProblemDims
    S: int
    noise_db: Optional[float] = None
    separation: Optional[float] = None
    arm: Optional[MismatchArm] = None

    @property
    def lam(self) -> float:
        if self.config.lam is not None:
            return self.config.lam
        return lambda_for_noise(self.noise_db)

    def row(self, algorithm: Algorithm, **fields) -> TrialRow:
        return TrialRow(
            kind=self.config.kind,
            trial=self.trial,
            seed=self.seed,
            algorithm=algorithm,
            S=self.S,
            L=self.dims.L2,
            noise_db=self.noise_db,
            lam=self.lam,
            separation=self.separation,
            arm=self.arm,
            **fields,
        )


def _draw_channel(task: TrialTask) -> ChannelSpec:
    cfg = task.config
    seed = derive_seed(task.seed, _CHANNEL)
    if task.separation is not None:
        return random_channel_min_sep(task.dims, task.S, task.separation, seed)
    if cfg.on_grid:
        P, Q = min(scan_grid(a, cfg.solvers) for a in cfg.algorithms)
        return random_channel_on_grid(
            task.dims, task.S, RegularGrid.over(task.dims, P, Q), seed
        )
    return random_channel(task.dims, task.S, seed)


def _simulate(task: TrialTask, channel: ChannelSpec):
    """Noisy samples and the operator the recovery side assumes."""
    id_seed = derive_seed(task.seed, _IDENTIFIER)
    if task.arm is None:
        identifier = random_identifier(task.dims, id_seed)
        clean = forward_direct(channel, identifier)
        G = build_g(identifier)
    else:
        sinc = random_sinc_identifier(task.dims, id_seed)
        matched = sinc.matched_trig()
        if task.arm == MismatchArm.SINC:
            clean = forward_sinc(channel, sinc)
        else:
            clean = forward_direct(channel, matched)
        G = build_g(matched)
    return add_noise(clean, task.noise_db, derive_seed(task.seed, _NOISE)), G


def _recover_and_score(
    task: TrialTask, algorithm: Algorithm, channel: ChannelSpec, y, G: MeasurementOperator
) -> TrialRow:
    cfg = task.config
    solvers = cfg.solvers.with_lambda(task.lam).with_sparsity(task.S)
    start = time.perf_counter()
    try:
        result = recover(algorithm, y, G, solvers)
        elapsed = time.perf_counter() - start
        matched = match_features(channel, result.channel)
        report = operator_norm_err(channel, result.channel, M=cfg.M)
        sinc_db = None
        if task.arm is not None:
            sinc_db = operator_norm_err(
                channel, result.channel, M=cfg.M, basis=NormBasis.SINC
            ).rel_err_db
    except DdsrError as e:
        logger.error(f"Trial {task.trial} ({algorithm.value}) failed: {e}")
        return task.row(algorithm, error=str(e), wall_time=time.perf_counter() - start)
    return task.row(
        algorithm,
        max_tau_err=matched.max_tau_err,
        max_nu_err=matched.max_nu_err,
        max_eta_err=matched.max_eta_err,
        unmatched=matched.unmatched_truth + matched.unmatched_estimate,
        features=result.channel.S,
        abs_err=report.abs_err,
        rel_err_db=report.rel_err_db,
        rel_err_db_sinc=sinc_db,
        success=classify_success(report, cfg.threshold_db),
        stop_reason=result.stop_reason.value,
        wall_time=elapsed,
    )


def run_trial(task: TrialTask) -> List[TrialRow]:
    """Draw one instance and run every selected algorithm on it; never raises DdsrError."""
    algorithms = task.config.algorithms
    try:
        channel = _draw_channel(task)
        y, G = _simulate(task, channel)
    except DdsrError as e:
        logger.error(f"Trial {task.trial} (seed {task.seed}) could not be drawn: {e}")
        return [task.row(a, error=str(e)) for a in algorithms]
    return [_recover_and_score(task, a, channel, y, G) for a in algorithms]


class ExperimentRunner:
    """Expands an experiment into trial tasks and runs them, inline or on a process pool."""

    def __init__(self, settings: Optional[Settings] = None, threads: Optional[int] = None):
        self.settings = settings or Settings()
        self.threads = threads or self.settings.threads

    def tasks(self, cfg: ExperimentConfig) -> List[TrialTask]:
        seeds = [derive_seed(cfg.seed, i) for i in range(cfg.trials)]
        cells = []
        if cfg.kind == ExperimentKind.TABLE1:
            cells = [dict(dims=cfg.dims, S=cfg.S, noise_db=cfg.noise_db)]
        elif cfg.kind == ExperimentKind.NOISE_SWEEP:
            cells = [dict(dims=cfg.dims, S=cfg.S, noise_db=level) for level in cfg.noise_levels]
        elif cfg.kind == ExperimentKind.PHASE_TRANSITION:
            cells = [
                dict(dims=square_dims(L), S=S) for S in cfg.sparsities for L in cfg.sizes
            ]
        elif cfg.kind == ExperimentKind.MIN_SEP:
            cells = [dict(dims=cfg.dims, S=cfg.S, separation=d) for d in cfg.separations]
        elif cfg.kind == ExperimentKind.MODEL_MISMATCH:
            cells = [
                dict(dims=cfg.dims, S=cfg.S, noise_db=level, arm=arm)
                for level in cfg.noise_levels
                for arm in MismatchArm
            ]
        return [
            TrialTask(config=cfg, trial=i, seed=seed, **cell)
            for cell in cells
            for i, seed in enumerate(seeds)
        ]

    def run(self, cfg: ExperimentConfig, progress: Optional[ProgressCallback] = None) -> ExperimentReport:
        for algorithm in cfg.algorithms:
            check_grid_budget(algorithm, cfg.solvers, self.settings.max_grid_points)
        tasks = self.tasks(cfg)
        logger.info(
            f"Running {cfg.kind.value}: {len(tasks)} trials, master seed {cfg.seed}, "
            f"{self.threads} worker(s)"
        )
        rows: List[TrialRow] = []
        if self.threads <= 1:
            for done, task in enumerate(tasks, start=1):
                rows.extend(run_trial(task))
                if progress:
                    progress(done, len(tasks))
        else:
            with mp.Pool(processes=self.threads) as pool:
                for done, trial_rows in enumerate(pool.imap(run_trial, tasks, chunksize=1), start=1):
                    rows.extend(trial_rows)
                    if progress:
                        progress(done, len(tasks))
        failed = sum(row.error is not None for row in rows)
        if failed:
            logger.warning(f"{failed} of {len(rows)} rows carry an error")
        return ExperimentReport(config=cfg, rows=rows)


def _run_kind(
    kind: ExperimentKind,
    cfg: ExperimentConfig,
    runner: Optional[ExperimentRunner],
    progress: Optional[ProgressCallback],
) -> ExperimentReport:
    if cfg.kind != kind:
        raise ConfigError(f"expected a {kind.value} configuration, got {cfg.kind.value}")
    return (runner or ExperimentRunner()).run(cfg, progress)


def run_table1(
    cfg: ExperimentConfig,
    runner: Optional[ExperimentRunner] = None,
    progress: Optional[ProgressCallback] = None,
) -> ExperimentReport:
    return _run_kind(ExperimentKind.TABLE1, cfg, runner, progress)


def run_noise_sweep(
    cfg: ExperimentConfig,
    runner: Optional[ExperimentRunner] = None,
    progress: Optional[ProgressCallback] = None,
) -> ExperimentReport:
    return _run_kind(ExperimentKind.NOISE_SWEEP, cfg, runner, progress)


def run_phase_transition(
    cfg: ExperimentConfig,
    runner: Optional[ExperimentRunner] = None,
    progress: Optional[ProgressCallback] = None,
) -> ExperimentReport:
    return _run_kind(ExperimentKind.PHASE_TRANSITION, cfg, runner, progress)


def run_min_sep(
    cfg: ExperimentConfig,
    runner: Optional[ExperimentRunner] = None,
    progress: Optional[ProgressCallback] = None,
) -> ExperimentReport:
    return _run_kind(ExperimentKind.MIN_SEP, cfg, runner, progress)


def run_model_mismatch(
    cfg: ExperimentConfig,
    runner: Optional[ExperimentRunner] = None,
    progress: Optional[ProgressCallback] = None,
) -> ExperimentReport:
    return _run_kind(ExperimentKind.MODEL_MISMATCH, cfg, runner, progress)


RUNNERS = {
    ExperimentKind.TABLE1: run_table1,
    ExperimentKind.NOISE_SWEEP: run_noise_sweep,
    ExperimentKind.PHASE_TRANSITION: run_phase_transition,
    ExperimentKind.MIN_SEP: run_min_sep,
    ExperimentKind.MODEL_MISMATCH: run_model_mismatch,
}
