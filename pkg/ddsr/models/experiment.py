"""Experiment configuration and report models."""
import json
import math
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional

import pandas as pd
from pydantic import BaseModel, Field, model_validator

from ddsr.core.exceptions import ConfigError
from ddsr.models.channel import (
    ChannelSpec,
    IdentifierPoly,
    ProblemDims,
    SampleVector,
    SincIdentifier,
)
from ddsr.models.solvers import (
    AdcgConfig,
    OmpConfig,
    RefinementConfig,
    RefinementStrategy,
)


class ExperimentKind(str, Enum):
    TABLE1 = "table1"
    NOISE_SWEEP = "noise-sweep"
    PHASE_TRANSITION = "phase-transition"
    MIN_SEP = "min-sep"
    MODEL_MISMATCH = "model-mismatch"


class Algorithm(str, Enum):
    OMP = "omp"
    REFINE = "refine"
    ADCG = "adcg"


class MismatchArm(str, Enum):
    """Which forward model produced the data in the identifier-model study."""

    SINC = "sinc"
    TRIG = "trig"


class SolverSuite(BaseModel):
    """Settings for the three recovery algorithms."""

    omp: OmpConfig = Field(default_factory=OmpConfig)
    refine: RefinementConfig = Field(default_factory=RefinementConfig)
    adcg: AdcgConfig = Field(default_factory=AdcgConfig)

    def with_sparsity(self, S: int) -> "SolverSuite":
        """Stop every algorithm after S features."""
        if S < 1:
            return self
        return SolverSuite(
            omp=self.omp.model_copy(update={"max_atoms": S}),
            refine=self.refine.model_copy(update={"initial_atoms": S, "max_features": S}),
            adcg=self.adcg.model_copy(update={"max_features": S}),
        )

    def with_lambda(self, lam: float) -> "SolverSuite":
        return SolverSuite(
            omp=self.omp,
            refine=self.refine.model_copy(update={"lam": lam}),
            adcg=self.adcg.model_copy(update={"lam": lam}),
        )

    def with_default_lambda(self, lam: float) -> "SolverSuite":
        """Use ``lam`` only for the solvers whose lambda was not given explicitly."""

        def fill(cfg):
            return cfg if "lam" in cfg.model_fields_set else cfg.model_copy(update={"lam": lam})

        return SolverSuite(omp=self.omp, refine=fill(self.refine), adcg=fill(self.adcg))


_NOISE_LEVELS = [-60.0, -50.0, -40.0, -30.0, -20.0, -10.0]


class ExperimentConfig(BaseModel):
    """One experiment: what to draw, which solvers to run, what to sweep.

    ``noise_db`` of None means clean data. ``lam`` of None picks the
    regularization from the noise level of each trial.
    """

    kind: ExperimentKind
    dims: ProblemDims = ProblemDims(T=1.0, Omega=101.0, N1=50, N2=50)
    S: int = Field(default=10, ge=0)
    trials: int = Field(default=50, ge=1)
    seed: int = Field(default=0, ge=0)
    algorithms: List[Algorithm] = Field(default_factory=lambda: [Algorithm.ADCG])
    solvers: SolverSuite = Field(default_factory=SolverSuite)
    lam: Optional[float] = Field(default=None, ge=0)
    noise_db: Optional[float] = None
    noise_levels: List[Optional[float]] = Field(default_factory=list)
    sizes: List[int] = Field(default_factory=list)
    sparsities: List[int] = Field(default_factory=list)
    separations: List[float] = Field(default_factory=list)
    threshold_db: float = -40.0
    M: Optional[int] = Field(default=None, ge=1)
    on_grid: bool = False
    output_dir: Optional[Path] = None

    @model_validator(mode="after")
    def _sweep_axes(self) -> "ExperimentConfig":
        required = {
            ExperimentKind.NOISE_SWEEP: ("noise_levels", self.noise_levels),
            ExperimentKind.MODEL_MISMATCH: ("noise_levels", self.noise_levels),
            ExperimentKind.PHASE_TRANSITION: ("sizes", self.sizes),
            ExperimentKind.MIN_SEP: ("separations", self.separations),
        }
        if self.kind in required:
            name, axis = required[self.kind]
            if not axis:
                raise ConfigError(f"{self.kind.value} needs a nonempty '{name}' list")
        if self.kind == ExperimentKind.PHASE_TRANSITION:
            if not self.sparsities:
                raise ConfigError("phase-transition needs a nonempty 'sparsities' list")
            if any(L < 1 or L % 2 == 0 for L in self.sizes):
                raise ConfigError("phase-transition sizes must be odd and positive")
        if not self.algorithms:
            raise ConfigError("at least one algorithm must be selected")
        return self

    @classmethod
    def defaults(cls, kind: ExperimentKind, **overrides: Any) -> "ExperimentConfig":
        """Configuration of the published study of the given kind."""
        kind = ExperimentKind(kind)
        base: Dict[str, Any] = {"kind": kind}
        if kind == ExperimentKind.TABLE1:
            base.update(
                dims=ProblemDims(T=3.0, Omega=31.0, N1=50, N2=50),
                algorithms=list(Algorithm),
                noise_db=-10.0,
                lam=500.0,
                solvers=SolverSuite(
                    refine=RefinementConfig(
                        initial_grid=(256, 256),
                        local_grid=5,
                        levels=15,
                        shrink=0.75,
                        strategy=RefinementStrategy.BARYCENTER,
                    )
                ),
            )
        elif kind == ExperimentKind.NOISE_SWEEP:
            base.update(
                algorithms=list(Algorithm),
                noise_levels=list(_NOISE_LEVELS),
                solvers=SolverSuite(refine=RefinementConfig(levels=25, shrink=2 / 3)),
            )
        elif kind == ExperimentKind.PHASE_TRANSITION:
            base.update(
                sizes=[5, 11, 21, 31, 51, 71, 101],
                sparsities=[1, 2, 5, 10],
            )
        elif kind == ExperimentKind.MIN_SEP:
            base.update(separations=[0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1])
        elif kind == ExperimentKind.MODEL_MISMATCH:
            base.update(noise_levels=[None] + list(_NOISE_LEVELS))
        base.update(overrides)
        return cls(**base)


class TrialRow(BaseModel):
    """Outcome of one algorithm on one trial of one sweep cell."""

    kind: ExperimentKind
    trial: int
    seed: int
    algorithm: Algorithm
    S: int
    L: int
    noise_db: Optional[float] = None
    lam: float
    separation: Optional[float] = None
    arm: Optional[MismatchArm] = None
    max_tau_err: Optional[float] = None
    max_nu_err: Optional[float] = None
    max_eta_err: Optional[float] = None
    unmatched: Optional[int] = None
    features: Optional[int] = None
    abs_err: Optional[float] = None
    rel_err_db: Optional[float] = None
    rel_err_db_sinc: Optional[float] = None
    success: Optional[bool] = None
    stop_reason: Optional[str] = None
    error: Optional[str] = None
    wall_time: float = 0.0


# Columns that identify a sweep cell, in output order.
CELL_COLUMNS = ["algorithm", "S", "L", "noise_db", "separation", "arm"]
METRIC_COLUMNS = [
    "max_tau_err",
    "max_nu_err",
    "max_eta_err",
    "rel_err_db",
    "rel_err_db_sinc",
    "success",
    "wall_time",
]


def _json_safe(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


class ExperimentReport(BaseModel):
    """Per-trial rows of an experiment and the per-cell aggregates derived from them."""

    config: ExperimentConfig
    rows: List[TrialRow]

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame([row.model_dump(mode="json") for row in self.rows])
        if frame.empty:
            return pd.DataFrame(columns=list(TrialRow.model_fields))
        return frame.sort_values(
            ["trial", "algorithm", "S", "L", "noise_db", "separation", "arm"],
            kind="stable",
            na_position="first",
        ).reset_index(drop=True)

    def aggregates(self) -> pd.DataFrame:
        """Mean metrics, success rate, trial and error counts per sweep cell."""
        frame = self.to_frame()
        cells = [c for c in CELL_COLUMNS if frame[c].notna().any()]
        metrics = [m for m in METRIC_COLUMNS if frame[m].notna().any()]
        values = frame[metrics].apply(
            lambda column: column.map(lambda v: math.nan if v is None else float(v))
        )
        grouped = pd.concat([frame[cells], values], axis=1).groupby(
            cells, dropna=False, sort=True
        )
        summary = grouped[metrics].mean()
        summary["trials"] = grouped.size()
        summary["errors"] = frame["error"].notna().groupby(
            [frame[c] for c in cells], dropna=False, sort=True
        ).sum()
        if "success" in summary:
            summary = summary.rename(columns={"success": "success_rate"})
        return summary.reset_index()

    def write(self, out_dir: Path) -> Dict[str, Path]:
        """Write trials CSV, summary CSV and a JSON record; return the paths."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        stem = self.config.kind.value
        paths = {
            "trials": out_dir / f"{stem}_trials.csv",
            "summary": out_dir / f"{stem}_summary.csv",
            "json": out_dir / f"{stem}.json",
        }
        self.to_frame().to_csv(paths["trials"], index=False)
        summary = self.aggregates()
        summary.to_csv(paths["summary"], index=False)
        record = {
            "config": self.config.model_dump(mode="json"),
            "summary": [
                {k: _json_safe(v) for k, v in row.items()}
                for row in json.loads(summary.to_json(orient="records"))
            ],
        }
        paths["json"].write_text(json.dumps(record, indent=2))
        return paths


class SimulationRecord(BaseModel):
    """A simulated measurement: the true channel, the identifier and the samples.

    Exactly one of ``identifier`` and ``sinc_identifier`` is set. Recovery
    always assumes a trigonometric identifier; for sinc data that is the
    trigonometric polynomial matching the sinc sum at x = m/Omega.
    """

    channel: ChannelSpec
    identifier: Optional[IdentifierPoly] = None
    sinc_identifier: Optional[SincIdentifier] = None
    samples: SampleVector
    noise_db: Optional[float] = None
    seed: int

    @model_validator(mode="after")
    def _one_identifier(self) -> "SimulationRecord":
        if (self.identifier is None) == (self.sinc_identifier is None):
            raise ValueError("exactly one of identifier and sinc_identifier must be given")
        return self

    def recovery_identifier(self) -> IdentifierPoly:
        if self.identifier is not None:
            return self.identifier
        return self.sinc_identifier.matched_trig()
