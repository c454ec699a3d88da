import json
import math

import pandas as pd
import pytest
from pydantic import ValidationError

from ddsr.core.exceptions import ConfigError
from ddsr.models.channel import ChannelSpec, SampleVector
from ddsr.models.experiment import (
    Algorithm,
    ExperimentConfig,
    ExperimentKind,
    ExperimentReport,
    SimulationRecord,
    SolverSuite,
    TrialRow,
)
from ddsr.models.solvers import RefinementConfig, RefinementStrategy
from ddsr.services.generator import random_channel, random_identifier, random_sinc_identifier
from ddsr.services.measurement import forward_direct


class TestSolverSuite:
    def test_with_sparsity(self):
        suite = SolverSuite().with_sparsity(4)
        assert suite.omp.max_atoms == 4
        assert suite.refine.initial_atoms == 4
        assert suite.refine.max_features == 4
        assert suite.adcg.max_features == 4

    def test_zero_sparsity_is_a_no_op(self):
        suite = SolverSuite()
        assert suite.with_sparsity(0) is suite

    def test_with_lambda_leaves_omp_alone(self):
        suite = SolverSuite().with_lambda(3.5)
        assert suite.refine.lam == 3.5
        assert suite.adcg.lam == 3.5
        assert suite.omp == SolverSuite().omp

    def test_default_lambda_keeps_explicit_values(self):
        suite = SolverSuite.model_validate_json('{"adcg": {"lambda": 5.0}}')
        filled = suite.with_default_lambda(0.25)
        assert filled.adcg.lam == 5.0
        assert filled.refine.lam == 0.25
        assert SolverSuite().with_default_lambda(0.25).adcg.lam == 0.25

    def test_lambda_alias_in_json(self):
        suite = SolverSuite.model_validate({"adcg": {"lambda": 7.0, "grid": [64, 64]}})
        assert suite.adcg.lam == 7.0
        assert suite.adcg.grid == (64, 64)

    def test_even_local_grid_is_rejected(self):
        with pytest.raises(ValidationError):
            RefinementConfig(local_grid=4)


class TestExperimentConfig:
    @pytest.mark.parametrize("kind", list(ExperimentKind))
    def test_defaults_are_valid(self, kind):
        cfg = ExperimentConfig.defaults(kind)
        assert cfg.kind == kind

    def test_table1_defaults(self):
        cfg = ExperimentConfig.defaults("table1")
        assert cfg.dims.T == 3.0
        assert cfg.dims.Omega == 31.0
        assert cfg.dims.L1 == 101
        assert cfg.algorithms == list(Algorithm)
        assert cfg.noise_db == -10.0
        assert cfg.lam == 500.0
        assert cfg.solvers.refine.initial_grid == (256, 256)
        assert cfg.solvers.refine.shrink == 0.75
        assert cfg.solvers.refine.strategy == RefinementStrategy.BARYCENTER
        assert cfg.solvers.omp.grid == (1024, 1024)

    def test_overrides(self):
        cfg = ExperimentConfig.defaults(ExperimentKind.MIN_SEP, trials=3, S=5)
        assert cfg.trials == 3
        assert cfg.S == 5

    def test_mismatch_sweep_includes_clean_data(self):
        assert ExperimentConfig.defaults("model-mismatch").noise_levels[0] is None

    @pytest.mark.parametrize(
        "kind", [ExperimentKind.NOISE_SWEEP, ExperimentKind.MIN_SEP, ExperimentKind.PHASE_TRANSITION]
    )
    def test_missing_sweep_axis(self, kind):
        with pytest.raises(ConfigError):
            ExperimentConfig(kind=kind)

    def test_even_phase_transition_size(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(kind="phase-transition", sizes=[5, 10], sparsities=[1])

    def test_no_algorithm(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(kind="table1", algorithms=[])


def make_row(trial, algorithm, **fields):
    defaults = dict(
        kind=ExperimentKind.NOISE_SWEEP,
        trial=trial,
        seed=trial,
        algorithm=algorithm,
        S=2,
        L=11,
        noise_db=-20.0,
        lam=50.0,
        max_tau_err=0.1 * (trial + 1),
        rel_err_db=-30.0 - trial,
        success=trial % 2 == 0,
        wall_time=1.0,
    )
    defaults.update(fields)
    return TrialRow(**defaults)


@pytest.fixture
def report():
    cfg = ExperimentConfig(kind="noise-sweep", noise_levels=[-20.0], trials=4)
    rows = [make_row(i, Algorithm.ADCG) for i in range(4)]
    failed = dict(max_tau_err=None, rel_err_db=None, success=None, error="solver diverged")
    rows += [make_row(i, Algorithm.OMP, **failed) for i in range(2)]
    rows += [make_row(i, Algorithm.OMP) for i in range(2, 4)]
    return ExperimentReport(config=cfg, rows=rows)


class TestExperimentReport:
    def test_frame_is_sorted(self, report):
        frame = report.to_frame()
        assert list(frame["trial"]) == [0, 0, 1, 1, 2, 2, 3, 3]
        assert list(frame["algorithm"][:2]) == ["adcg", "omp"]

    def test_aggregates(self, report):
        summary = report.aggregates().set_index("algorithm")
        assert summary.loc["adcg", "trials"] == 4
        assert summary.loc["adcg", "errors"] == 0
        assert summary.loc["omp", "errors"] == 2
        assert summary.loc["adcg", "max_tau_err"] == pytest.approx(0.25)
        assert summary.loc["adcg", "success_rate"] == pytest.approx(0.5)
        assert summary.loc["omp", "rel_err_db"] == pytest.approx(-32.5)
        assert summary.loc["omp", "success_rate"] == pytest.approx(0.5)

    def test_aggregates_recomputable_from_trials(self, report):
        frame = report.to_frame()
        summary = report.aggregates().set_index("algorithm")
        for algorithm, group in frame.groupby("algorithm"):
            values = [v for v in group["wall_time"] if v is not None]
            assert summary.loc[algorithm, "wall_time"] == pytest.approx(sum(values) / len(values))

    def test_write(self, report, tmp_path):
        paths = report.write(tmp_path / "out")
        assert pd.read_csv(paths["trials"]).shape[0] == 8
        assert pd.read_csv(paths["summary"]).shape[0] == 2
        record = json.loads(paths["json"].read_text())
        assert record["config"]["kind"] == "noise-sweep"
        assert len(record["summary"]) == 2

    def test_minus_inf_errors_are_written_as_null(self, tmp_path):
        cfg = ExperimentConfig(kind="table1", trials=1)
        row = make_row(0, Algorithm.OMP, kind=ExperimentKind.TABLE1, rel_err_db=-math.inf)
        paths = ExperimentReport(config=cfg, rows=[row]).write(tmp_path)
        record = json.loads(paths["json"].read_text())
        assert record["summary"][0]["rel_err_db"] is None


class TestSimulationRecord:
    def test_requires_exactly_one_identifier(self, small_dims):
        channel = random_channel(small_dims, 1, 0)
        identifier = random_identifier(small_dims, 0)
        samples = forward_direct(channel, identifier)
        with pytest.raises(ValidationError):
            SimulationRecord(channel=channel, samples=samples, seed=0)
        with pytest.raises(ValidationError):
            SimulationRecord(
                channel=channel,
                identifier=identifier,
                sinc_identifier=random_sinc_identifier(small_dims, 0),
                samples=samples,
                seed=0,
            )

    def test_recovery_identifier(self, small_dims):
        sinc = random_sinc_identifier(small_dims, 1)
        record = SimulationRecord(
            channel=ChannelSpec.empty(small_dims),
            sinc_identifier=sinc,
            samples=SampleVector.from_array(small_dims, [0j] * small_dims.L2),
            seed=1,
        )
        assert record.recovery_identifier() == sinc.matched_trig()

    def test_json_round_trip(self, small_dims):
        channel = random_channel(small_dims, 2, 0)
        identifier = random_identifier(small_dims, 0)
        record = SimulationRecord(
            channel=channel,
            identifier=identifier,
            samples=forward_direct(channel, identifier),
            noise_db=-20.0,
            seed=4,
        )
        assert SimulationRecord.model_validate_json(record.model_dump_json()) == record
