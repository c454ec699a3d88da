"""Command Line Interface for doubly-dispersive channel recovery."""
import json
from pathlib import Path
from typing import Optional

import pandas as pd
import typer
from loguru import logger
from rich.console import Console
from rich.progress import BarColumn, MofNCompleteColumn, Progress, SpinnerColumn, TextColumn
from rich.table import Table

from ddsr.core.config import Settings
from ddsr.core.logging import configure_logging
from ddsr.models.channel import ChannelSpec, validate
from ddsr.models.evaluation import NormBasis
from ddsr.models.experiment import (
    Algorithm,
    ExperimentConfig,
    ExperimentKind,
    SimulationRecord,
    SolverSuite,
)
from ddsr.services.evaluation import classify_success, match_features, operator_norm_err
from ddsr.services.experiments import RUNNERS, ExperimentRunner, lambda_for_noise
from ddsr.services.generator import (
    derive_seed,
    random_channel,
    random_channel_min_sep,
    random_identifier,
    random_sinc_identifier,
)
from ddsr.services.measurement import (
    MeasurementOperator,
    MeasurementOperatorRecord,
    add_noise,
    build_g,
    forward_direct,
    forward_sinc,
)
from ddsr.services.recovery import check_grid_budget, recover as run_recovery

app = typer.Typer(help="Super-resolution of doubly-dispersive channels")
console = Console()
err_console = Console(stderr=True)

settings: Optional[Settings] = None


@app.callback()
def init_settings():
    """Load settings and configure logging."""
    global settings
    if not settings:
        settings = Settings()
        configure_logging(settings)


def _out_dir(out: Optional[Path]) -> Path:
    path = out or settings.output_dir
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_channel(path: Path) -> ChannelSpec:
    """Channel from a channel, simulation or recovery JSON file."""
    data = json.loads(path.read_text())
    return ChannelSpec.model_validate(data.get("channel", data))


@app.command()
def simulate(
    time_span: float = typer.Option(1.0, "--T", help="Time span of the delay domain"),
    omega: float = typer.Option(101.0, "--omega", help="Bandwidth of the Doppler domain"),
    n1: int = typer.Option(50, "--n1", help="Identifier degree N1"),
    n2: int = typer.Option(50, "--n2", help="Sample half-count N2"),
    features: int = typer.Option(10, "--features", "-S", help="Number of channel features"),
    noise_db: Optional[float] = typer.Option(None, "--noise-db", help="Relative noise level in dB"),
    min_sep: Optional[float] = typer.Option(None, "--min-sep", help="Exact minimal separation"),
    sinc: bool = typer.Option(False, "--sinc/--trig", help="Sample with a sinc-sum identifier"),
    save_operator: bool = typer.Option(False, "--save-operator", help="Also write the dense G used for recovery"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Master seed"),
    out: Optional[Path] = typer.Option(None, "--out", help="Output directory"),
):
    """Draw a random channel and identifier and write the sampled measurement."""
    try:
        dims = validate({"T": time_span, "Omega": omega, "N1": n1, "N2": n2})
        seed = settings.default_seed if seed is None else seed
        channel_seed = derive_seed(seed, 0)
        if min_sep is not None:
            channel = random_channel_min_sep(dims, features, min_sep, channel_seed)
        else:
            channel = random_channel(dims, features, channel_seed)
        if sinc:
            sinc_id = random_sinc_identifier(dims, derive_seed(seed, 1))
            clean = forward_sinc(channel, sinc_id)
            record = SimulationRecord(
                channel=channel, sinc_identifier=sinc_id, samples=clean, noise_db=noise_db, seed=seed
            )
        else:
            identifier = random_identifier(dims, derive_seed(seed, 1))
            clean = forward_direct(channel, identifier)
            record = SimulationRecord(
                channel=channel, identifier=identifier, samples=clean, noise_db=noise_db, seed=seed
            )
        record = record.model_copy(
            update={"samples": add_noise(clean, noise_db, derive_seed(seed, 2))}
        )

        out_dir = _out_dir(out)
        path = out_dir / "simulation.json"
        path.write_text(record.model_dump_json(indent=2))
        console.print(f"[green]Wrote {path}[/green]")
        if save_operator:
            G = build_g(record.recovery_identifier())
            op_path = out_dir / "operator.json"
            op_path.write_text(G.to_record().model_dump_json())
            console.print(f"[green]Wrote {op_path}[/green]")
    except Exception as e:
        logger.error(f"Failed to simulate: {e}")
        raise typer.Exit(1)


@app.command()
def recover(
    simulation: Path = typer.Argument(..., help="Simulation JSON written by 'simulate'"),
    alg: Algorithm = typer.Option(Algorithm.ADCG, "--alg", help="Recovery algorithm"),
    config: Optional[Path] = typer.Option(None, "--config", help="Solver settings JSON"),
    operator: Optional[Path] = typer.Option(None, "--operator", help="Dense operator JSON"),
    lam: Optional[float] = typer.Option(None, "--lambda", help="Regularization parameter"),
    trace: Optional[Path] = typer.Option(None, "--trace", help="Write the solver trace as CSV"),
    out: Optional[Path] = typer.Option(None, "--out", help="Output directory"),
):
    """Estimate the channel parameters from sampled data."""
    try:
        record = SimulationRecord.model_validate_json(simulation.read_text())
        solvers = (
            SolverSuite.model_validate_json(config.read_text()) if config else SolverSuite()
        )
        if lam is not None:
            solvers = solvers.with_lambda(lam)
        else:
            solvers = solvers.with_default_lambda(lambda_for_noise(record.noise_db))
        check_grid_budget(alg, solvers, settings.max_grid_points)
        if operator:
            G = MeasurementOperator.from_record(
                MeasurementOperatorRecord.model_validate_json(operator.read_text())
            )
        else:
            G = build_g(record.recovery_identifier())

        with Progress(
            SpinnerColumn(),
            TextColumn("[progress.description]{task.description}"),
            console=err_console,
        ) as progress:
            task = progress.add_task(f"Running {alg.value}...", total=None)
            result = run_recovery(alg, record.samples, G, solvers)
            progress.update(task, completed=True)

        out_dir = _out_dir(out)
        path = out_dir / f"recovery_{alg.value}.json"
        path.write_text(result.model_dump_json(indent=2))
        if trace:
            pd.DataFrame([h.model_dump() for h in result.history]).to_csv(trace, index=False)

        table = Table(title=f"Recovered channel ({alg.value}, {result.stop_reason.value})")
        table.add_column("tau", style="cyan", justify="right")
        table.add_column("nu", style="cyan", justify="right")
        table.add_column("|eta|", style="green", justify="right")
        for f in result.channel.features:
            table.add_row(f"{f.tau:.6f}", f"{f.nu:.6f}", f"{abs(f.eta):.4f}")
        console.print(table)
        console.print(f"[green]Wrote {path}[/green]")
    except Exception as e:
        logger.error(f"Failed to recover channel: {e}")
        raise typer.Exit(1)


@app.command()
def evaluate(
    truth: Path = typer.Argument(..., help="JSON file holding the true channel"),
    estimate: Path = typer.Argument(..., help="JSON file holding the estimated channel"),
    points: Optional[int] = typer.Option(None, "--M", help="Midpoint-rule discretization points"),
    basis: NormBasis = typer.Option(NormBasis.TRIG, "--basis", help="Identifier space"),
    threshold_db: float = typer.Option(-40.0, "--threshold-db", help="Success threshold"),
    out: Optional[Path] = typer.Option(None, "--out", help="Write the metrics as JSON"),
):
    """Compare an estimated channel with the truth."""
    try:
        true_channel = _load_channel(truth)
        est_channel = _load_channel(estimate)
        matched = match_features(true_channel, est_channel)
        report = operator_norm_err(true_channel, est_channel, M=points, basis=basis)

        table = Table(title="Reconstruction errors")
        table.add_column("Metric", style="cyan")
        table.add_column("Value", style="green")
        table.add_row("max |tau - tau*|", f"{matched.max_tau_err:.4e}")
        table.add_row("max |nu - nu*|", f"{matched.max_nu_err:.4e}")
        table.add_row("max |eta - eta*|", f"{matched.max_eta_err:.4e}")
        table.add_row("Unmatched (truth/estimate)", f"{matched.unmatched_truth}/{matched.unmatched_estimate}")
        table.add_row("Operator-norm error", f"{report.abs_err:.4e}")
        table.add_row("Relative error", f"{report.rel_err_db:.2f} dB")
        table.add_row("Success", "✓" if classify_success(report, threshold_db) else "✗")
        console.print(table)

        if out:
            out.write_text(
                json.dumps(
                    {
                        "matched": matched.model_dump(mode="json"),
                        "operator_norm": report.model_dump(mode="json"),
                    },
                    indent=2,
                )
            )
    except Exception as e:
        logger.error(f"Failed to evaluate estimate: {e}")
        raise typer.Exit(1)


@app.command()
def experiment(
    kind: ExperimentKind = typer.Option(..., "--kind", help="Which study to run"),
    config: Optional[Path] = typer.Option(None, "--config", help="Experiment configuration JSON"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Master seed"),
    trials: Optional[int] = typer.Option(None, "--trials", help="Trials per sweep cell"),
    threads: Optional[int] = typer.Option(None, "--threads", help="Worker processes"),
    out: Optional[Path] = typer.Option(None, "--out", help="Output directory"),
):
    """Run one of the recovery studies and write CSV/JSON results."""
    try:
        if config:
            cfg = ExperimentConfig.model_validate_json(config.read_text())
            if cfg.kind != kind:
                raise ValueError(f"config is for {cfg.kind.value}, not {kind.value}")
        else:
            cfg = ExperimentConfig.defaults(kind)
        overrides = {}
        if seed is not None:
            overrides["seed"] = seed
        elif not config:
            overrides["seed"] = settings.default_seed
        if trials is not None:
            overrides["trials"] = trials
        if overrides:
            cfg = ExperimentConfig.model_validate({**cfg.model_dump(), **overrides})

        runner = ExperimentRunner(settings, threads=threads)
        with Progress(
            SpinnerColumn(),
            TextColumn("[progress.description]{task.description}"),
            BarColumn(),
            MofNCompleteColumn(),
            console=err_console,
        ) as progress:
            task = progress.add_task(f"{kind.value}", total=None)
            report = RUNNERS[kind](
                cfg,
                runner,
                lambda done, total: progress.update(task, completed=done, total=total),
            )

        paths = report.write(_out_dir(out or cfg.output_dir))
        summary = report.aggregates()
        table = Table(title=f"{kind.value} summary")
        for column in summary.columns:
            table.add_column(str(column), justify="right")
        for _, row in summary.iterrows():
            table.add_row(*[f"{v:.4g}" if isinstance(v, float) else str(v) for v in row])
        console.print(table)
        for path in paths.values():
            console.print(f"[green]Wrote {path}[/green]")
    except Exception as e:
        logger.error(f"Failed to run experiment: {e}")
        raise typer.Exit(1)


if __name__ == "__main__":
    app()
