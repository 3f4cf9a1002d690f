from contextlib import contextmanager
from pathlib import Path
from typing import Any, Iterator, Optional

import logfire
import typer
from pydantic import ValidationError
from qft_tables import (
    CountertermTable,
    PropagatorRow,
    RunReport,
    SeriesRow,
    dump_complex,
    write_csv_rows,
    write_json_report,
)
from rich.console import Console
from rich.table import Table

from ..cluster import (
    ClusterConfig,
    convergence_radius,
    mayer_coefficient_direct,
    mayer_from_ks,
    penrose_bound,
    ruelle_constants,
)
from ..cluster.kirkwood_salsburg import MAX_KS_MAYER_ORDER
from ..configs import EngineSettings
from ..errors import BudgetExceededError, CalibrationFailureError, NonConvergenceError
from ..kernels import PropagatorEvaluator, delta_plus_with_error
from ..renorm import (
    compute_counterterms_3d,
    limit_check_order_n,
    schedule_report,
    two_leg_stabilization,
)
from ..sg2d import SnBoundReport, calibrate_constant, verify_sn_bound
from ..smatrix import InteractionLagrangian, smatrix_truncated
from .scenario import Command, ScenarioConfig
from .verify import run_verify

console = Console()
app = typer.Typer(help="Regularized perturbative QFT engine")

EXIT_FAILED_CHECK = 1
EXIT_INVALID = 2
EXIT_NONCONVERGENCE = 3


@app.callback()
def main() -> None:
    logfire.configure(send_to_logfire="if-token-present")


@contextmanager
def _exit_codes() -> Iterator[None]:
    try:
        yield
    except ValidationError as e:
        console.print(f"[red]Invalid scenario:[/red]\n{e}")
        raise typer.Exit(code=EXIT_INVALID)
    except NonConvergenceError as e:
        console.print(
            f"[red]Quadrature did not converge:[/red] {e} "
            f"(error {e.result.error_estimate:.3e} after {e.result.evals_used} evaluations)"
        )
        raise typer.Exit(code=EXIT_NONCONVERGENCE)
    except (ValueError, BudgetExceededError, FileNotFoundError) as e:
        console.print(f"[red]Error:[/red] {str(e)}")
        raise typer.Exit(code=EXIT_INVALID)


def _prepare(
    command: Command, config: Path | None, seed: int | None, threads: int | None
) -> tuple[ScenarioConfig, EngineSettings, int]:
    scenario = ScenarioConfig.load(config) if config is not None else ScenarioConfig()
    problems = scenario.command_problems(command)
    if problems:
        for problem in problems:
            console.print(f"[red]Invalid scenario:[/red] {problem}")
        raise typer.Exit(code=EXIT_INVALID)
    run_seed = scenario.seed if seed is None else seed
    return scenario, scenario.engine_settings(run_seed, threads), run_seed


def _evaluator(scenario: ScenarioConfig, settings: EngineSettings) -> PropagatorEvaluator:
    return PropagatorEvaluator(scenario.model.params(), scenario.model.cutoff(), settings)


def _report(command: str, seed: int, payload: dict[str, Any], out: Path) -> Path:
    path = write_json_report(RunReport(command=command, seed=seed, payload=payload), out / f"{command}.json")
    console.print(f"[green]Wrote[/green] {path}")
    return path


CONFIG_HELP = "Scenario file (JSON or YAML)"
OUT_HELP = "Output directory"
SEED_HELP = "Quadrature seed, overriding the scenario"
THREADS_HELP = "Worker threads, 0 for all cores; REGQFT_THREADS applies when absent"


@app.command()
def propagator(
    config: Optional[Path] = typer.Option(None, "--config", help=CONFIG_HELP),
    out: Path = typer.Option(Path("results"), "--out", help=OUT_HELP),
    seed: Optional[int] = typer.Option(None, "--seed", help=SEED_HELP),
    threads: Optional[int] = typer.Option(None, "--threads", help=THREADS_HELP),
) -> None:
    """Delta_+ on the scenario's (t, r) grid as CSV"""
    with _exit_codes():
        scenario, settings, run_seed = _prepare("propagator", config, seed, threads)
        ev = _evaluator(scenario, settings)
        pad = [0.0] * (scenario.model.dimension - 2)
        rows = []
        for t in scenario.propagator.t_values:
            for r in scenario.propagator.r_values:
                x = [r, *pad]
                value, error = delta_plus_with_error(t, x, ev)
                row = PropagatorRow(t=t, x=x, re=value.real, im=value.imag, error=error)
                rows.append({**row.flat(), "seed": run_seed})
        path = write_csv_rows(rows, out / "propagator.csv")
        console.print(f"[green]Wrote[/green] {len(rows)} rows to {path}")


@app.command()
def smatrix(
    config: Optional[Path] = typer.Option(None, "--config", help=CONFIG_HELP),
    out: Path = typer.Option(Path("results"), "--out", help=OUT_HELP),
    seed: Optional[int] = typer.Option(None, "--seed", help=SEED_HELP),
    threads: Optional[int] = typer.Option(None, "--threads", help=THREADS_HELP),
) -> None:
    """S_n(phi) through the scenario's order, one CSV row per order"""
    with _exit_codes():
        scenario, settings, run_seed = _prepare("smatrix", config, seed, threads)
        block = scenario.interaction
        if block.coupling == 0:
            rows = [SeriesRow(n=0, re=1.0, im=0.0, quad_error=0.0, tail_bound_at_n=0.0)]
        else:
            ev = _evaluator(scenario, settings)
            g = block.smearing_for(scenario.model.dimension)
            L = InteractionLagrangian.from_profile(block.coupling, block.profile, g)
            series = smatrix_truncated(block.order, L, ev, block.field, settings, threads)
            rows = [
                SeriesRow(
                    n=term.n,
                    re=term.value.real,
                    im=term.value.imag,
                    quad_error=term.quad_error,
                    tail_bound_at_n=term.tail_bound_at_n,
                    converged=term.converged,
                )
                for term in series.orders
            ]
            console.print(
                f"partial sum {series.partial:.6g}, |.| <= exp(A |g|_1) = {series.envelope:.6g}: "
                f"{'yes' if series.within_bound else 'NO'}"
            )
        path = write_csv_rows([{**row.model_dump(), "seed": run_seed} for row in rows], out / "smatrix.csv")
        console.print(f"[green]Wrote[/green] {path}")


@app.command()
def renorm3d(
    config: Optional[Path] = typer.Option(None, "--config", help=CONFIG_HELP),
    out: Path = typer.Option(Path("results"), "--out", help=OUT_HELP),
    seed: Optional[int] = typer.Option(None, "--seed", help=SEED_HELP),
    threads: Optional[int] = typer.Option(None, "--threads", help=THREADS_HELP),
) -> None:
    """phi^4_3 counterterms and the removal of the large-field regulator"""
    with _exit_codes():
        scenario, settings, run_seed = _prepare("renorm3d", config, seed, threads)
        block = scenario.renorm3d
        lambda_ = scenario.interaction.coupling
        phi = scenario.interaction.field
        g = scenario.interaction.smearing_for(3)
        ev = _evaluator(scenario, settings)
        counterterms = compute_counterterms_3d(lambda_, block.Lambda2, g, ev, settings, threads)
        report = limit_check_order_n(
            block.order,
            lambda_,
            block.Lambda2,
            g,
            ev,
            phi,
            block.Lambda1_sequence,
            settings,
            counterterms,
            block.corollary,
            block.rule_nodes,
        )
        payload: dict[str, Any] = {
            "counterterms": {
                "Lambda2": block.Lambda2,
                "c2": dump_complex(counterterms.c2.value),
                "c2_error": counterterms.c2.error_estimate,
                "c3": dump_complex(counterterms.c3.value),
                "c3_error": counterterms.c3.error_estimate,
                "c": dump_complex(counterterms.c),
                "c_error": counterterms.c_error,
            },
            "limit_check": report.model_dump(mode="json"),
        }
        if block.two_leg_Lambda2:
            two_leg = two_leg_stabilization(lambda_, block.two_leg_Lambda2, g, ev, phi, settings)
            payload["two_leg"] = two_leg.model_dump(mode="json")
        _report("renorm3d", run_seed, payload, out)


@app.command()
def renorm4d(
    config: Optional[Path] = typer.Option(None, "--config", help=CONFIG_HELP),
    out: Path = typer.Option(Path("results"), "--out", help=OUT_HELP),
    seed: Optional[int] = typer.Option(None, "--seed", help=SEED_HELP),
    threads: Optional[int] = typer.Option(None, "--threads", help=THREADS_HELP),
) -> None:
    """The scheduled phi^4_4 sequence read from a counterterm table"""
    with _exit_codes():
        scenario, settings, run_seed = _prepare("renorm4d", config, seed, threads)
        block = scenario.renorm4d
        assert block.table is not None
        table = CountertermTable.load(block.table)
        g = scenario.interaction.smearing_for(4)
        report = schedule_report(
            block.k_values,
            block.base,
            table,
            scenario.model.mass,
            scenario.interaction.coupling,
            g,
            _evaluator(scenario, settings),
            scenario.interaction.field,
            settings,
            block.order,
            block.rule_nodes,
        )
        payload = {
            "table": table.metadata.model_dump(mode="json"),
            "schedule": report.model_dump(mode="json"),
        }
        _report("renorm4d", run_seed, payload, out)


def _sn_payload(report: SnBoundReport, calibrated: bool) -> dict[str, Any]:
    return {
        "Lambda": report.Lambda,
        "C_cal": report.C_cal,
        "calibrated": calibrated,
        "rows": [
            {
                "n": row.n,
                "abs_S_n": row.abs_value,
                "quad_error": row.quad_error,
                "bound": row.bound,
                "ratio": row.ratio,
            }
            for row in report.rows
        ],
    }


@app.command()
def sg2d(
    config: Optional[Path] = typer.Option(None, "--config", help=CONFIG_HELP),
    out: Path = typer.Option(Path("results"), "--out", help=OUT_HELP),
    seed: Optional[int] = typer.Option(None, "--seed", help=SEED_HELP),
    threads: Optional[int] = typer.Option(None, "--threads", help=THREADS_HELP),
) -> None:
    """|S_n| against the two-dimensional sine-Gordon bound"""
    with _exit_codes():
        scenario, settings, run_seed = _prepare("sg2d", config, seed, threads)
        block = scenario.sg2d
        f = scenario.interaction.profile
        g = scenario.interaction.smearing_for(2)
        phi = scenario.interaction.field
        ev = _evaluator(scenario, settings)
        params = block.params(scenario.model.mass)
        calibrated = block.C_cal is None
        if calibrated:
            calibration = calibrate_constant(params, f, g, ev, settings, phi)
            params = block.params(scenario.model.mass, calibration.C_cal)
        try:
            report = verify_sn_bound(block.n_values, params, f, g, phi, ev, settings, threads)
        except CalibrationFailureError as e:
            _report("sg2d", run_seed, _sn_payload(e.report, calibrated), out)
            console.print(f"[red]Bound violated:[/red] {e}")
            raise typer.Exit(code=EXIT_FAILED_CHECK)
        _report("sg2d", run_seed, _sn_payload(report, calibrated), out)


@app.command()
def cluster(
    config: Optional[Path] = typer.Option(None, "--config", help=CONFIG_HELP),
    out: Path = typer.Option(Path("results"), "--out", help=OUT_HELP),
    seed: Optional[int] = typer.Option(None, "--seed", help=SEED_HELP),
    threads: Optional[int] = typer.Option(None, "--threads", help=THREADS_HELP),
) -> None:
    """Mayer coefficients of the dominating gas by both routes, with the Penrose-Ruelle bound"""
    with _exit_codes():
        scenario, settings, run_seed = _prepare("cluster", config, seed, threads)
        block = scenario.cluster
        ev = _evaluator(scenario, settings)
        g = scenario.interaction.smearing_for(2)
        gas = ClusterConfig.from_evaluator(
            scenario.interaction.profile, g, ev, scenario.interaction.coupling, settings
        )
        rc = ruelle_constants(gas, rule_nodes=block.rule_nodes)
        rows = []
        for n in range(1, block.max_order + 1):
            direct = mayer_coefficient_direct(n, gas)
            row: dict[str, Any] = {
                "n": n,
                "C_direct": direct.value.real,
                "C_direct_error": direct.error_estimate,
                "C_ks": None,
                "C_ks_error": None,
                "penrose_bound": penrose_bound(n, rc),
            }
            if n - 1 <= MAX_KS_MAYER_ORDER and n <= settings.ks_cap:
                ks = mayer_from_ks(n - 1, gas)
                row.update({"C_ks": ks.value.real, "C_ks_error": ks.error_estimate})
            rows.append(row)
        payload = {
            "rows": rows,
            "E": rc.E,
            "E_error": rc.E_error,
            "B": rc.B,
            "radius": convergence_radius(rc),
        }
        _report("cluster", run_seed, payload, out)


@app.command()
def verify(
    config: Optional[Path] = typer.Option(None, "--config", help=CONFIG_HELP),
    out: Path = typer.Option(Path("results"), "--out", help=OUT_HELP),
    seed: Optional[int] = typer.Option(None, "--seed", help=SEED_HELP),
    threads: Optional[int] = typer.Option(None, "--threads", help=THREADS_HELP),
) -> None:
    """Run the invariant suite and print a pass/fail table"""
    with _exit_codes():
        _, settings, run_seed = _prepare("verify", config, seed, threads)
        rows = run_verify(settings)
        table = Table(title="regqft verify")
        table.add_column("Check")
        table.add_column("Reference", style="cyan")
        table.add_column("Measured", justify="right")
        table.add_column("Threshold", justify="right")
        table.add_column("Result")
        for row in rows:
            table.add_row(
                row.check,
                row.reference,
                f"{row.measured:.3e}",
                f"{row.threshold:.3e}",
                "[green]pass[/green]" if row.passed else "[red]FAIL[/red]",
            )
        console.print(table)
        all_passed = all(row.passed for row in rows)
        write_json_report(
            RunReport(
                command="verify",
                seed=run_seed,
                payload={"rows": [row.model_dump() for row in rows], "all_passed": all_passed},
            ),
            out / "verify_report.json",
        )
        if not all_passed:
            raise typer.Exit(code=EXIT_FAILED_CHECK)
