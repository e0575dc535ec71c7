"""Operator command line: submit experiments, run the control loop against a
backend, export per-trial results, and execute canned scenarios.

Exit codes: 0 success, 2 validation failure, 3 name conflict, 4 runtime
error, 5 scenario assertion failure.
"""

from __future__ import annotations

import logging
import sys
from pathlib import Path

import click

from .cluster.localproc import LocalProcessBackend
from .cluster.sim import SimBackend, SimWorld
from .controller.model import KIND_EXPERIMENT
from .controller.reconcile import run_control_loop, submit_experiment
from .controller.store import FileResourceStore
from .errors import ResourceExistsError, TunectlError, ValidationError
from .metrics import FileObservationStore
from .resources import parse_experiment
from .results import build_results_table, render_csv, render_jsonl
from .scenarios import SCENARIO_NAMES, load_scenario, run_scenario

EXIT_VALIDATION = 2
EXIT_CONFLICT = 3
EXIT_RUNTIME = 4
EXIT_ASSERTION = 5

store_option = click.option(
    "--store",
    "store_dir",
    envvar="TUNECTL_STORE",
    required=True,
    type=click.Path(file_okay=False, path_type=Path),
    help="Resource store directory (env: TUNECTL_STORE).",
)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable debug logging.")
def cli(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


@cli.command()
@click.argument("experiment_file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@store_option
def submit(experiment_file: Path, store_dir: Path) -> None:
    """Validate an experiment file and persist it in the Created phase."""
    try:
        spec = parse_experiment(experiment_file.read_text())
    except ValidationError as exc:
        for error in exc.errors:
            click.echo(f"{experiment_file}: {error}", err=True)
        sys.exit(EXIT_VALIDATION)
    store = FileResourceStore(store_dir)
    try:
        resource = submit_experiment(store, spec)
    except ResourceExistsError as exc:
        click.echo(str(exc), err=True)
        sys.exit(EXIT_CONFLICT)
    click.echo(resource.key)


def _print_summary(snapshot: dict) -> None:
    for key, result in snapshot["experiments"].items():
        optimal = result["currentOptimal"]
        click.echo(
            f"{key}: {result['phase']}  "
            f"succeeded={result['trialsSucceeded']} failed={result['trialsFailed']} "
            f"running={result['trialsRunning']} spawned={result['totalSpawned']}"
        )
        if optimal is not None:
            assignments = " ".join(f"{n}={v}" for n, v in optimal["assignments"])
            click.echo(f"  best: {optimal['objectiveValue']} @ {assignments}")


@cli.command()
@store_option
@click.option("--backend", "backend_name", type=click.Choice(["sim", "local"]), default="sim")
@click.option(
    "--scenario",
    "scenario_file",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="Scenario file describing the simulated world.",
)
@click.option("--seed", type=int, default=0, help="World seed (sim backend).")
@click.option("--max-ticks", type=int, default=100_000)
def run(
    store_dir: Path,
    backend_name: str,
    scenario_file: Path | None,
    seed: int,
    max_ticks: int,
) -> None:
    """Drive every experiment in the store to a terminal phase."""
    store = FileResourceStore(store_dir)
    metrics = FileObservationStore(store_dir / "metrics.jsonl")
    try:
        if backend_name == "local":
            backend = LocalProcessBackend(metrics)
        elif SimBackend.has_snapshot(store_dir):
            backend = SimBackend.resume(store_dir, metrics)
            if scenario_file is not None:
                click.echo("resuming persisted world; --scenario ignored", err=True)
        else:
            world = SimWorld(seed=seed)
            if scenario_file is not None:
                cfg = load_scenario(scenario_file)
                world = SimWorld(seed=cfg.seed, gang=cfg.gang, autoscaler=cfg.autoscaler, chaos=cfg.chaos)
                for capacity in cfg.node_capacities:
                    world.add_node(capacity)
                for name, limit in cfg.namespaces.items():
                    world.add_namespace(name, limit)
                for spec in cfg.experiments:
                    try:
                        submit_experiment(store, spec)
                    except ResourceExistsError:
                        pass
                max_ticks = min(max_ticks, cfg.max_ticks)
            else:
                for _ in range(4):
                    world.add_node(8.0)
            # Convenience: every submitted experiment needs its namespace.
            for exp in store.list(KIND_EXPERIMENT):
                if exp.namespace not in world.namespaces:
                    world.add_namespace(exp.namespace)
            backend = SimBackend(world, metrics, state_dir=store_dir)
    except ValidationError as exc:
        for error in exc.errors:
            click.echo(error, err=True)
        sys.exit(EXIT_VALIDATION)
    except TunectlError as exc:
        click.echo(f"backend init failed: {exc}", err=True)
        sys.exit(EXIT_RUNTIME)

    if not store.list(KIND_EXPERIMENT):
        click.echo("store has no experiments; submit one first", err=True)
        sys.exit(EXIT_RUNTIME)
    try:
        snapshot = run_control_loop(store, metrics, backend, max_ticks=max_ticks)
    except KeyboardInterrupt:
        click.echo("interrupted; state persisted, re-run to resume", err=True)
        sys.exit(EXIT_RUNTIME)
    finally:
        backend.close()
    _print_summary(snapshot)


@cli.command()
@click.argument("experiment")
@store_option
@click.option("--namespace", default=None, help="Disambiguate when the name exists in several namespaces.")
@click.option("--format", "fmt", type=click.Choice(["csv", "jsonl"]), default="csv")
@click.option(
    "--output",
    "output_path",
    type=click.Path(dir_okay=False, path_type=Path),
    default=None,
    help="Write to a file instead of stdout.",
)
def export(
    experiment: str, store_dir: Path, namespace: str | None, fmt: str, output_path: Path | None
) -> None:
    """Export the per-trial results table (parallel-coordinates input)."""
    store = FileResourceStore(store_dir)
    metrics = FileObservationStore(store_dir / "metrics.jsonl")
    matches = [
        e
        for e in store.list(KIND_EXPERIMENT)
        if e.name == experiment and (namespace is None or e.namespace == namespace)
    ]
    if not matches:
        click.echo(f"unknown experiment '{experiment}'", err=True)
        sys.exit(EXIT_RUNTIME)
    if len(matches) > 1:
        click.echo(
            f"experiment '{experiment}' exists in namespaces "
            f"{', '.join(sorted(e.namespace for e in matches))}; pass --namespace",
            err=True,
        )
        sys.exit(EXIT_RUNTIME)
    table = build_results_table(store, metrics, matches[0].namespace, experiment)
    text = render_csv(table) if fmt == "csv" else render_jsonl(table)
    if output_path is None:
        click.echo(text, nl=False)
    else:
        output_path.write_text(text)
        click.echo(f"wrote {len(table.rows)} rows to {output_path}")


@cli.command()
@click.argument("name", type=click.Choice(SCENARIO_NAMES))
@click.option("--seed", type=int, default=0)
@click.option(
    "--store",
    "store_dir",
    envvar="TUNECTL_STORE",
    type=click.Path(file_okay=False, path_type=Path),
    default=None,
    help="Optional state directory (persists world snapshots and event logs).",
)
def scenario(name: str, seed: int, store_dir: Path | None) -> None:
    """Run a canned evaluation scenario and check its acceptance assertions."""
    try:
        outcome = run_scenario(name, seed=seed, state_dir=store_dir)
    except TunectlError as exc:
        click.echo(f"scenario failed to run: {exc}", err=True)
        sys.exit(EXIT_RUNTIME)
    for check in outcome.checks:
        status = "PASS" if check.passed else "FAIL"
        click.echo(f"{status} {outcome.name}/{check.name}: {check.detail}")
    if not outcome.passed:
        failed = sum(1 for c in outcome.checks if not c.passed)
        click.echo(f"{failed} assertion(s) failed", err=True)
        sys.exit(EXIT_ASSERTION)
    click.echo(f"scenario '{outcome.name}' passed ({len(outcome.checks)} checks)")


def main() -> None:
    cli()


if __name__ == "__main__":
    main()
