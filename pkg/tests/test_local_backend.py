"""Local-process execution backend driven through the control loop."""

from __future__ import annotations

import sys
import textwrap

import pytest

from conftest import make_experiment
from tunectl.cluster.localproc import LocalProcessBackend
from tunectl.controller.backend import JobPhase
from tunectl.controller.model import KIND_TRIAL, TrialPhase
from tunectl.controller.reconcile import run_control_loop, submit_experiment
from tunectl.controller.store import ResourceStore
from tunectl.metrics import InMemoryObservationStore
from tunectl.resources import (
    CollectorKind,
    ObjectiveType,
    ParameterSpec,
    ParameterType,
    Range,
    RestartPolicy,
    TemplateKind,
    TrialRunSpec,
    TrialTemplate,
    ValueList,
)

LR = [ParameterSpec("lr", ParameterType.DOUBLE, Range(0.0, 1.0))]


def _local_experiment(command, *, parallel=2, max_trials=2, collector=CollectorKind.PULL,
                      restart=RestartPolicy.NEVER, params=LR, max_failed=0):
    spec = make_experiment(
        params,
        objective_type=ObjectiveType.MAXIMIZE,
        metric="accuracy",
        parallel=parallel,
        max_trials=max_trials,
        max_failed=max_failed,
        template=TrialTemplate(kind=TemplateKind.LOCAL_PROCESS, payload=command, restart_policy=restart),
    )
    spec.metric_collector_kind = collector
    return spec


def _run(spec):
    store = ResourceStore()
    metrics = InMemoryObservationStore()
    backend = LocalProcessBackend(metrics, poll_interval=0.005)
    submit_experiment(store, spec)
    snapshot = run_control_loop(store, metrics, backend, max_ticks=4000)
    return snapshot, store, metrics


def test_echo_metric_script_succeeds():
    spec = _local_experiment(f"{sys.executable} -c \"print('1 accuracy=0.9')\"", max_trials=1, parallel=1)
    snapshot, store, _ = _run(spec)
    result = snapshot["experiments"]["experiment/ns/exp"]
    assert result["phase"] == "Succeeded"
    trial = store.list(KIND_TRIAL)[0]
    assert trial.status.observation == 0.9


def test_hyperparameters_reach_command_line(tmp_path):
    script = tmp_path / "train.py"
    script.write_text(
        textwrap.dedent(
            """
            import sys
            lr = float(sys.argv[1].split("=")[1])
            print(f"1 accuracy={1.0 - abs(lr - 0.5)}")
            """
        )
    )
    spec = _local_experiment(
        f"{sys.executable} {script} --lr=${{lr}}", parallel=3, max_trials=3
    )
    snapshot, store, _ = _run(spec)
    assert snapshot["experiments"]["experiment/ns/exp"]["phase"] == "Succeeded"
    for trial in store.list(KIND_TRIAL):
        lr = dict(trial.spec.assignments)["lr"]
        assert trial.status.observation == pytest.approx(1.0 - abs(lr - 0.5))


def test_temporary_exit_code_restarts_when_policy_allows(tmp_path):
    script = tmp_path / "flaky.py"
    script.write_text(
        textwrap.dedent(
            """
            import os, sys
            if int(os.environ["TUNECTL_RESTART_COUNT"]) == 0:
                sys.exit(75)
            print("1 accuracy=0.7")
            """
        )
    )
    spec = _local_experiment(
        f"{sys.executable} {script}", parallel=1, max_trials=1,
        restart=RestartPolicy.ON_TEMPORARY_FAILURE,
    )
    snapshot, store, _ = _run(spec)
    trial = store.list(KIND_TRIAL)[0]
    assert trial.status.phase is TrialPhase.SUCCEEDED
    assert trial.status.restart_count == 1


def test_temporary_exit_code_fails_without_restart_policy(tmp_path):
    script = tmp_path / "flaky.py"
    script.write_text("import sys; sys.exit(75)")
    spec = _local_experiment(f"{sys.executable} {script}", parallel=1, max_trials=1)
    snapshot, store, _ = _run(spec)
    trial = store.list(KIND_TRIAL)[0]
    assert trial.status.phase is TrialPhase.FAILED
    assert snapshot["experiments"]["experiment/ns/exp"]["phase"] == "Failed"


def test_nonexistent_command_is_permanent_failure():
    spec = _local_experiment("definitely-not-a-real-binary-anywhere --x=1", parallel=1, max_trials=1)
    snapshot, store, _ = _run(spec)
    trial = store.list(KIND_TRIAL)[0]
    assert trial.status.phase is TrialPhase.FAILED
    assert "spawn failed" in trial.status.reason


def test_nonzero_exit_is_permanent_failure(tmp_path):
    script = tmp_path / "bad.py"
    script.write_text("import sys; sys.exit(3)")
    spec = _local_experiment(f"{sys.executable} {script}", parallel=1, max_trials=1)
    _, store, _ = _run(spec)
    trial = store.list(KIND_TRIAL)[0]
    assert trial.status.phase is TrialPhase.FAILED
    assert "exit code 3" in trial.status.reason


def test_push_and_pull_yield_identical_observations(tmp_path):
    script = tmp_path / "train.py"
    script.write_text(
        textwrap.dedent(
            """
            print("1 accuracy=0.5012")
            print("INFO midway")
            print("2 accuracy=0.93170001")
            """
        )
    )
    command = f"{sys.executable} {script}"
    observations = {}
    for collector in (CollectorKind.PULL, CollectorKind.PUSH):
        spec = _local_experiment(command, parallel=1, max_trials=1, collector=collector)
        _, store, metrics = _run(spec)
        trial = store.list(KIND_TRIAL)[0]
        observations[collector] = trial.status.observation
        points = metrics.get_observation_log("ns/exp-0000")
        assert [p.value for p in points] == [0.5012, 0.93170001]
    assert observations[CollectorKind.PULL] == observations[CollectorKind.PUSH]


def test_job_state_for_unknown_handle_is_missing():
    backend = LocalProcessBackend(InMemoryObservationStore())
    assert backend.job_state("ns/ghost").phase is JobPhase.MISSING


def test_direct_submit_rejects_simulated_payload():
    from tunectl.errors import InvalidPayloadError
    from tunectl.resources import SimObjectiveDescriptor

    backend = LocalProcessBackend(InMemoryObservationStore())
    run_spec = TrialRunSpec(
        trial_name="t", namespace="ns",
        resolved_payload=SimObjectiveDescriptor("sphere"), parameter_assignments=(),
    )
    template = TrialTemplate(kind=TemplateKind.SIMULATED, payload=SimObjectiveDescriptor("sphere"))
    with pytest.raises(InvalidPayloadError):
        backend.submit(
            run_spec, template, collector_kind=CollectorKind.PULL, watched_metrics=("m",)
        )


def test_backend_payload_mismatch_fails_trials_permanently():
    # A simulated-template experiment on the local backend is the
    # invalid-payload analog: trials fail, the experiment ends Failed.
    spec = make_experiment(LR, parallel=1, max_trials=1)
    store = ResourceStore()
    metrics = InMemoryObservationStore()
    backend = LocalProcessBackend(metrics, poll_interval=0.001)
    submit_experiment(store, spec)
    snapshot = run_control_loop(store, metrics, backend, max_ticks=50)
    trial = store.list(KIND_TRIAL)[0]
    assert trial.status.phase is TrialPhase.FAILED
    assert "local-process" in trial.status.reason
    assert snapshot["experiments"]["experiment/ns/exp"]["phase"] == "Failed"
