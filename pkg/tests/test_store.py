"""Resource store: CAS semantics and file persistence."""

from __future__ import annotations

import pytest

from conftest import make_experiment
from tunectl.controller.model import (
    ExperimentPhase,
    ExperimentStatus,
    KIND_EXPERIMENT,
    Resource,
    TrialPhase,
    TrialSpec,
    TrialStatus,
    KIND_TRIAL,
)
from tunectl.controller.store import FileResourceStore, ResourceStore
from tunectl.errors import CasConflictError, ResourceExistsError
from tunectl.resources import ParameterSpec, ParameterType, Range


def _experiment_resource(name="exp", namespace="ns"):
    spec = make_experiment(
        [ParameterSpec("x", ParameterType.DOUBLE, Range(0.0, 1.0))], name=name, namespace=namespace
    )
    return Resource(
        kind=KIND_EXPERIMENT, namespace=namespace, name=name, spec=spec, status=ExperimentStatus()
    )


def test_create_get_round_trip():
    store = ResourceStore()
    created = store.create(_experiment_resource())
    assert created.generation == 1
    got = store.get("experiment/ns/exp")
    assert got is not None and got.name == "exp"


def test_create_conflict():
    store = ResourceStore()
    store.create(_experiment_resource())
    with pytest.raises(ResourceExistsError):
        store.create(_experiment_resource())


def test_update_increments_generation_and_detects_staleness():
    store = ResourceStore()
    store.create(_experiment_resource())
    first = store.get("experiment/ns/exp")
    second = store.get("experiment/ns/exp")
    first.status.phase = ExperimentPhase.RUNNING
    updated = store.update(first)
    assert updated.generation == 2
    second.status.phase = ExperimentPhase.FAILED
    with pytest.raises(CasConflictError):
        store.update(second)  # stale generation


def test_get_returns_isolated_copies():
    store = ResourceStore()
    store.create(_experiment_resource())
    a = store.get("experiment/ns/exp")
    a.status.phase = ExperimentPhase.FAILED
    b = store.get("experiment/ns/exp")
    assert b.status.phase is ExperimentPhase.CREATED


def test_list_sorted_and_filtered():
    store = ResourceStore()
    store.create(_experiment_resource("b", "ns1"))
    store.create(_experiment_resource("a", "ns1"))
    store.create(_experiment_resource("a", "ns2"))
    keys = [r.key for r in store.list(KIND_EXPERIMENT)]
    assert keys == sorted(keys)
    assert [r.key for r in store.list(KIND_EXPERIMENT, "ns2")] == ["experiment/ns2/a"]


def test_file_store_round_trip(tmp_path):
    store = FileResourceStore(tmp_path)
    store.create(_experiment_resource())
    trial = Resource(
        kind=KIND_TRIAL,
        namespace="ns",
        name="exp-0000",
        spec=TrialSpec(experiment="exp", assignments=(("x", 0.25),)),
        status=TrialStatus(phase=TrialPhase.RUNNING, restart_count=1, job_attempt=2),
    )
    store.create(trial)
    got = store.get("trial/ns/exp-0000")
    got.status.phase = TrialPhase.SUCCEEDED
    got.status.observation = 0.0625
    store.update(got)

    reloaded = FileResourceStore(tmp_path)
    exp = reloaded.get("experiment/ns/exp")
    assert exp is not None and exp.spec == _experiment_resource().spec
    trial2 = reloaded.get("trial/ns/exp-0000")
    assert trial2.status.phase is TrialPhase.SUCCEEDED
    assert trial2.status.observation == 0.0625
    assert trial2.status.restart_count == 1
    assert trial2.spec.assignments == (("x", 0.25),)
    assert trial2.generation == 2


def test_file_store_preserves_generations_across_reload(tmp_path):
    store = FileResourceStore(tmp_path)
    store.create(_experiment_resource())
    res = store.get("experiment/ns/exp")
    res.status.phase = ExperimentPhase.RUNNING
    store.update(res)

    reloaded = FileResourceStore(tmp_path)
    res2 = reloaded.get("experiment/ns/exp")
    assert res2.generation == 2
    res2.status.phase = ExperimentPhase.SUCCEEDED
    assert reloaded.update(res2).generation == 3
