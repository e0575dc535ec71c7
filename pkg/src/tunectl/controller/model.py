"""Typed resources managed by the controllers, plus their YAML document forms.

Every resource has a Spec (desired state), a Status (current state), and a
generation counter used for compare-and-swap updates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from ..resources import (
    AlgorithmSpec,
    ExperimentSpec,
    SimObjectiveDescriptor,
    TrialRunSpec,
    experiment_to_doc,
    parse_experiment,
)
from ..suggest.registry import AssignmentSet

import yaml

KIND_EXPERIMENT = "experiment"
KIND_SUGGESTION = "suggestion"
KIND_TRIAL = "trial"


class ExperimentPhase(str, Enum):
    CREATED = "Created"
    RUNNING = "Running"
    SUCCEEDED = "Succeeded"
    FAILED = "Failed"


class TrialPhase(str, Enum):
    CREATED = "Created"
    PENDING = "Pending"
    RUNNING = "Running"
    SUCCEEDED = "Succeeded"
    FAILED = "Failed"


TERMINAL_EXPERIMENT = (ExperimentPhase.SUCCEEDED, ExperimentPhase.FAILED)
TERMINAL_TRIAL = (TrialPhase.SUCCEEDED, TrialPhase.FAILED)


@dataclass(frozen=True)
class OptimalResult:
    assignments: AssignmentSet
    objective_value: float


@dataclass
class ExperimentStatus:
    phase: ExperimentPhase = ExperimentPhase.CREATED
    trials_pending: int = 0
    trials_running: int = 0
    trials_succeeded: int = 0
    trials_failed: int = 0
    total_spawned: int = 0
    current_optimal: OptimalResult | None = None


@dataclass
class SuggestionSpec:
    experiment: str
    algorithm: AlgorithmSpec
    requested: int


@dataclass
class ProducedSuggestion:
    assignments: AssignmentSet
    consumed: bool = False


@dataclass
class SuggestionStatus:
    produced: list[ProducedSuggestion] = field(default_factory=list)
    exhausted: bool = False


@dataclass
class TrialSpec:
    experiment: str
    assignments: AssignmentSet
    run_spec: TrialRunSpec | None = None


@dataclass
class TrialStatus:
    phase: TrialPhase = TrialPhase.CREATED
    restart_count: int = 0
    observation: float | None = None
    reason: str | None = None
    job_attempt: int = 0


@dataclass
class Resource:
    kind: str
    namespace: str
    name: str
    spec: Any
    status: Any
    generation: int = 1

    @property
    def key(self) -> str:
        return resource_key(self.kind, self.namespace, self.name)


def resource_key(kind: str, namespace: str, name: str) -> str:
    return f"{kind}/{namespace}/{name}"


def clone_resource(resource: Resource) -> Resource:
    """Cheap defensive copy for store reads and writes.

    Experiment specs are shared (treated as immutable once parsed); the
    mutable shells around them — statuses, suggestion/trial specs — are
    rebuilt so callers and the store never alias mutable state. Assignment
    tuples and run specs are immutable and safely shared.
    """
    import dataclasses

    spec = resource.spec
    status = resource.status
    if resource.kind == KIND_SUGGESTION:
        spec = SuggestionSpec(
            experiment=spec.experiment,
            algorithm=AlgorithmSpec(spec.algorithm.algorithm_name, dict(spec.algorithm.settings)),
            requested=spec.requested,
        )
        status = SuggestionStatus(
            produced=[ProducedSuggestion(p.assignments, p.consumed) for p in status.produced],
            exhausted=status.exhausted,
        )
    elif resource.kind == KIND_TRIAL:
        spec = TrialSpec(experiment=spec.experiment, assignments=spec.assignments, run_spec=spec.run_spec)
        status = dataclasses.replace(status)
    else:
        status = dataclasses.replace(status)
    return Resource(
        kind=resource.kind,
        namespace=resource.namespace,
        name=resource.name,
        spec=spec,
        status=status,
        generation=resource.generation,
    )


# ---------------------------------------------------------------------------
# Document (de)serialization for the file store
# ---------------------------------------------------------------------------


def _assignments_to_doc(assignments: AssignmentSet) -> list[dict]:
    return [{"name": n, "value": v} for n, v in assignments]


def _assignments_from_doc(doc: list[dict]) -> AssignmentSet:
    return tuple((d["name"], d["value"]) for d in doc)


def _run_spec_to_doc(run_spec: TrialRunSpec | None) -> dict | None:
    if run_spec is None:
        return None
    payload: Any = run_spec.resolved_payload
    if isinstance(payload, SimObjectiveDescriptor):
        payload = {
            "functionName": payload.function_name,
            "durationTicks": payload.duration_ticks,
            "noiseStdDev": payload.noise_std_dev,
            "rngSeedOffset": payload.rng_seed_offset,
        }
        payload_kind = "simulated"
    else:
        payload_kind = "command"
    return {
        "trialName": run_spec.trial_name,
        "namespace": run_spec.namespace,
        "payloadKind": payload_kind,
        "resolvedPayload": payload,
        "parameterAssignments": _assignments_to_doc(run_spec.parameter_assignments),
    }


def _run_spec_from_doc(doc: dict | None) -> TrialRunSpec | None:
    if doc is None:
        return None
    payload: Any = doc["resolvedPayload"]
    if doc.get("payloadKind") == "simulated":
        payload = SimObjectiveDescriptor(
            function_name=payload["functionName"],
            duration_ticks=payload["durationTicks"],
            noise_std_dev=payload["noiseStdDev"],
            rng_seed_offset=payload["rngSeedOffset"],
        )
    return TrialRunSpec(
        trial_name=doc["trialName"],
        namespace=doc["namespace"],
        resolved_payload=payload,
        parameter_assignments=_assignments_from_doc(doc["parameterAssignments"]),
    )


def resource_to_doc(resource: Resource) -> dict:
    doc: dict[str, Any] = {
        "kind": resource.kind,
        "name": resource.name,
        "namespace": resource.namespace,
    }
    if resource.kind == KIND_EXPERIMENT:
        doc["spec"] = experiment_to_doc(resource.spec)
        status: ExperimentStatus = resource.status
        doc["status"] = {
            "phase": status.phase.value,
            "trialsPending": status.trials_pending,
            "trialsRunning": status.trials_running,
            "trialsSucceeded": status.trials_succeeded,
            "trialsFailed": status.trials_failed,
            "totalSpawned": status.total_spawned,
            "currentOptimal": None
            if status.current_optimal is None
            else {
                "assignments": _assignments_to_doc(status.current_optimal.assignments),
                "objectiveValue": status.current_optimal.objective_value,
            },
        }
    elif resource.kind == KIND_SUGGESTION:
        spec: SuggestionSpec = resource.spec
        doc["spec"] = {
            "experiment": spec.experiment,
            "algorithm": {
                "algorithmName": spec.algorithm.algorithm_name,
                "settings": {k: spec.algorithm.settings[k] for k in sorted(spec.algorithm.settings)},
            },
            "requested": spec.requested,
        }
        sstatus: SuggestionStatus = resource.status
        doc["status"] = {
            "produced": [
                {"assignments": _assignments_to_doc(p.assignments), "consumed": p.consumed}
                for p in sstatus.produced
            ],
            "exhausted": sstatus.exhausted,
        }
    elif resource.kind == KIND_TRIAL:
        tspec: TrialSpec = resource.spec
        doc["spec"] = {
            "experiment": tspec.experiment,
            "assignments": _assignments_to_doc(tspec.assignments),
            "runSpec": _run_spec_to_doc(tspec.run_spec),
        }
        tstatus: TrialStatus = resource.status
        doc["status"] = {
            "phase": tstatus.phase.value,
            "restartCount": tstatus.restart_count,
            "observation": tstatus.observation,
            "reason": tstatus.reason,
            "jobAttempt": tstatus.job_attempt,
        }
    else:
        raise ValueError(f"unknown resource kind '{resource.kind}'")
    return doc


def resource_from_doc(doc: dict, generation: int) -> Resource:
    kind = doc["kind"]
    name = doc["name"]
    namespace = doc["namespace"]
    spec: Any
    status: Any
    if kind == KIND_EXPERIMENT:
        spec = parse_experiment(yaml.safe_dump(doc["spec"], sort_keys=False))
        sdoc = doc["status"]
        optimal = sdoc.get("currentOptimal")
        status = ExperimentStatus(
            phase=ExperimentPhase(sdoc["phase"]),
            trials_pending=sdoc["trialsPending"],
            trials_running=sdoc["trialsRunning"],
            trials_succeeded=sdoc["trialsSucceeded"],
            trials_failed=sdoc["trialsFailed"],
            total_spawned=sdoc["totalSpawned"],
            current_optimal=None
            if optimal is None
            else OptimalResult(
                assignments=_assignments_from_doc(optimal["assignments"]),
                objective_value=optimal["objectiveValue"],
            ),
        )
    elif kind == KIND_SUGGESTION:
        sp = doc["spec"]
        spec = SuggestionSpec(
            experiment=sp["experiment"],
            algorithm=AlgorithmSpec(
                algorithm_name=sp["algorithm"]["algorithmName"],
                settings=dict(sp["algorithm"]["settings"]),
            ),
            requested=sp["requested"],
        )
        st = doc["status"]
        status = SuggestionStatus(
            produced=[
                ProducedSuggestion(
                    assignments=_assignments_from_doc(p["assignments"]),
                    consumed=p["consumed"],
                )
                for p in st["produced"]
            ],
            exhausted=st["exhausted"],
        )
    elif kind == KIND_TRIAL:
        sp = doc["spec"]
        spec = TrialSpec(
            experiment=sp["experiment"],
            assignments=_assignments_from_doc(sp["assignments"]),
            run_spec=_run_spec_from_doc(sp.get("runSpec")),
        )
        st = doc["status"]
        status = TrialStatus(
            phase=TrialPhase(st["phase"]),
            restart_count=st["restartCount"],
            observation=st["observation"],
            reason=st["reason"],
            job_attempt=st["jobAttempt"],
        )
    else:
        raise ValueError(f"unknown resource kind '{kind}'")
    return Resource(
        kind=kind, namespace=namespace, name=name, spec=spec, status=status, generation=generation
    )
