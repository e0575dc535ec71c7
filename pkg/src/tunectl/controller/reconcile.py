"""The three controllers as idempotent reconciliation loops.

Each reconciler observes current resource state and issues compare-and-swap
mutations moving it toward the desired state; applying a reconciler twice to
the same state is a no-op the second time. A controller step runs every
reconciler over every resource (round-robin in key order) until the store is
quiescent, and the outer loop advances backend time between steps.

Budget semantics: an experiment spawns at most ``maxTrialCount`` trials and
keeps at most ``parallelTrialCount`` in flight; it succeeds when the goal is
met, when ``maxTrialCount`` trials succeed, or when the spawn budget (or the
search space) is spent and everything in flight has concluded. It fails once
failed trials strictly exceed ``maxFailedTrialCount``, so an error budget of
N tolerates exactly N failures.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

from ..errors import (
    CasConflictError,
    ExhaustedSearchSpace,
    InvalidPayloadError,
    TunectlError,
    UnknownNamespaceError,
)
from ..metrics import ObservationStore, best_objective
from ..resources import (
    BUDGET_PARAMETER,
    ExperimentSpec,
    ObjectiveType,
    RestartPolicy,
    render_trial_spec,
)
from ..suggest import SuggestionRequest, get_suggestions
from ..suggest.registry import AssignmentSet, ObservationStatus, TrialObservation, get_algorithm
from .backend import ExecutionBackend, JobPhase
from .model import (
    KIND_EXPERIMENT,
    KIND_SUGGESTION,
    KIND_TRIAL,
    TERMINAL_EXPERIMENT,
    TERMINAL_TRIAL,
    ExperimentPhase,
    ExperimentStatus,
    OptimalResult,
    ProducedSuggestion,
    Resource,
    SuggestionSpec,
    SuggestionStatus,
    TrialPhase,
    TrialSpec,
    TrialStatus,
    resource_key,
)
from .store import ResourceStore

logger = logging.getLogger(__name__)

SERVICE_CPU = 0.5
CONTROLLER_STEP_PASS_CAP = 12
REASON_METRICS_UNAVAILABLE = "metrics-unavailable"


@dataclass
class ControllerContext:
    store: ResourceStore
    metrics: ObservationStore
    backend: ExecutionBackend
    on_mutation: Callable[[], None] | None = None

    def mutated(self) -> None:
        if self.on_mutation is not None:
            self.on_mutation()


def job_handle(namespace: str, trial_name: str) -> str:
    return f"{namespace}/{trial_name}"


def trial_name_for(experiment: str, index: int) -> str:
    return f"{experiment}-{index:04d}"


def service_name_for(experiment: str) -> str:
    return f"svc-{experiment}"


def submit_experiment(store: ResourceStore, spec: ExperimentSpec) -> Resource:
    """Persist a freshly validated experiment in the Created phase."""
    return store.create(
        Resource(
            kind=KIND_EXPERIMENT,
            namespace=spec.namespace,
            name=spec.name,
            spec=spec,
            status=ExperimentStatus(),
        )
    )


def _experiment_trials(ctx: ControllerContext, experiment: Resource) -> list[Resource]:
    return [
        t
        for t in ctx.store.list(KIND_TRIAL, experiment.namespace)
        if t.spec.experiment == experiment.name
    ]


def _budget_of(assignments: AssignmentSet) -> float | None:
    for name, value in assignments:
        if name == BUDGET_PARAMETER:
            return float(value)
    return None


def build_history(trials: list[Resource]) -> tuple[TrialObservation, ...]:
    """Observations for the suggestion engine: concluded trials only."""
    observations = []
    for trial in sorted(trials, key=lambda t: t.name):
        if trial.status.phase is TrialPhase.SUCCEEDED:
            observations.append(
                TrialObservation(
                    assignments=trial.spec.assignments,
                    status=ObservationStatus.SUCCEEDED,
                    objective_value=trial.status.observation,
                    resource_consumed=_budget_of(trial.spec.assignments),
                )
            )
        elif trial.status.phase is TrialPhase.FAILED:
            observations.append(
                TrialObservation(
                    assignments=trial.spec.assignments,
                    status=ObservationStatus.FAILED,
                    resource_consumed=_budget_of(trial.spec.assignments),
                )
            )
    return tuple(observations)


def _goal_met(spec: ExperimentSpec, optimal: OptimalResult | None) -> bool:
    goal = spec.objective.goal
    if goal is None or optimal is None:
        return False
    if spec.objective.type is ObjectiveType.MAXIMIZE:
        return optimal.objective_value >= goal
    return optimal.objective_value <= goal


def _current_optimal(spec: ExperimentSpec, trials: list[Resource]) -> OptimalResult | None:
    best: OptimalResult | None = None
    maximize = spec.objective.type is ObjectiveType.MAXIMIZE
    for trial in sorted(trials, key=lambda t: t.name):
        if trial.status.phase is not TrialPhase.SUCCEEDED or trial.status.observation is None:
            continue
        value = trial.status.observation
        if best is None or (value > best.objective_value if maximize else value < best.objective_value):
            best = OptimalResult(assignments=trial.spec.assignments, objective_value=value)
    return best


def reconcile_experiment(ctx: ControllerContext, key: str) -> int:
    experiment = ctx.store.get(key)
    if experiment is None:
        return 0
    spec: ExperimentSpec = experiment.spec
    if experiment.status.phase in TERMINAL_EXPERIMENT:
        ctx.backend.release_service(spec.namespace, service_name_for(spec.name))
        return 0

    mutations = 0
    trials = _experiment_trials(ctx, experiment)
    pending = sum(1 for t in trials if t.status.phase in (TrialPhase.CREATED, TrialPhase.PENDING))
    running = sum(1 for t in trials if t.status.phase is TrialPhase.RUNNING)
    succeeded = sum(1 for t in trials if t.status.phase is TrialPhase.SUCCEEDED)
    failed = sum(1 for t in trials if t.status.phase is TrialPhase.FAILED)
    spawned = len(trials)
    active = pending + running

    # Ensure the suggestion resource exists and has enough requested
    # suggestions to keep the parallel slots full within the trial budget.
    suggestion_key = resource_key(KIND_SUGGESTION, spec.namespace, spec.name)
    suggestion = ctx.store.get(suggestion_key)
    target = spawned + max(
        0, min(spec.parallel_trial_count - active, spec.max_trial_count - spawned)
    )
    if suggestion is None:
        suggestion = ctx.store.create(
            Resource(
                kind=KIND_SUGGESTION,
                namespace=spec.namespace,
                name=spec.name,
                spec=SuggestionSpec(experiment=spec.name, algorithm=spec.algorithm, requested=target),
                status=SuggestionStatus(),
            )
        )
        ctx.mutated()
        mutations += 1
    elif target > suggestion.spec.requested:
        suggestion.spec.requested = target
        suggestion = ctx.store.update(suggestion)
        ctx.mutated()
        mutations += 1

    # Spawn one trial per unconsumed suggestion while budget remains. The
    # trial index equals the produced index, so creation is idempotent and a
    # crash between create and the consumed flag cannot double-spawn.
    consumed_dirty = False
    for index, produced in enumerate(suggestion.status.produced):
        if produced.consumed:
            continue
        if active >= spec.parallel_trial_count or spawned >= spec.max_trial_count:
            break
        name = trial_name_for(spec.name, index)
        trial_key = resource_key(KIND_TRIAL, spec.namespace, name)
        if ctx.store.get(trial_key) is None:
            ctx.store.create(
                Resource(
                    kind=KIND_TRIAL,
                    namespace=spec.namespace,
                    name=name,
                    spec=TrialSpec(experiment=spec.name, assignments=produced.assignments),
                    status=TrialStatus(),
                )
            )
            ctx.mutated()
            mutations += 1
        produced.consumed = True
        consumed_dirty = True
        spawned += 1
        active += 1
        pending += 1
    if consumed_dirty:
        suggestion = ctx.store.update(suggestion)
        ctx.mutated()
        mutations += 1

    optimal = _current_optimal(spec, trials)
    all_consumed = all(p.consumed for p in suggestion.status.produced)
    search_spent = suggestion.status.exhausted and all_consumed
    budget_spent = (spawned >= spec.max_trial_count or search_spent) and active == 0

    phase = ExperimentPhase.RUNNING
    if _goal_met(spec, optimal):
        phase = ExperimentPhase.SUCCEEDED
    elif failed > spec.max_failed_trial_count:
        phase = ExperimentPhase.FAILED
    elif succeeded >= spec.max_trial_count or budget_spent:
        phase = ExperimentPhase.SUCCEEDED

    new_status = ExperimentStatus(
        phase=phase,
        trials_pending=pending,
        trials_running=running,
        trials_succeeded=succeeded,
        trials_failed=failed,
        total_spawned=spawned,
        current_optimal=optimal,
    )
    if new_status != experiment.status:
        experiment.status = new_status
        ctx.store.update(experiment)
        ctx.mutated()
        mutations += 1
    if phase in TERMINAL_EXPERIMENT:
        ctx.backend.release_service(spec.namespace, service_name_for(spec.name))
    return mutations


def reconcile_suggestion(ctx: ControllerContext, key: str) -> int:
    suggestion = ctx.store.get(key)
    if suggestion is None:
        return 0
    experiment = ctx.store.get(
        resource_key(KIND_EXPERIMENT, suggestion.namespace, suggestion.spec.experiment)
    )
    if experiment is None or experiment.status.phase in TERMINAL_EXPERIMENT:
        return 0

    # The per-experiment algorithm service: deployed on first reconcile and
    # holding a fixed CPU reservation against the namespace quota. A
    # misconfigured namespace surfaces through the trials, which fail to
    # submit; suggestions still fill so the failure is visible quickly.
    try:
        ctx.backend.reserve_service(
            suggestion.namespace, service_name_for(suggestion.spec.experiment), SERVICE_CPU
        )
    except UnknownNamespaceError as exc:
        logger.warning("suggestion %s: service reservation failed: %s", key, exc)

    if suggestion.status.exhausted:
        return 0
    produced = suggestion.status.produced
    need = suggestion.spec.requested - len(produced)
    if need <= 0:
        return 0

    spec: ExperimentSpec = experiment.spec
    plugin = get_algorithm(spec.algorithm.algorithm_name)
    state = plugin.restore_state(spec, tuple(p.assignments for p in produced))
    history = build_history(_experiment_trials(ctx, experiment))
    request = SuggestionRequest(experiment=spec, history=history, count=need, state=state)
    try:
        result = get_suggestions(request)
    except ExhaustedSearchSpace:
        suggestion.status.exhausted = True
        ctx.store.update(suggestion)
        ctx.mutated()
        return 1
    except TunectlError as exc:
        logger.warning("suggestion %s: algorithm error, will retry: %s", key, exc)
        return 0

    if not result.assignment_sets and not result.exhausted:
        return 0  # algorithm is waiting on in-flight observations
    for assignments in result.assignment_sets:
        produced.append(ProducedSuggestion(assignments=assignments))
    suggestion.status.exhausted = suggestion.status.exhausted or result.exhausted
    ctx.store.update(suggestion)
    ctx.mutated()
    return 1


def _conclude(trial: Resource, phase: TrialPhase, reason: str | None = None) -> None:
    trial.status.phase = phase
    trial.status.reason = reason


def reconcile_trial(ctx: ControllerContext, key: str) -> int:
    trial = ctx.store.get(key)
    if trial is None or trial.status.phase in TERMINAL_TRIAL:
        return 0
    experiment = ctx.store.get(
        resource_key(KIND_EXPERIMENT, trial.namespace, trial.spec.experiment)
    )
    if experiment is None:
        return 0
    spec: ExperimentSpec = experiment.spec
    template = spec.trial_template
    handle = job_handle(trial.namespace, trial.name)
    watched = [spec.objective.objective_metric_name, *spec.objective.additional_metric_names]
    before = (trial.status.phase, trial.status.restart_count, trial.status.job_attempt)

    if trial.spec.run_spec is None:
        trial.spec.run_spec = render_trial_spec(
            template, trial.spec.assignments, trial.name, trial.namespace
        )

    def submit(restart_count: int) -> bool:
        try:
            ctx.backend.submit(
                trial.spec.run_spec,
                template,
                collector_kind=spec.metric_collector_kind,
                watched_metrics=watched,
                restart_count=restart_count,
            )
        except (UnknownNamespaceError, InvalidPayloadError) as exc:
            _conclude(trial, TrialPhase.FAILED, reason=str(exc))
            return False
        except TunectlError as exc:
            logger.warning("trial %s: submit failed, staying pending: %s", key, exc)
            trial.status.phase = TrialPhase.PENDING
            return False
        trial.status.job_attempt += 1
        trial.status.phase = TrialPhase.PENDING
        return True

    if trial.status.job_attempt == 0:
        submit(trial.status.restart_count)
    else:
        state = ctx.backend.job_state(handle)
        if state.phase is JobPhase.MISSING:
            submit(trial.status.restart_count)  # backend lost the job: redeploy
        elif state.phase is JobPhase.PENDING:
            trial.status.phase = TrialPhase.PENDING
        elif state.phase is JobPhase.RUNNING:
            trial.status.phase = TrialPhase.RUNNING
        elif state.phase is JobPhase.SUCCEEDED:
            ctx.backend.collect_metrics(handle)
            observation = best_objective(
                ctx.metrics.get_observation_log(handle), spec.objective
            )
            if observation is None:
                _conclude(trial, TrialPhase.FAILED, reason=REASON_METRICS_UNAVAILABLE)
            else:
                trial.status.observation = observation
                _conclude(trial, TrialPhase.SUCCEEDED)
        elif state.phase is JobPhase.FAILED_TEMPORARY:
            if template.restart_policy is RestartPolicy.ON_TEMPORARY_FAILURE:
                # Counted only once the redeploy is accepted, so a transient
                # submit error cannot inflate the restart count.
                if submit(trial.status.restart_count + 1):
                    trial.status.restart_count += 1
            else:
                _conclude(trial, TrialPhase.FAILED, reason=state.reason)
        elif state.phase is JobPhase.FAILED_PERMANENT:
            _conclude(trial, TrialPhase.FAILED, reason=state.reason)

    after = (trial.status.phase, trial.status.restart_count, trial.status.job_attempt)
    original = ctx.store.get(key)
    if after == before and trial.spec.run_spec == original.spec.run_spec:
        return 0
    ctx.store.update(trial)
    ctx.mutated()
    return 1


_RECONCILERS = {
    KIND_EXPERIMENT: reconcile_experiment,
    KIND_SUGGESTION: reconcile_suggestion,
    KIND_TRIAL: reconcile_trial,
}


def controller_step(ctx: ControllerContext) -> int:
    """One scheduler step: reconcile everything until quiescent.

    Resources are visited round-robin in key order (experiments, then
    suggestions, then trials by key), repeating while mutations occur so a
    fresh suggestion flows into spawned, submitted trials within one step.
    """
    total = 0
    for _ in range(CONTROLLER_STEP_PASS_CAP):
        mutations = 0
        for kind in (KIND_EXPERIMENT, KIND_SUGGESTION, KIND_TRIAL):
            reconciler = _RECONCILERS[kind]
            for key in ctx.store.keys(kind):
                try:
                    mutations += reconciler(ctx, key)
                except CasConflictError:
                    logger.debug("CAS conflict on %s; retrying next pass", key)
                except TunectlError as exc:
                    logger.warning("reconcile %s failed (will retry): %s", key, exc)
        total += mutations
        if mutations == 0:
            break
    return total


def all_experiments_terminal(store: ResourceStore) -> bool:
    experiments = store.list(KIND_EXPERIMENT)
    return bool(experiments) and all(
        e.status.phase in TERMINAL_EXPERIMENT for e in experiments
    )


def terminal_snapshot(store: ResourceStore, ticks: int) -> dict:
    experiments = {}
    for e in store.list(KIND_EXPERIMENT):
        optimal = e.status.current_optimal
        experiments[e.key] = {
            "phase": e.status.phase.value,
            "trialsPending": e.status.trials_pending,
            "trialsRunning": e.status.trials_running,
            "trialsSucceeded": e.status.trials_succeeded,
            "trialsFailed": e.status.trials_failed,
            "totalSpawned": e.status.total_spawned,
            "currentOptimal": None
            if optimal is None
            else {
                "assignments": [[n, v] for n, v in optimal.assignments],
                "objectiveValue": optimal.objective_value,
            },
        }
    return {"ticks": ticks, "experiments": experiments}


def run_control_loop(
    store: ResourceStore,
    metrics: ObservationStore,
    backend: ExecutionBackend,
    *,
    stop: Callable[[int], bool] | None = None,
    max_ticks: int = 1_000_000,
    on_mutation: Callable[[], None] | None = None,
) -> dict:
    """Drive every experiment in the store to a terminal phase.

    Starvation-free (round-robin within each step) and crash-recoverable:
    restarting against the same persisted store and backend state continues
    to the same terminal phases. Returns the terminal snapshot.
    """
    ctx = ControllerContext(store=store, metrics=metrics, backend=backend, on_mutation=on_mutation)
    controller_step(ctx)  # bootstrap: create suggestions/trials before time moves
    ticks = 0
    while not all_experiments_terminal(store):
        if ticks >= max_ticks:
            logger.warning("control loop stopped at max_ticks=%d before termination", max_ticks)
            break
        backend.advance(lambda: controller_step(ctx))
        ticks += 1
        for e in store.list(KIND_EXPERIMENT):
            backend.emit_event(
                "experiment-stats",
                {
                    "experiment": e.name,
                    "namespace": e.namespace,
                    "phase": e.status.phase.value,
                    "running": e.status.trials_running,
                    "pending": e.status.trials_pending,
                    "succeeded": e.status.trials_succeeded,
                    "failed": e.status.trials_failed,
                    "spawned": e.status.total_spawned,
                },
            )
        if stop is not None and stop(ticks):
            break
    return terminal_snapshot(store, ticks)
