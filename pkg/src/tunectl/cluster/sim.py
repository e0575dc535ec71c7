"""Deterministic discrete-tick cluster simulator.

One tick is one simulated minute. Within a tick the order is fixed: chaos
injection, job progress, scheduling, autoscaling, then one controller step.
All randomness (chaos victim draws, metric noise) is derived statelessly
from (seed, purpose, tick, name), so world evolution is a pure function of
the initial state and seed, and a crash-restore replays identically.

The scheduler is first-fit-decreasing by cpu request with a stable tie-break
on (trial name, worker index); in gang mode all workers of a trial place
atomically or not at all. Namespace quotas are enforced at scheduling time.
Nodes are never scaled down while they hold running work.
"""

from __future__ import annotations

import json
import math
import os
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from ..errors import InvalidPayloadError, UnknownNamespaceError
from ..metrics import MetricPoint, ObservationStore, parse_metric_lines
from ..resources import (
    CollectorKind,
    SimObjectiveDescriptor,
    TrialRunSpec,
    TrialTemplate,
    value_to_string,
)
from ..controller.backend import ExecutionBackend, JobPhase, JobState
from .objectives import eval_sim_objective

CHAOS_SALT = 0xC7A05
METRIC_SALT = 0x3E791C


class SimulatedCrash(Exception):
    """Raised by a crash hook to kill the control loop mid-tick (tests)."""


class ChaosMode:
    FAIL_TRIAL = "fail-trial"
    KILL_WORKER = "kill-worker"


@dataclass
class ChaosPolicy:
    mode: str
    fraction: float
    interval_ticks: int
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError("chaos fraction must lie in [0, 1]")
        if self.interval_ticks < 1:
            raise ValueError("chaos intervalTicks must be >= 1")
        if self.mode not in (ChaosMode.FAIL_TRIAL, ChaosMode.KILL_WORKER):
            raise ValueError(f"unknown chaos mode '{self.mode}'")


@dataclass
class AutoscalerConfig:
    min_nodes: int
    max_nodes: int
    node_capacity_cpu: float
    scale_down_grace_ticks: int = 10

    def __post_init__(self) -> None:
        if not 1 <= self.min_nodes <= self.max_nodes:
            raise ValueError("require 1 <= minNodes <= maxNodes")


@dataclass
class SimNode:
    id: str
    capacity_cpu: float
    allocated_cpu: float = 0.0
    idle_since: int | None = None


@dataclass
class SimNamespace:
    name: str
    cpu_limit: float = math.inf
    cpu_used: float = 0.0


@dataclass
class SimUnit:
    job: str
    index: int
    cpu: float
    remaining: int | None  # None: service unit, runs until released
    node: str | None = None


@dataclass
class SimJob:
    name: str  # handle: "<namespace>/<trial>"
    namespace: str
    kind: str  # "trial" | "service"
    worker_count: int
    cpu_per_worker: float
    duration: int
    descriptor: SimObjectiveDescriptor | None = None
    assignments: tuple[tuple[str, Any], ...] = ()
    collector: CollectorKind = CollectorKind.PULL
    watched: tuple[str, ...] = ()
    phase: JobPhase = JobPhase.PENDING
    reason: str | None = None
    completed: int = 0  # checkpoint: ticks finished by the slowest worker
    attempt: int = 1
    units: list[SimUnit] = field(default_factory=list)
    log: list[str] = field(default_factory=list)


def _name_entropy(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def _derived_rng(*entropy: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(entropy))))


class SimWorld:
    def __init__(
        self,
        seed: int = 0,
        gang: bool = True,
        autoscaler: AutoscalerConfig | None = None,
        chaos: ChaosPolicy | None = None,
    ):
        self.seed = seed
        self.gang = gang
        self.autoscaler = autoscaler
        self.chaos = chaos
        self.tick = 0
        self.node_seq = 0
        self.nodes: dict[str, SimNode] = {}
        self.namespaces: dict[str, SimNamespace] = {}
        self.jobs: dict[str, SimJob] = {}
        self.events: list[dict] = []
        self.metrics: ObservationStore | None = None
        self._event_writer: Callable[[dict], None] | None = None

    # -- world construction -------------------------------------------------

    def add_node(self, capacity_cpu: float) -> SimNode:
        node = SimNode(id=f"node-{self.node_seq:04d}", capacity_cpu=float(capacity_cpu))
        self.node_seq += 1
        self.nodes[node.id] = node
        return node

    def add_namespace(self, name: str, cpu_limit: float | None = None) -> SimNamespace:
        ns = SimNamespace(name=name, cpu_limit=math.inf if cpu_limit is None else float(cpu_limit))
        self.namespaces[name] = ns
        return ns

    # -- events --------------------------------------------------------------

    def emit(self, kind: str, payload: dict) -> None:
        event = {"tick": self.tick, "kind": kind, "payload": payload}
        self.events.append(event)
        if self._event_writer is not None:
            self._event_writer(event)

    # -- job lifecycle -------------------------------------------------------

    def submit_job(
        self,
        run_spec: TrialRunSpec,
        resources: TrialTemplate,
        *,
        collector_kind: CollectorKind,
        watched_metrics: tuple[str, ...],
    ) -> str:
        handle = f"{run_spec.namespace}/{run_spec.trial_name}"
        if run_spec.namespace not in self.namespaces:
            raise UnknownNamespaceError(f"namespace '{run_spec.namespace}' does not exist")
        existing = self.jobs.get(handle)
        if existing is not None:
            if existing.phase in (JobPhase.PENDING, JobPhase.RUNNING):
                return handle  # idempotent resubmission of a live job
            if existing.phase is JobPhase.FAILED_TEMPORARY:
                # Redeploy, resuming from the recorded checkpoint.
                remaining = existing.duration - existing.completed
                existing.attempt += 1
                existing.phase = JobPhase.PENDING
                existing.reason = None
                existing.units = [
                    SimUnit(job=handle, index=i, cpu=existing.cpu_per_worker, remaining=remaining)
                    for i in range(existing.worker_count)
                ]
                self.emit("job-resumed", {"job": handle, "attempt": existing.attempt,
                                          "checkpoint": existing.completed})
                return handle
            return handle  # concluded jobs are not restarted
        payload = run_spec.resolved_payload
        if not isinstance(payload, SimObjectiveDescriptor):
            raise InvalidPayloadError("the simulator runs 'simulated' trial templates only")
        job = SimJob(
            name=handle,
            namespace=run_spec.namespace,
            kind="trial",
            worker_count=resources.worker_count,
            cpu_per_worker=resources.cpu_per_worker,
            duration=payload.duration_ticks,
            descriptor=payload,
            assignments=tuple((n, v) for n, v in run_spec.parameter_assignments),
            collector=collector_kind,
            watched=tuple(watched_metrics),
        )
        job.units = [
            SimUnit(job=handle, index=i, cpu=job.cpu_per_worker, remaining=job.duration)
            for i in range(job.worker_count)
        ]
        self.jobs[handle] = job
        self.emit("job-submitted", {"job": handle, "workers": job.worker_count})
        return handle

    def reserve_service(self, namespace: str, name: str, cpu: float) -> str:
        handle = f"{namespace}/{name}"
        if handle in self.jobs:
            return handle
        if namespace not in self.namespaces:
            raise UnknownNamespaceError(f"namespace '{namespace}' does not exist")
        job = SimJob(
            name=handle,
            namespace=namespace,
            kind="service",
            worker_count=1,
            cpu_per_worker=cpu,
            duration=0,
        )
        job.units = [SimUnit(job=handle, index=0, cpu=cpu, remaining=None)]
        self.jobs[handle] = job
        self.emit("service-reserved", {"service": handle, "cpu": cpu})
        return handle

    def release_service(self, namespace: str, name: str) -> None:
        handle = f"{namespace}/{name}"
        job = self.jobs.get(handle)
        if job is None:
            return
        for unit in job.units:
            self._unplace(unit)
        del self.jobs[handle]
        self.emit("service-released", {"service": handle})

    def job_state(self, handle: str) -> JobState:
        job = self.jobs.get(handle)
        if job is None:
            return JobState(phase=JobPhase.MISSING)
        return JobState(phase=job.phase, reason=job.reason)

    # -- placement bookkeeping ------------------------------------------------

    def _place(self, unit: SimUnit, node: SimNode) -> None:
        node.allocated_cpu += unit.cpu
        node.idle_since = None
        self.namespaces[self.jobs[unit.job].namespace].cpu_used += unit.cpu
        unit.node = node.id

    def _unplace(self, unit: SimUnit) -> None:
        if unit.node is None:
            return
        node = self.nodes.get(unit.node)
        if node is not None:
            node.allocated_cpu = max(0.0, node.allocated_cpu - unit.cpu)
        ns = self.namespaces[self.jobs[unit.job].namespace]
        ns.cpu_used = max(0.0, ns.cpu_used - unit.cpu)
        unit.node = None

    # -- tick phases -----------------------------------------------------------

    def _running_trials(self) -> list[SimJob]:
        return [
            self.jobs[name]
            for name in sorted(self.jobs)
            if self.jobs[name].kind == "trial" and self.jobs[name].phase is JobPhase.RUNNING
        ]

    def chaos_tick(self) -> None:
        policy = self.chaos
        if policy is None or policy.fraction <= 0.0:
            return
        if self.tick == 0 or self.tick % policy.interval_ticks != 0:
            return
        running = self._running_trials()
        count = min(math.ceil(policy.fraction * len(running)), len(running))
        if count == 0:
            return
        rng = _derived_rng(self.seed, policy.seed, CHAOS_SALT, self.tick)
        picks = sorted(rng.choice(len(running), size=count, replace=False).tolist())
        for i in picks:
            job = running[i]
            for unit in job.units:
                self._unplace(unit)
            if policy.mode == ChaosMode.FAIL_TRIAL:
                job.phase = JobPhase.FAILED_PERMANENT
                job.reason = "chaos: trial payload invalidated"
                self.emit("chaos-fail", {"job": job.name})
            else:
                job.phase = JobPhase.FAILED_TEMPORARY
                job.reason = "chaos: worker killed"
                self.emit("chaos-kill", {"job": job.name, "checkpoint": job.completed})

    def _emit_metric(self, job: SimJob, progress: float) -> None:
        if job.descriptor is None or not job.watched:
            return
        rng = _derived_rng(
            self.seed, _name_entropy(job.name), job.descriptor.rng_seed_offset, METRIC_SALT, self.tick
        )
        value = eval_sim_objective(job.descriptor, job.assignments, progress, rng)
        metric = job.watched[0]
        if job.collector is CollectorKind.PUSH:
            assert self.metrics is not None
            self.metrics.register_observation_log(
                [MetricPoint(trial=job.name, metric=metric, ts=self.tick, value=value)]
            )
        else:
            job.log.append(f"{self.tick} {metric}={value_to_string(value)}")

    def progress_tick(self) -> None:
        for name in sorted(self.jobs):
            job = self.jobs[name]
            if job.kind != "trial" or job.phase is not JobPhase.RUNNING:
                continue
            placed = [u for u in job.units if u.node is not None and u.remaining]
            if not placed:
                continue
            for unit in placed:
                unit.remaining -= 1
            job.completed = job.duration - max(u.remaining or 0 for u in job.units)
            chief = job.units[0]
            if chief.node is not None:
                progress = (job.duration - (chief.remaining or 0)) / job.duration
                self._emit_metric(job, progress)
            for unit in placed:
                if unit.remaining == 0:
                    self._unplace(unit)
            if all((u.remaining or 0) == 0 for u in job.units):
                job.phase = JobPhase.SUCCEEDED
                self.emit("job-succeeded", {"job": job.name})

    def _pending_units(self) -> list[SimUnit]:
        units = []
        for name in sorted(self.jobs):
            job = self.jobs[name]
            if job.phase not in (JobPhase.PENDING, JobPhase.RUNNING):
                continue
            for unit in job.units:
                if unit.node is None and (unit.remaining is None or unit.remaining > 0):
                    units.append(unit)
        return units

    def _fits(self, node: SimNode, ns: SimNamespace, cpu: float) -> bool:
        return (
            node.allocated_cpu + cpu <= node.capacity_cpu + 1e-9
            and ns.cpu_used + cpu <= ns.cpu_limit + 1e-9
        )

    def _first_fit(self, ns: SimNamespace, cpu: float) -> SimNode | None:
        for node_id in sorted(self.nodes):
            node = self.nodes[node_id]
            if self._fits(node, ns, cpu):
                return node
        return None

    def schedule_tick(self) -> int:
        pending = self._pending_units()
        # Service units (deployed per-experiment infrastructure) take their
        # reservation before any trial competes for the same quota.
        pending.sort(
            key=lambda u: (self.jobs[u.job].kind != "service", -u.cpu, u.job, u.index)
        )
        placed_count = 0
        handled_jobs: set[str] = set()
        for unit in pending:
            job = self.jobs[unit.job]
            if self.gang and job.kind == "trial":
                if job.name in handled_jobs:
                    continue
                handled_jobs.add(job.name)
                group = [
                    u
                    for u in job.units
                    if u.node is None and (u.remaining is None or u.remaining > 0)
                ]
                staged: list[tuple[SimUnit, SimNode]] = []
                ns = self.namespaces[job.namespace]
                ok = True
                for member in sorted(group, key=lambda u: u.index):
                    node = self._first_fit(ns, member.cpu)
                    if node is None:
                        ok = False
                        break
                    self._place(member, node)
                    staged.append((member, node))
                if not ok:
                    for member, _ in staged:
                        self._unplace(member)
                    continue
                placed_count += len(staged)
                for member, node in staged:
                    self.emit("placed", {"job": job.name, "worker": member.index, "node": node.id})
            else:
                if unit.node is not None:
                    continue
                ns = self.namespaces[job.namespace]
                node = self._first_fit(ns, unit.cpu)
                if node is None:
                    continue
                self._place(unit, node)
                placed_count += 1
                self.emit("placed", {"job": job.name, "worker": unit.index, "node": node.id})
            if job.phase is JobPhase.PENDING and any(u.node is not None for u in job.units):
                job.phase = JobPhase.RUNNING
        return placed_count

    def autoscale_tick(self) -> None:
        cfg = self.autoscaler
        if cfg is None:
            return
        pending_cpu = sum(u.cpu for u in self._pending_units())
        if pending_cpu > 0 and len(self.nodes) < cfg.max_nodes:
            add = min(
                math.ceil(pending_cpu / cfg.node_capacity_cpu),
                cfg.max_nodes - len(self.nodes),
            )
            for _ in range(add):
                node = self.add_node(cfg.node_capacity_cpu)
                self.emit("node-added", {"node": node.id})
        for node in self.nodes.values():
            if node.allocated_cpu <= 0.0:
                if node.idle_since is None:
                    node.idle_since = self.tick
            else:
                node.idle_since = None
        removable = [
            n
            for n in self.nodes.values()
            if n.allocated_cpu <= 0.0
            and n.idle_since is not None
            and self.tick - n.idle_since >= cfg.scale_down_grace_ticks
        ]
        # Newest nodes drain first; never drop below the floor.
        removable.sort(key=lambda n: n.id, reverse=True)
        for node in removable:
            if len(self.nodes) <= cfg.min_nodes:
                break
            del self.nodes[node.id]
            self.emit("node-removed", {"node": node.id})

    def _tick_stats(self) -> None:
        namespaces = {}
        for name in sorted(self.namespaces):
            ns = self.namespaces[name]
            running = sum(
                1
                for job in self.jobs.values()
                if job.kind == "trial" and job.namespace == name and job.phase is JobPhase.RUNNING
            )
            namespaces[name] = {"cpuUsed": ns.cpu_used, "runningTrials": running}
        self.emit(
            "tick-stats",
            {
                "nodes": len(self.nodes),
                "pendingCpu": sum(u.cpu for u in self._pending_units()),
                "namespaces": namespaces,
            },
        )

    def advance_tick(
        self,
        controller_step: Callable[[], int] | None = None,
        crash_hook: Callable[[int, str], None] | None = None,
    ) -> None:
        """One tick: chaos, progress, scheduler, autoscaler, controller."""

        def hook(phase: str) -> None:
            if crash_hook is not None:
                crash_hook(self.tick, phase)

        self.tick += 1
        hook("chaos")
        self.chaos_tick()
        hook("progress")
        self.progress_tick()
        hook("schedule")
        self.schedule_tick()
        hook("autoscale")
        self.autoscale_tick()
        hook("controller")
        if controller_step is not None:
            controller_step()
        self._tick_stats()
        hook("persist")

    # -- serialization -----------------------------------------------------------

    def to_doc(self) -> dict:
        def descriptor_doc(d: SimObjectiveDescriptor | None) -> dict | None:
            if d is None:
                return None
            return {
                "functionName": d.function_name,
                "durationTicks": d.duration_ticks,
                "noiseStdDev": d.noise_std_dev,
                "rngSeedOffset": d.rng_seed_offset,
            }

        return {
            "tick": self.tick,
            "seed": self.seed,
            "gang": self.gang,
            "nodeSeq": self.node_seq,
            "autoscaler": None
            if self.autoscaler is None
            else {
                "minNodes": self.autoscaler.min_nodes,
                "maxNodes": self.autoscaler.max_nodes,
                "nodeCapacityCpu": self.autoscaler.node_capacity_cpu,
                "scaleDownGraceTicks": self.autoscaler.scale_down_grace_ticks,
            },
            "chaos": None
            if self.chaos is None
            else {
                "mode": self.chaos.mode,
                "fraction": self.chaos.fraction,
                "intervalTicks": self.chaos.interval_ticks,
                "seed": self.chaos.seed,
            },
            "nodes": [
                {
                    "id": n.id,
                    "capacityCpu": n.capacity_cpu,
                    "idleSince": n.idle_since,
                }
                for _, n in sorted(self.nodes.items())
            ],
            "namespaces": [
                {"name": ns.name, "cpuLimit": None if math.isinf(ns.cpu_limit) else ns.cpu_limit}
                for _, ns in sorted(self.namespaces.items())
            ],
            "jobs": [
                {
                    "name": j.name,
                    "namespace": j.namespace,
                    "kind": j.kind,
                    "workerCount": j.worker_count,
                    "cpuPerWorker": j.cpu_per_worker,
                    "duration": j.duration,
                    "descriptor": descriptor_doc(j.descriptor),
                    "assignments": [[n, v] for n, v in j.assignments],
                    "collector": j.collector.value,
                    "watched": list(j.watched),
                    "phase": j.phase.value,
                    "reason": j.reason,
                    "completed": j.completed,
                    "attempt": j.attempt,
                    "units": [
                        {"index": u.index, "cpu": u.cpu, "remaining": u.remaining, "node": u.node}
                        for u in j.units
                    ],
                    "log": list(j.log),
                }
                for _, j in sorted(self.jobs.items())
            ],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "SimWorld":
        autoscaler = None
        if doc.get("autoscaler"):
            a = doc["autoscaler"]
            autoscaler = AutoscalerConfig(
                min_nodes=a["minNodes"],
                max_nodes=a["maxNodes"],
                node_capacity_cpu=a["nodeCapacityCpu"],
                scale_down_grace_ticks=a["scaleDownGraceTicks"],
            )
        chaos = None
        if doc.get("chaos"):
            c = doc["chaos"]
            chaos = ChaosPolicy(
                mode=c["mode"], fraction=c["fraction"], interval_ticks=c["intervalTicks"], seed=c["seed"]
            )
        world = cls(seed=doc["seed"], gang=doc["gang"], autoscaler=autoscaler, chaos=chaos)
        world.tick = doc["tick"]
        world.node_seq = doc["nodeSeq"]
        for n in doc["nodes"]:
            node = SimNode(id=n["id"], capacity_cpu=n["capacityCpu"], idle_since=n["idleSince"])
            world.nodes[node.id] = node
        for ns in doc["namespaces"]:
            world.add_namespace(ns["name"], ns["cpuLimit"])
        for j in doc["jobs"]:
            descriptor = None
            if j["descriptor"]:
                d = j["descriptor"]
                descriptor = SimObjectiveDescriptor(
                    function_name=d["functionName"],
                    duration_ticks=d["durationTicks"],
                    noise_std_dev=d["noiseStdDev"],
                    rng_seed_offset=d["rngSeedOffset"],
                )
            job = SimJob(
                name=j["name"],
                namespace=j["namespace"],
                kind=j["kind"],
                worker_count=j["workerCount"],
                cpu_per_worker=j["cpuPerWorker"],
                duration=j["duration"],
                descriptor=descriptor,
                assignments=tuple((a[0], a[1]) for a in j["assignments"]),
                collector=CollectorKind(j["collector"]),
                watched=tuple(j["watched"]),
                phase=JobPhase(j["phase"]),
                reason=j["reason"],
                completed=j["completed"],
                attempt=j["attempt"],
                log=list(j["log"]),
            )
            job.units = [
                SimUnit(job=job.name, index=u["index"], cpu=u["cpu"], remaining=u["remaining"], node=u["node"])
                for u in j["units"]
            ]
            world.jobs[job.name] = job
        # Allocation totals derive from placements: recompute on load.
        for job in world.jobs.values():
            for unit in job.units:
                if unit.node is not None and unit.node in world.nodes:
                    world.nodes[unit.node].allocated_cpu += unit.cpu
                    world.namespaces[job.namespace].cpu_used += unit.cpu
        return world


class SimBackend(ExecutionBackend):
    """Execution backend over a :class:`SimWorld`, with optional state
    persistence (world snapshot per tick plus a JSON-lines event log)."""

    WORLD_FILE = "world.json"
    EVENTS_FILE = "events.jsonl"

    def __init__(
        self,
        world: SimWorld,
        metrics: ObservationStore,
        state_dir: str | Path | None = None,
        crash_hook: Callable[[int, str], None] | None = None,
    ):
        self.world = world
        self.metrics = metrics
        self.world.metrics = metrics
        self.crash_hook = crash_hook
        self._state_dir = Path(state_dir) if state_dir is not None else None
        self._events_fp = None
        if self._state_dir is not None:
            self._state_dir.mkdir(parents=True, exist_ok=True)
            self._events_fp = (self._state_dir / self.EVENTS_FILE).open("a")
        self.world._event_writer = self._write_event

    @classmethod
    def resume(
        cls,
        state_dir: str | Path,
        metrics: ObservationStore,
        crash_hook: Callable[[int, str], None] | None = None,
    ) -> "SimBackend":
        """Rebuild a backend from a persisted snapshot; events recorded after
        the snapshot (a torn tick) are truncated and will be re-emitted."""
        state_dir = Path(state_dir)
        doc = json.loads((state_dir / cls.WORLD_FILE).read_text())
        world = SimWorld.from_doc(doc["world"])
        events_path = state_dir / cls.EVENTS_FILE
        offset = doc.get("eventsOffset", 0)
        if events_path.exists():
            with events_path.open("r+") as fp:
                fp.truncate(offset)
            world.events = [
                json.loads(line)
                for line in events_path.read_text().splitlines()
                if line.strip()
            ]
        return cls(world, metrics, state_dir=state_dir, crash_hook=crash_hook)

    @staticmethod
    def has_snapshot(state_dir: str | Path) -> bool:
        return (Path(state_dir) / SimBackend.WORLD_FILE).exists()

    def _write_event(self, event: dict) -> None:
        if self._events_fp is not None:
            self._events_fp.write(json.dumps(event, sort_keys=True) + "\n")

    def persist(self) -> None:
        if self._state_dir is None:
            return
        self._events_fp.flush()
        offset = self._events_fp.tell()
        doc = {"world": self.world.to_doc(), "eventsOffset": offset}
        tmp = self._state_dir / (self.WORLD_FILE + ".tmp")
        tmp.write_text(json.dumps(doc))
        os.replace(tmp, self._state_dir / self.WORLD_FILE)

    # -- ExecutionBackend ----------------------------------------------------

    def submit(
        self,
        run_spec: TrialRunSpec,
        template: TrialTemplate,
        *,
        collector_kind: CollectorKind,
        watched_metrics,
        restart_count: int = 0,
    ) -> str:
        return self.world.submit_job(
            run_spec,
            template,
            collector_kind=collector_kind,
            watched_metrics=tuple(watched_metrics),
        )

    def job_state(self, handle: str) -> JobState:
        return self.world.job_state(handle)

    def collect_metrics(self, handle: str) -> None:
        job = self.world.jobs.get(handle)
        if job is None or job.collector is not CollectorKind.PULL or not job.log:
            return
        points = parse_metric_lines("\n".join(job.log), job.watched, handle)
        if points:
            self.metrics.register_observation_log(points)

    def reserve_service(self, namespace: str, name: str, cpu: float) -> None:
        self.world.reserve_service(namespace, name, cpu)

    def release_service(self, namespace: str, name: str) -> None:
        self.world.release_service(namespace, name)

    def advance(self, controller_step: Callable[[], int]) -> None:
        self.world.advance_tick(controller_step, crash_hook=self.crash_hook)
        self.persist()

    def emit_event(self, kind: str, payload: dict) -> None:
        self.world.emit(kind, payload)

    def close(self) -> None:
        if self._events_fp is not None:
            self._events_fp.flush()
            self._events_fp.close()
            self._events_fp = None
