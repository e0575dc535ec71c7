"""Execution backend interface shared by the cluster simulator and the
local-process runner. One TrialJob backend drives possibly-multi-worker
workloads and reports a coarse job state the trial controller maps onto
trial phases."""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

from ..resources import CollectorKind, TrialRunSpec, TrialTemplate


class JobPhase(str, Enum):
    PENDING = "pending"
    RUNNING = "running"
    SUCCEEDED = "succeeded"
    FAILED_TEMPORARY = "failed-temporary"
    FAILED_PERMANENT = "failed-permanent"
    MISSING = "missing"


@dataclass(frozen=True)
class JobState:
    phase: JobPhase
    reason: str | None = None


class ExecutionBackend(ABC):
    @abstractmethod
    def submit(
        self,
        run_spec: TrialRunSpec,
        template: TrialTemplate,
        *,
        collector_kind: CollectorKind,
        watched_metrics: Sequence[str],
        restart_count: int = 0,
    ) -> str:
        """Launch the trial job; returns its handle. Resubmitting the same
        trial starts a fresh attempt resuming from any recorded checkpoint."""

    @abstractmethod
    def job_state(self, handle: str) -> JobState:
        ...

    @abstractmethod
    def collect_metrics(self, handle: str) -> None:
        """Pull-mode collection: parse whatever the job has logged so far
        into the metric store. Idempotent; a no-op for push-mode jobs."""

    @abstractmethod
    def reserve_service(self, namespace: str, name: str, cpu: float) -> None:
        """Hold a long-running per-experiment service reservation (the
        deployed suggestion algorithm). Idempotent."""

    @abstractmethod
    def release_service(self, namespace: str, name: str) -> None:
        """Drop a service reservation; unknown names are a no-op."""

    @abstractmethod
    def advance(self, controller_step: Callable[[], int]) -> None:
        """Run one unit of time, invoking the controller step at the point
        in the cycle the backend defines."""

    def emit_event(self, kind: str, payload: dict) -> None:  # pragma: no cover
        """Optional structured event sink (simulator writes JSON lines)."""

    def close(self) -> None:
        """Flush and release any backend resources; safe to call twice."""
