"""Local-process execution backend.

Runs each trial as a real child process with hyperparameters on the command
line, so anything executable can be tuned regardless of language. Stdout is
the metric transport: in pull mode it is captured and parsed on completion,
in push mode each line is ingested into the store as it arrives.

Exit code 0 is success; a configurable set of exit codes (default 75, the
conventional tempfail code) classifies as temporary failure eligible for
restart; anything else is permanent. Restarted processes see their attempt
number in ``TUNECTL_RESTART_COUNT``.
"""

from __future__ import annotations

import os
import shlex
import subprocess
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

from ..errors import InvalidPayloadError
from ..metrics import ObservationStore, PushEndpoint, parse_metric_lines
from ..resources import CollectorKind, TrialRunSpec, TrialTemplate
from ..controller.backend import ExecutionBackend, JobPhase, JobState

DEFAULT_TEMPORARY_EXIT_CODES = (75,)


@dataclass
class _LocalJob:
    handle: str
    collector: CollectorKind
    watched: tuple[str, ...]
    process: subprocess.Popen | None = None
    reader: threading.Thread | None = None
    log: list[str] = field(default_factory=list)
    failed_reason: str | None = None
    spawn_failed: bool = False
    collected: bool = False


class LocalProcessBackend(ExecutionBackend):
    def __init__(
        self,
        metrics: ObservationStore,
        temporary_exit_codes: Sequence[int] = DEFAULT_TEMPORARY_EXIT_CODES,
        poll_interval: float = 0.02,
        env: dict[str, str] | None = None,
    ):
        self.metrics = metrics
        self.temporary_exit_codes = set(temporary_exit_codes)
        self.poll_interval = poll_interval
        self._base_env = env
        self._lock = threading.Lock()
        self._jobs: dict[str, _LocalJob] = {}

    def submit(
        self,
        run_spec: TrialRunSpec,
        template: TrialTemplate,
        *,
        collector_kind: CollectorKind,
        watched_metrics: Sequence[str],
        restart_count: int = 0,
    ) -> str:
        handle = f"{run_spec.namespace}/{run_spec.trial_name}"
        command = run_spec.resolved_payload
        if not isinstance(command, str):
            raise InvalidPayloadError("the local backend runs 'local-process' trial templates only")
        job = _LocalJob(handle=handle, collector=collector_kind, watched=tuple(watched_metrics))
        env = dict(self._base_env if self._base_env is not None else os.environ)
        env.update(
            {
                "TUNECTL_TRIAL_NAME": run_spec.trial_name,
                "TUNECTL_TRIAL_NAMESPACE": run_spec.namespace,
                "TUNECTL_RESTART_COUNT": str(restart_count),
            }
        )
        try:
            job.process = subprocess.Popen(
                shlex.split(command),
                stdout=subprocess.PIPE,
                stderr=subprocess.STDOUT,
                env=env,
            )
        except (FileNotFoundError, PermissionError, OSError, ValueError) as exc:
            job.spawn_failed = True
            job.failed_reason = f"spawn failed: {exc}"
        else:
            push = (
                PushEndpoint(self.metrics, job.watched)
                if collector_kind is CollectorKind.PUSH
                else None
            )
            job.reader = threading.Thread(
                target=self._read_stdout, args=(job, push), daemon=True
            )
            job.reader.start()
        with self._lock:
            self._jobs[handle] = job
        return handle

    def _read_stdout(self, job: _LocalJob, push: PushEndpoint | None) -> None:
        assert job.process is not None and job.process.stdout is not None
        for raw in job.process.stdout:
            line = raw.decode("utf-8", errors="replace")
            with self._lock:
                job.log.append(line.rstrip("\n"))
            if push is not None:
                push.feed(job.handle, line)
        if push is not None:
            push.close(job.handle)

    def job_state(self, handle: str) -> JobState:
        with self._lock:
            job = self._jobs.get(handle)
        if job is None:
            return JobState(phase=JobPhase.MISSING)
        if job.spawn_failed:
            return JobState(phase=JobPhase.FAILED_PERMANENT, reason=job.failed_reason)
        assert job.process is not None
        code = job.process.poll()
        if code is None:
            return JobState(phase=JobPhase.RUNNING)
        if job.reader is not None and job.reader.is_alive():
            # The full log must be visible before completion; a grandchild
            # holding the pipe open must not wedge the control loop.
            job.reader.join(timeout=5.0)
            if job.reader.is_alive():
                return JobState(phase=JobPhase.RUNNING)
        if code == 0:
            return JobState(phase=JobPhase.SUCCEEDED)
        if code in self.temporary_exit_codes:
            return JobState(phase=JobPhase.FAILED_TEMPORARY, reason=f"exit code {code} (temporary)")
        return JobState(phase=JobPhase.FAILED_PERMANENT, reason=f"exit code {code}")

    def collect_metrics(self, handle: str) -> None:
        with self._lock:
            job = self._jobs.get(handle)
            if job is None or job.collector is not CollectorKind.PULL or job.collected:
                return
            text = "\n".join(job.log)
        points = parse_metric_lines(text, job.watched, handle)
        if points:
            self.metrics.register_observation_log(points)
        with self._lock:
            job.collected = True

    def reserve_service(self, namespace: str, name: str, cpu: float) -> None:
        pass  # no quota model on a bare host

    def release_service(self, namespace: str, name: str) -> None:
        pass

    def advance(self, controller_step: Callable[[], int]) -> None:
        controller_step()
        time.sleep(self.poll_interval)

    def emit_event(self, kind: str, payload: dict) -> None:
        pass
