"""Observation-log storage, the metric line format, and objective extraction.

Two backends ship behind one three-call interface: an in-memory store for
tests and an append-only JSON-lines file store as the durable default
(one ``{"trial", "metric", "ts", "value"}`` object per line). Timestamps are
opaque ordinals to the store: the simulator uses integer ticks, the local
runner wall-clock milliseconds.

The wire format for metric lines is ``<timestamp> <name>=<value>`` with the
timestamp either an integer tick or an ISO-8601 datetime; the same format is
accepted by the pull parser and the push ingestion endpoint.
"""

from __future__ import annotations

import json
import logging
import math
import re
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

from .errors import StorageUnavailableError
from .resources import MetricStrategy, ObjectiveSpec

logger = logging.getLogger(__name__)

METRIC_LINE_RE = re.compile(r"^(\S+)\s+([^=\s]+)=(\S+)$")


@dataclass(frozen=True)
class MetricPoint:
    trial: str
    metric: str
    ts: float
    value: float

    def __post_init__(self) -> None:
        if not self.metric:
            raise ValueError("metric name must be non-empty")
        if not math.isfinite(self.value):
            raise ValueError("metric value must be finite")


@dataclass(frozen=True)
class ObservationFilter:
    start: float | None = None
    end: float | None = None
    metric_names: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.start is not None and self.end is not None and self.start > self.end:
            raise ValueError("filter start must be <= end")

    def admits(self, point: MetricPoint) -> bool:
        if self.start is not None and point.ts < self.start:
            return False
        if self.end is not None and point.ts > self.end:
            return False
        if self.metric_names is not None and point.metric not in self.metric_names:
            return False
        return True


class ObservationStore(ABC):
    """Pluggable trial-metric storage: register, get, delete."""

    @abstractmethod
    def register_observation_log(self, points: Sequence[MetricPoint]) -> None:
        """Durably append points (all for one trial). Idempotent for
        identical (trial, metric, ts, value) tuples."""

    @abstractmethod
    def get_observation_log(
        self, trial: str, flt: ObservationFilter | None = None
    ) -> list[MetricPoint]:
        """Points for a trial in ascending timestamp order, ties broken by
        metric name then insertion order. Unknown trials yield []."""

    @abstractmethod
    def delete_observation_log(self, trial: str) -> None:
        """Remove a trial's points; unknown trials are a no-op."""


def _check_batch(points: Sequence[MetricPoint]) -> str:
    if not points:
        raise ValueError("register requires at least one point")
    trial = points[0].trial
    for p in points:
        if p.trial != trial:
            raise ValueError("all points in one batch must share a trial name")
    return trial


def _ordered(entries: list[tuple[MetricPoint, int]]) -> list[MetricPoint]:
    return [p for p, _ in sorted(entries, key=lambda e: (e[0].ts, e[0].metric, e[1]))]


class InMemoryObservationStore(ObservationStore):
    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._by_trial: dict[str, list[tuple[MetricPoint, int]]] = {}
        self._seen: dict[str, set[tuple]] = {}
        self._seq = 0

    def register_observation_log(self, points: Sequence[MetricPoint]) -> None:
        trial = _check_batch(points)
        with self._lock:
            entries = self._by_trial.setdefault(trial, [])
            seen = self._seen.setdefault(trial, set())
            for p in points:
                key = (p.metric, p.ts, p.value)
                if key in seen:
                    continue
                seen.add(key)
                entries.append((p, self._seq))
                self._seq += 1

    def get_observation_log(
        self, trial: str, flt: ObservationFilter | None = None
    ) -> list[MetricPoint]:
        with self._lock:
            entries = list(self._by_trial.get(trial, []))
        points = _ordered(entries)
        if flt is None:
            return points
        return [p for p in points if flt.admits(p)]

    def delete_observation_log(self, trial: str) -> None:
        with self._lock:
            self._by_trial.pop(trial, None)
            self._seen.pop(trial, None)


class FileObservationStore(ObservationStore):
    """Append-only JSON-lines backend.

    Deletions append a tombstone line ``{"trial": ..., "deleted": true}`` so
    the file itself stays append-only and crash-tolerant; a torn final line
    from an interrupted write is skipped on load.
    """

    def __init__(self, path: str | Path):
        self._path = Path(path)
        self._lock = threading.Lock()
        self._by_trial: dict[str, list[tuple[MetricPoint, int]]] = {}
        self._seen: dict[str, set[tuple]] = {}
        self._seq = 0
        self._load()

    def _load(self) -> None:
        if not self._path.exists():
            return
        for line in self._path.read_text().splitlines():
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError:
                continue
            trial = doc.get("trial")
            if not isinstance(trial, str) or not trial:
                continue
            if doc.get("deleted"):
                self._by_trial.pop(trial, None)
                self._seen.pop(trial, None)
                continue
            try:
                point = MetricPoint(
                    trial=trial, metric=doc["metric"], ts=doc["ts"], value=doc["value"]
                )
            except (KeyError, TypeError, ValueError):
                continue
            self._remember(point)

    def _remember(self, point: MetricPoint) -> bool:
        entries = self._by_trial.setdefault(point.trial, [])
        seen = self._seen.setdefault(point.trial, set())
        key = (point.metric, point.ts, point.value)
        if key in seen:
            return False
        seen.add(key)
        entries.append((point, self._seq))
        self._seq += 1
        return True

    def _append(self, docs: Iterable[dict]) -> None:
        try:
            with self._path.open("a") as fp:
                for doc in docs:
                    fp.write(json.dumps(doc, sort_keys=True) + "\n")
                fp.flush()
        except OSError as exc:
            raise StorageUnavailableError(f"metric log append failed: {exc}") from exc

    def register_observation_log(self, points: Sequence[MetricPoint]) -> None:
        _check_batch(points)
        with self._lock:
            fresh = [p for p in points if self._remember(p)]
            if fresh:
                self._append(
                    {"trial": p.trial, "metric": p.metric, "ts": p.ts, "value": p.value}
                    for p in fresh
                )

    def get_observation_log(
        self, trial: str, flt: ObservationFilter | None = None
    ) -> list[MetricPoint]:
        with self._lock:
            entries = list(self._by_trial.get(trial, []))
        points = _ordered(entries)
        if flt is None:
            return points
        return [p for p in points if flt.admits(p)]

    def delete_observation_log(self, trial: str) -> None:
        with self._lock:
            if trial in self._by_trial:
                self._by_trial.pop(trial, None)
                self._seen.pop(trial, None)
            self._append([{"trial": trial, "deleted": True}])


# ---------------------------------------------------------------------------
# Metric line parsing (pull collection) and push ingestion
# ---------------------------------------------------------------------------


def _parse_timestamp(token: str) -> float | None:
    try:
        return int(token)
    except ValueError:
        pass
    try:
        stamp = datetime.fromisoformat(token.replace("Z", "+00:00"))
    except ValueError:
        return None
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    return int(stamp.timestamp() * 1000)


def parse_metric_lines(
    text: str, watched_metrics: Sequence[str], trial: str
) -> list[MetricPoint]:
    """Lenient parser for ``<timestamp> <name>=<float>`` lines.

    Lines that do not look like metric lines are ignored; lines that look
    like one but fail to parse are counted and reported at debug level,
    never fatally. Only watched metric names are retained.
    """
    watched = set(watched_metrics)
    points: list[MetricPoint] = []
    malformed = 0
    for line in text.splitlines():
        line = line.strip()
        if not line or "=" not in line:
            continue
        match = METRIC_LINE_RE.match(line)
        if not match:
            malformed += 1
            continue
        ts = _parse_timestamp(match.group(1))
        if ts is None:
            malformed += 1
            continue
        try:
            value = float(match.group(3))
        except ValueError:
            malformed += 1
            continue
        if not math.isfinite(value):
            malformed += 1
            continue
        name = match.group(2)
        if name in watched:
            points.append(MetricPoint(trial=trial, metric=name, ts=ts, value=value))
    if malformed:
        logger.debug("trial %s: %d malformed metric candidate line(s) skipped", trial, malformed)
    return points


class PushEndpoint:
    """Local byte-stream ingestion: the push analog of the pull parser.

    Trainers write the same line format; every completed line is parsed and
    registered synchronously, so an acked write is visible to subsequent
    reads.
    """

    def __init__(self, store: ObservationStore, watched_metrics: Sequence[str]):
        self._store = store
        self._watched = tuple(watched_metrics)
        self._buffers: dict[str, str] = {}
        self._lock = threading.Lock()

    def feed(self, trial: str, data: bytes | str) -> int:
        """Ingest a chunk; returns the number of points registered."""
        text = data.decode("utf-8", errors="replace") if isinstance(data, bytes) else data
        with self._lock:
            buffered = self._buffers.get(trial, "") + text
            lines, sep, rest = buffered.rpartition("\n")
            self._buffers[trial] = rest if sep else buffered
            complete = lines if sep else ""
        points = parse_metric_lines(complete, self._watched, trial)
        if points:
            self._store.register_observation_log(points)
        return len(points)

    def close(self, trial: str) -> int:
        with self._lock:
            rest = self._buffers.pop(trial, "")
        points = parse_metric_lines(rest, self._watched, trial)
        if points:
            self._store.register_observation_log(points)
        return len(points)


def best_objective(
    points: Sequence[MetricPoint],
    objective: ObjectiveSpec,
    strategy: MetricStrategy | None = None,
) -> float | None:
    """Scalar objective of a trial from its ordered metric series.

    The default ``latest`` strategy takes the last reported value of the
    objective metric; ``max``/``min`` take the extremum. Absent when the
    metric was never reported.
    """
    strategy = strategy or objective.metric_strategy
    series = [p.value for p in points if p.metric == objective.objective_metric_name]
    if not series:
        return None
    if strategy is MetricStrategy.MAX:
        return max(series)
    if strategy is MetricStrategy.MIN:
        return min(series)
    return series[-1]
