"""Observation storage, the metric line format, and objective extraction."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tunectl.metrics import (
    FileObservationStore,
    InMemoryObservationStore,
    MetricPoint,
    ObservationFilter,
    PushEndpoint,
    best_objective,
    parse_metric_lines,
)
from tunectl.resources import MetricStrategy, ObjectiveSpec, ObjectiveType


def _point(trial="t1", metric="accuracy", ts=0, value=0.5):
    return MetricPoint(trial=trial, metric=metric, ts=ts, value=value)


@pytest.fixture(params=["memory", "file"])
def store(request, tmp_path):
    if request.param == "memory":
        return InMemoryObservationStore()
    return FileObservationStore(tmp_path / "metrics.jsonl")


def test_register_then_get_in_timestamp_order(store):
    points = [_point(ts=3, value=0.3), _point(ts=1, value=0.1), _point(ts=2, value=0.2)]
    store.register_observation_log(points)
    got = store.get_observation_log("t1")
    assert [p.ts for p in got] == [1, 2, 3]


def test_duplicate_submission_is_idempotent(store):
    points = [_point(ts=1), _point(ts=2)]
    store.register_observation_log(points)
    store.register_observation_log(points)
    assert len(store.get_observation_log("t1")) == 2


def test_multiple_metrics_tracked_simultaneously(store):
    store.register_observation_log(
        [
            _point(metric="Validation-accuracy", ts=1, value=0.95),
            _point(metric="accuracy", ts=1, value=0.97),
        ]
    )
    validation = store.get_observation_log("t1", ObservationFilter(metric_names=("Validation-accuracy",)))
    extra = store.get_observation_log("t1", ObservationFilter(metric_names=("accuracy",)))
    assert [p.value for p in validation] == [0.95]
    assert [p.value for p in extra] == [0.97]


def test_inclusive_timestamp_filter(store):
    store.register_observation_log([_point(ts=t, value=t) for t in (1, 5, 10, 11)])
    got = store.get_observation_log("t1", ObservationFilter(start=5, end=10))
    assert [p.ts for p in got] == [5, 10]


def test_unknown_trial_is_empty_not_error(store):
    assert store.get_observation_log("nobody") == []


def test_delete_round_trip(store):
    store.register_observation_log([_point()])
    store.delete_observation_log("t1")
    assert store.get_observation_log("t1") == []
    store.delete_observation_log("never-existed")  # no-op ack


def test_delete_leaves_other_trials_intact(store):
    store.register_observation_log([_point(trial="t1")])
    store.register_observation_log([_point(trial="t2")])
    store.delete_observation_log("t1")
    assert len(store.get_observation_log("t2")) == 1


def test_ties_broken_by_metric_then_insertion(store):
    store.register_observation_log(
        [
            _point(metric="z", ts=1, value=1.0),
            _point(metric="a", ts=1, value=2.0),
            _point(metric="a", ts=1, value=3.0),
        ]
    )
    got = store.get_observation_log("t1")
    assert [(p.metric, p.value) for p in got] == [("a", 2.0), ("a", 3.0), ("z", 1.0)]


def test_batch_must_share_trial(store):
    with pytest.raises(ValueError):
        store.register_observation_log([_point(trial="a"), _point(trial="b")])


def test_filter_start_after_end_rejected():
    with pytest.raises(ValueError):
        ObservationFilter(start=10, end=5)


def test_file_store_survives_reload(tmp_path):
    path = tmp_path / "metrics.jsonl"
    first = FileObservationStore(path)
    first.register_observation_log([_point(ts=1), _point(ts=2)])
    first.delete_observation_log("t1")
    first.register_observation_log([_point(trial="t2", ts=9, value=0.9)])
    reloaded = FileObservationStore(path)
    assert reloaded.get_observation_log("t1") == []
    assert [p.value for p in reloaded.get_observation_log("t2")] == [0.9]


def test_file_store_tolerates_torn_final_line(tmp_path):
    path = tmp_path / "metrics.jsonl"
    FileObservationStore(path).register_observation_log([_point(ts=1)])
    with path.open("a") as fp:
        fp.write('{"trial": "t1", "metric": "accuracy", "ts": 2, "val')
    reloaded = FileObservationStore(path)
    assert [p.ts for p in reloaded.get_observation_log("t1")] == [1]


@settings(max_examples=100, deadline=None)
@given(
    points=st.lists(
        st.tuples(
            st.sampled_from(["a", "b", "c"]),
            st.integers(0, 30),
            st.floats(-5, 5, allow_nan=False),
        ),
        max_size=40,
    ),
    start=st.one_of(st.none(), st.integers(0, 30)),
    end=st.one_of(st.none(), st.integers(0, 30)),
    names=st.one_of(st.none(), st.sets(st.sampled_from(["a", "b", "c"]))),
)
def test_filtered_get_equals_postfiltered_get(points, start, end, names):
    # Oracle: a filtered read must equal the unfiltered read post-filtered.
    if start is not None and end is not None and start > end:
        start, end = end, start
    store = InMemoryObservationStore()
    for metric, ts, value in points:
        store.register_observation_log([_point(metric=metric, ts=ts, value=value)])
    flt = ObservationFilter(
        start=start, end=end, metric_names=None if names is None else tuple(sorted(names))
    )
    assert store.get_observation_log("t1", flt) == [
        p for p in store.get_observation_log("t1") if flt.admits(p)
    ]


# --- line format ------------------------------------------------------------


def test_parse_basic_metric_line():
    points = parse_metric_lines("17 Validation-accuracy=0.977", ["Validation-accuracy"], "t1")
    assert points == [MetricPoint("t1", "Validation-accuracy", 17, 0.977)]


def test_parse_ignores_non_metric_lines():
    assert parse_metric_lines("INFO starting epoch 3", ["accuracy"], "t1") == []


def test_parse_drops_unwatched_metrics():
    text = "1 accuracy=0.8\n1 loss=0.2\n2 accuracy=0.9"
    points = parse_metric_lines(text, ["accuracy"], "t1")
    assert [p.value for p in points] == [0.8, 0.9]


def test_parse_iso_timestamps_become_millis():
    points = parse_metric_lines("2024-01-02T03:04:05Z accuracy=0.5", ["accuracy"], "t1")
    assert points[0].ts == 1704164645000


def test_parse_tolerates_malformed_candidates():
    text = "nonsense accuracy=oops\n= =\n3 accuracy=0.7\nnoise accuracy=nan"
    points = parse_metric_lines(text, ["accuracy"], "t1")
    assert [p.value for p in points] == [0.7]


def test_push_endpoint_handles_chunked_lines():
    store = InMemoryObservationStore()
    endpoint = PushEndpoint(store, ["accuracy"])
    endpoint.feed("t1", b"1 accu")
    endpoint.feed("t1", b"racy=0.5\n2 accuracy=0.6\n3 acc")
    endpoint.feed("t1", "uracy=0.7")
    endpoint.close("t1")
    assert [p.value for p in store.get_observation_log("t1")] == [0.5, 0.6, 0.7]


def test_push_equals_pull_for_identical_stream():
    text = "1 accuracy=0.5\nINFO epoch done\n2 accuracy=0.9177\n"
    objective = ObjectiveSpec(type=ObjectiveType.MAXIMIZE, objective_metric_name="accuracy")
    pull_store = InMemoryObservationStore()
    pull_store.register_observation_log(parse_metric_lines(text, ["accuracy"], "t1"))
    push_store = InMemoryObservationStore()
    endpoint = PushEndpoint(push_store, ["accuracy"])
    for chunk in (text[:7], text[7:20], text[20:]):
        endpoint.feed("t1", chunk)
    endpoint.close("t1")
    assert best_objective(pull_store.get_observation_log("t1"), objective) == best_objective(
        push_store.get_observation_log("t1"), objective
    )


# --- best objective -----------------------------------------------------------


def _series(values):
    return [_point(metric="accuracy", ts=i + 1, value=v) for i, v in enumerate(values)]


OBJECTIVE = ObjectiveSpec(type=ObjectiveType.MAXIMIZE, objective_metric_name="accuracy")


def test_best_objective_latest_by_default():
    assert best_objective(_series([0.90, 0.95, 0.93]), OBJECTIVE) == 0.93


def test_best_objective_absent_for_empty_series():
    assert best_objective([], OBJECTIVE) is None
    assert best_objective(_series([]), OBJECTIVE) is None


def test_best_objective_meets_goal_at_equality():
    assert best_objective(_series([0.99]), OBJECTIVE) == 0.99


def test_best_objective_strategies():
    series = _series([0.90, 0.95, 0.93])
    assert best_objective(series, OBJECTIVE, MetricStrategy.MAX) == 0.95
    assert best_objective(series, OBJECTIVE, MetricStrategy.MIN) == 0.90


def test_best_objective_ignores_other_metrics():
    series = _series([0.5]) + [_point(metric="loss", ts=9, value=0.1)]
    assert best_objective(series, OBJECTIVE) == 0.5


def test_concurrent_appends_and_reads_are_safe(tmp_path):
    # Per-trial append order is the serialization order readers observe.
    import threading

    for store in (InMemoryObservationStore(), FileObservationStore(tmp_path / "m.jsonl")):
        errors: list[Exception] = []

        def writer(trial: str):
            try:
                for t in range(200):
                    store.register_observation_log(
                        [_point(trial=trial, metric="accuracy", ts=t, value=float(t))]
                    )
            except Exception as exc:  # pragma: no cover - failure reporting
                errors.append(exc)

        def reader(trial: str):
            try:
                for _ in range(100):
                    points = store.get_observation_log(trial)
                    assert [p.ts for p in points] == sorted(p.ts for p in points)
            except Exception as exc:  # pragma: no cover - failure reporting
                errors.append(exc)

        threads = [
            threading.Thread(target=writer, args=(f"t{i}",)) for i in range(4)
        ] + [threading.Thread(target=reader, args=(f"t{i}",)) for i in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not errors
        for i in range(4):
            assert len(store.get_observation_log(f"t{i}")) == 200
