"""Batch runs: idempotency, atomic visibility, serial/parallel equivalence."""

from __future__ import annotations

import random
from datetime import date, timedelta

import pytest

from vigil.errors import EmptyRunError
from vigil.ranking import ExpectationConfig
from vigil.results import ResultsStore
from vigil.runner import run_daily
from vigil.store import Observation, StreamKey, StreamStore

from .conftest import daily_observations

JAN = date(2024, 1, 1)
AS_OF = JAN + timedelta(days=40)


@pytest.fixture()
def results_store(tmp_path) -> ResultsStore:
    return ResultsStore(tmp_path / "results.db")


def seed_streams(store: StreamStore, n: int, days: int = 30, seed: int = 4) -> list[StreamKey]:
    rng = random.Random(seed)
    keys = []
    obs = []
    for i in range(n):
        key = StreamKey(f"prov{i % 3}", f"sig{i % 4}", "county", f"g{i:04d}")
        keys.append(key)
        base = rng.uniform(50, 150)
        values = [base + rng.gauss(0, 6) for _ in range(days)]
        obs.extend(daily_observations(key, JAN, values))
    store.bulk_load(obs)
    return keys


class TestRunDaily:
    def test_points_scored_accounting(self, stream_store, results_store):
        seed_streams(stream_store, 10, days=30)
        report = run_daily(stream_store, results_store, AS_OF, ExpectationConfig())
        assert report.streams_scored == 10
        # Dense 30-day frames: everything after the 7-point minimum history.
        assert report.points_scored == 10 * (30 - 7)
        assert not report.skipped

    def test_rerun_is_idempotent(self, stream_store, results_store):
        seed_streams(stream_store, 6)
        first = run_daily(stream_store, results_store, AS_OF, ExpectationConfig())
        dump_first = results_store.dump(AS_OF)
        second = run_daily(stream_store, results_store, AS_OF, ExpectationConfig())
        assert results_store.dump(AS_OF) == dump_first
        assert not first.overwrote_identical
        assert second.overwrote_identical
        assert first.run_id == second.run_id

    def test_short_stream_skipped_with_reason(self, stream_store, results_store):
        key = StreamKey("prov1", "cases", "county", "g0001")
        stream_store.ingest(daily_observations(key, AS_OF - timedelta(days=5), [1.0, 2.0, 3.0]))
        seed_streams(stream_store, 2)
        report = run_daily(stream_store, results_store, AS_OF, ExpectationConfig())
        assert (key, "insufficient-data") in report.skipped
        assert report.streams_scored == 2

    def test_parallel_matches_serial_byte_identical(self, tmp_path):
        streams = StreamStore(tmp_path / "s.db")
        seed_streams(streams, 40, days=60)
        serial = ResultsStore(tmp_path / "serial.db")
        parallel = ResultsStore(tmp_path / "parallel.db")
        run_daily(streams, serial, AS_OF, ExpectationConfig(), parallel=False)
        run_daily(streams, parallel, AS_OF, ExpectationConfig(), parallel=True, workers=5)
        assert serial.dump(AS_OF) == parallel.dump(AS_OF)

    def test_no_run_means_empty_run_error(self, results_store):
        with pytest.raises(EmptyRunError):
            results_store.require_run(AS_OF)

    def test_run_visible_after_completion(self, stream_store, results_store):
        seed_streams(stream_store, 3)
        report = run_daily(stream_store, results_store, AS_OF, ExpectationConfig())
        info = results_store.require_run(AS_OF)
        assert info.run_id == report.run_id
        assert info.points_scored == report.points_scored

    def test_config_resolver_applies_per_family(self, stream_store, results_store):
        noisy = StreamKey("prov1", "noisy", "county", "g0001")
        calm = StreamKey("prov1", "calm", "county", "g0002")
        stream_store.ingest(daily_observations(noisy, JAN, [10.0] * 10 + [50.0]))
        stream_store.ingest(daily_observations(calm, JAN, [10.0] * 10 + [50.0]))

        def resolver(key: StreamKey) -> ExpectationConfig:
            if key.signal == "noisy":
                return ExpectationConfig(dispersion_floor_abs=10.0)
            return ExpectationConfig()

        run_daily(stream_store, results_store, AS_OF, resolver)
        rows = {key: points for key, points in results_store.stream_rows(AS_OF)}
        noisy_peak = max(score for _, score, *_ in rows[noisy])
        calm_peak = max(score for _, score, *_ in rows[calm])
        assert calm_peak == 40.0
        assert noisy_peak == 4.0

    def test_failed_write_leaves_no_partial_run(self, stream_store, results_store):
        seed_streams(stream_store, 4)
        first = run_daily(stream_store, results_store, AS_OF, ExpectationConfig())
        intact = results_store.dump(AS_OF)

        def exploding_batches():
            yield [("a", "b", "county", "g0", "2024-01-01", 1.0, 0.0, 1.0, 0)]
            raise RuntimeError("store went away")

        with pytest.raises(RuntimeError):
            results_store.write_run(AS_OF, exploding_batches(), "2024-01-01T00:00:00")
        assert results_store.dump(AS_OF) == intact
        assert results_store.require_run(AS_OF).run_id == first.run_id

    def test_scores_of_key_orders_history_by_run(self, stream_store, results_store):
        key = StreamKey("prov1", "cases", "county", "g0001")
        base = daily_observations(key, JAN, [10.0] * 12, lag=1)
        stream_store.ingest(base)
        first_as_of = JAN + timedelta(days=12)
        run_daily(stream_store, results_store, first_as_of, ExpectationConfig())
        revision = Observation(key, JAN + timedelta(days=9), JAN + timedelta(days=14), 60.0)
        stream_store.ingest([revision])
        second_as_of = JAN + timedelta(days=14)
        run_daily(stream_store, results_store, second_as_of, ExpectationConfig())
        history = results_store.scores_of_key(key, second_as_of)
        revised = history[JAN + timedelta(days=9)]
        assert [as_of for as_of, _ in revised] == [first_as_of, second_as_of]
        assert revised[0][1] == 0.0
        assert revised[1][1] == 50.0
