"""Scoring and ranking: expectation models, causality, top-k determinism."""

from __future__ import annotations

import random
import statistics
import time
from datetime import date, timedelta

import pytest

from vigil.errors import InsufficientDataError
from vigil.ranking import (
    ExpectationConfig,
    ScoredPoint,
    expect,
    rank_streams,
    score_stream,
)
from vigil.store import StreamFrame, StreamKey

from .conftest import key_of

JAN = date(2024, 1, 1)


def frame_of(values: list[float], key: StreamKey | None = None, start: date = JAN) -> StreamFrame:
    key = key or key_of()
    points = tuple((start + timedelta(days=i), v) for i, v in enumerate(values))
    return StreamFrame(key=key, as_of=points[-1][0], points=points, window_days=max(400, len(values) + 1))


def sparse_frame(pairs: list[tuple[int, float]], key: StreamKey | None = None) -> StreamFrame:
    key = key or key_of()
    points = tuple((JAN + timedelta(days=i), v) for i, v in pairs)
    return StreamFrame(key=key, as_of=points[-1][0], points=points, window_days=400)


def robust_oracle(window: list[float], cfg: ExpectationConfig) -> tuple[float, float]:
    """Hand median/MAD expectation, independent of the vectorized path."""
    med = statistics.median(window)
    mad = statistics.median([abs(x - med) for x in window])
    dispersion = max(
        1.4826 * mad, cfg.dispersion_floor_abs, cfg.dispersion_floor_rel * abs(med)
    )
    return med, dispersion


class TestConfig:
    def test_rejects_short_train_window(self):
        with pytest.raises(ValueError):
            ExpectationConfig(train_window=3)

    def test_rejects_negative_floor(self):
        with pytest.raises(ValueError):
            ExpectationConfig(dispersion_floor_abs=-1.0)

    def test_rejects_inverted_bounds(self):
        with pytest.raises(ValueError):
            ExpectationConfig(bounds=(10.0, 1.0))


class TestExpect:
    def test_constant_series_engages_absolute_floor(self):
        frame = frame_of([10.0] * 8)
        expected, dispersion = expect(frame, ExpectationConfig(), frame.points[-1][0])
        assert expected == 10.0
        assert dispersion == 1.0  # max(1.4826 * 0, 1.0, 0.01 * 10)

    def test_linear_ramp_matches_hand_median_mad(self):
        values = [float(i) for i in range(1, 29)]
        frame = frame_of(values + [99.0])
        at = frame.points[-1][0]
        cfg = ExpectationConfig(train_window=28)
        expected, dispersion = expect(frame, cfg, at)
        oracle_exp, oracle_disp = robust_oracle(values, cfg)
        assert expected == oracle_exp == 14.5
        assert dispersion == pytest.approx(oracle_disp, rel=1e-12)
        assert dispersion == pytest.approx(10.3782, rel=1e-9)  # 1.4826 * MAD(7)

    def test_last_value_model(self):
        frame = frame_of([1.0] * 9 + [42.0, 5.0])
        expected, _ = expect(
            frame, ExpectationConfig(model="last_value"), frame.points[-1][0]
        )
        assert expected == 42.0

    def test_rolling_gaussian_matches_hand_mean_stdev(self):
        values = [3.0, 4.0, 6.0, 2.0, 8.0, 5.0, 7.0, 1.0, 9.0, 4.0]
        frame = frame_of(values + [0.0])
        cfg = ExpectationConfig(model="rolling_gaussian", train_window=10)
        expected, dispersion = expect(frame, cfg, frame.points[-1][0])
        assert expected == pytest.approx(statistics.mean(values), rel=1e-12)
        assert dispersion == pytest.approx(
            max(statistics.stdev(values), 1.0, 0.01 * abs(statistics.mean(values))), rel=1e-12
        )

    def test_insufficient_history_raises(self):
        frame = frame_of([1.0, 2.0, 3.0])
        with pytest.raises(InsufficientDataError):
            expect(frame, ExpectationConfig(), frame.points[-1][0])

    def test_window_uses_only_trailing_values(self):
        values = [float(i % 5) for i in range(40)]
        frame = frame_of(values)
        cfg = ExpectationConfig(train_window=28)
        at = frame.points[30][0]
        expected, dispersion = expect(frame, cfg, at)
        oracle_exp, oracle_disp = robust_oracle(values[2:30], cfg)
        assert expected == oracle_exp
        assert dispersion == pytest.approx(oracle_disp, rel=1e-12)


class TestScoreStream:
    def test_spike_scores_forty(self):
        frame = frame_of([10.0] * 10 + [50.0])
        points = score_stream(
            frame, ExpectationConfig(), (frame.points[7][0], frame.points[-1][0])
        )
        assert points[-1].score == 40.0
        assert points[-1].expected == 10.0
        assert not points[-1].violated_bound

    def test_constant_stream_scores_zero(self):
        frame = frame_of([7.0] * 30)
        points = score_stream(
            frame, ExpectationConfig(), (frame.points[7][0], frame.points[-1][0])
        )
        assert points
        assert all(p.score == 0.0 for p in points)

    def test_bound_violation_dominates(self):
        frame = frame_of([10.0] * 10 + [-3.0, 50.0])
        cfg = ExpectationConfig(bounds=(0.0, None))
        points = score_stream(frame, cfg, (frame.points[7][0], frame.points[-1][0]))
        by_date = {p.time_value: p for p in points}
        violator = by_date[frame.points[-2][0]]
        assert violator.violated_bound
        top_clean = max(p.score for p in points if not p.violated_bound)
        assert violator.score > top_clean

    def test_max_day_change_flags_jump(self):
        frame = frame_of([100.0] * 10 + [400.0])
        cfg = ExpectationConfig(max_day_change=0.5)
        points = score_stream(frame, cfg, (frame.points[7][0], frame.points[-1][0]))
        assert points[-1].violated_bound

    def test_scores_match_expect_pointwise(self):
        rng = random.Random(3)
        values = [50.0 + rng.gauss(0, 5) for _ in range(60)]
        frame = frame_of(values)
        cfg = ExpectationConfig()
        points = score_stream(frame, cfg, (frame.points[7][0], frame.points[-1][0]))
        for p in points[::7]:
            expected, dispersion = expect(frame, cfg, p.time_value)
            assert p.expected == pytest.approx(expected, rel=1e-12)
            assert p.dispersion == pytest.approx(dispersion, rel=1e-12)
            assert p.score == pytest.approx(abs(p.value - expected) / dispersion, rel=1e-12)

    def test_empty_horizon(self):
        frame = frame_of([1.0] * 20)
        assert score_stream(frame, ExpectationConfig(), (JAN + timedelta(days=5), JAN)) == []

    def test_horizon_outside_span_rejected(self):
        frame = frame_of([1.0] * 20)
        with pytest.raises(ValueError):
            score_stream(frame, ExpectationConfig(), (JAN, JAN + timedelta(days=365)))

    def test_insufficient_history_propagates(self):
        frame = frame_of([1.0] * 20)
        with pytest.raises(InsufficientDataError):
            score_stream(frame, ExpectationConfig(), (JAN, frame.points[-1][0]))

    def test_causality_truncation_invariance(self):
        rng = random.Random(11)
        values = [100.0 + rng.gauss(0, 10) for _ in range(80)]
        frame = frame_of(values)
        cfg = ExpectationConfig()
        cut = frame.points[50][0]
        scorable_start = frame.points[7][0]
        full = score_stream(frame, cfg, (scorable_start, cut))
        truncated_frame = StreamFrame(
            key=frame.key,
            as_of=cut,
            points=frame.points[:51],
            window_days=frame.window_days,
        )
        truncated = score_stream(truncated_frame, cfg, (scorable_start, cut))
        assert [(p.time_value, p.score) for p in full] == [
            (p.time_value, p.score) for p in truncated
        ]

    def test_affine_invariance_when_floors_disengaged(self):
        rng = random.Random(5)
        values = [1000.0 + rng.gauss(0, 80) for _ in range(60)]
        cfg = ExpectationConfig(dispersion_floor_abs=1e-9, dispersion_floor_rel=0.0)
        horizon = (JAN + timedelta(days=7), JAN + timedelta(days=59))
        base = score_stream(frame_of(values), cfg, horizon)
        scaled = score_stream(frame_of([3.5 * v + 200.0 for v in values]), cfg, horizon)
        for a, b in zip(base, scaled):
            assert b.score == pytest.approx(a.score, rel=1e-9)


class TestInterpolation:
    def test_short_gap_filled_linearly(self):
        pairs = [(i, 10.0) for i in range(8)] + [(10, 16.0)]
        frame = sparse_frame(pairs)
        cfg = ExpectationConfig(interpolation="linear_max_gap_3")
        expected, _ = expect(frame, cfg, JAN + timedelta(days=10))
        # Gap days 8, 9 interpolate to 12 and 14; trailing window is
        # [10]*8 + [12, 14].
        assert expected == statistics.median([10.0] * 8 + [12.0, 14.0])

    def test_long_gap_left_open(self):
        pairs = [(i, 10.0) for i in range(8)] + [(13, 16.0)]
        frame = sparse_frame(pairs)
        cfg = ExpectationConfig(interpolation="linear_max_gap_3")
        expected, _ = expect(frame, cfg, JAN + timedelta(days=13))
        assert expected == 10.0

    def test_expect_and_score_agree_on_interpolated_series(self):
        rng = random.Random(8)
        pairs = []
        day = 0
        for _ in range(40):
            pairs.append((day, 200.0 + rng.gauss(0, 12)))
            day += rng.choice([1, 1, 1, 2, 3])
        frame = sparse_frame(pairs)
        cfg = ExpectationConfig(interpolation="linear_max_gap_3")
        start = frame.points[12][0]
        points = score_stream(frame, cfg, (start, frame.points[-1][0]))
        for p in points[::5]:
            expected, dispersion = expect(frame, cfg, p.time_value)
            assert p.expected == pytest.approx(expected, rel=1e-12)
            assert p.dispersion == pytest.approx(dispersion, rel=1e-12)

    def test_interpolated_points_are_not_scored(self):
        pairs = [(i, 10.0) for i in range(8)] + [(10, 16.0)]
        frame = sparse_frame(pairs)
        cfg = ExpectationConfig(interpolation="linear_max_gap_3")
        points = score_stream(frame, cfg, (JAN + timedelta(days=7), JAN + timedelta(days=10)))
        assert [p.time_value for p in points] == [
            JAN + timedelta(days=7),
            JAN + timedelta(days=10),
        ]


def scored_fixture(rng: random.Random, n: int) -> dict[StreamKey, list[ScoredPoint]]:
    """Random per-stream score lists with deliberate peak-score ties."""
    streams: dict[StreamKey, list[ScoredPoint]] = {}
    for i in range(n):
        key = StreamKey(f"prov{i % 7}", f"sig{i % 11}", "county", f"g{i:04d}")
        points = []
        for j in range(rng.randint(1, 12)):
            score = float(rng.choice([rng.uniform(0, 10), rng.randint(0, 5)]))
            points.append(
                ScoredPoint(
                    key=key,
                    time_value=JAN + timedelta(days=j),
                    value=0.0,
                    expected=0.0,
                    dispersion=1.0,
                    score=score,
                )
            )
        streams[key] = points
    return streams


def brute_force_rank(streams: dict[StreamKey, list[ScoredPoint]], k: int) -> list[StreamKey]:
    """Full sort then truncate, written independently of the heap path."""
    peaks = []
    for key, points in streams.items():
        best = max(points, key=lambda p: (p.score, p.time_value))
        peaks.append((key, best))
    peaks.sort(key=lambda item: (-item[1].score, -item[1].time_value.toordinal(), item[0]))
    return [key for key, _ in peaks[:k]]


class TestRankStreams:
    def test_basic_ordering(self):
        streams = {}
        for name, peak in [("A", 5.0), ("B", 3.0), ("C", 9.0)]:
            key = StreamKey("prov1", name, "state", "PA")
            streams[key] = [
                ScoredPoint(key, JAN, 0.0, 0.0, 1.0, peak),
            ]
        rows = rank_streams(streams, k=2)
        assert [(r.key.signal, r.rank) for r in rows] == [("C", 1), ("A", 2)]

    def test_equal_peaks_tie_break_by_key(self):
        streams = {}
        for name in ("B", "A"):
            key = StreamKey("prov1", name, "state", "PA")
            streams[key] = [ScoredPoint(key, JAN, 0.0, 0.0, 1.0, 5.0)]
        rows = rank_streams(streams, k=2)
        assert [r.key.signal for r in rows] == ["A", "B"]
        assert rank_streams(streams, k=2) == rows

    def test_recent_peak_wins_tie(self):
        early_key = StreamKey("prov1", "a", "state", "PA")
        late_key = StreamKey("prov1", "z", "state", "PA")
        streams = {
            early_key: [ScoredPoint(early_key, JAN, 0.0, 0.0, 1.0, 5.0)],
            late_key: [ScoredPoint(late_key, JAN + timedelta(days=3), 0.0, 0.0, 1.0, 5.0)],
        }
        rows = rank_streams(streams, k=2)
        assert rows[0].key == late_key

    def test_matches_brute_force_on_random_input(self):
        rng = random.Random(42)
        streams = scored_fixture(rng, 300)
        for k in (1, 10, 50):
            rows = rank_streams(streams, k)
            assert [r.key for r in rows] == brute_force_rank(streams, k)
            assert [r.rank for r in rows] == list(range(1, len(rows) + 1))

    def test_rank_order_invariant_under_increasing_transform(self):
        rng = random.Random(9)
        streams = scored_fixture(rng, 120)
        base = [r.key for r in rank_streams(streams, 40)]
        import math

        transformed = {
            key: [
                ScoredPoint(p.key, p.time_value, p.value, p.expected, p.dispersion,
                            math.expm1(p.score))
                for p in points
            ]
            for key, points in streams.items()
        }
        assert [r.key for r in rank_streams(transformed, 40)] == base

    def test_window_scores_date_ordered(self):
        rng = random.Random(2)
        streams = scored_fixture(rng, 10)
        for row in rank_streams(streams, 10):
            dates = [d for d, _ in row.window_scores]
            assert dates == sorted(dates)

    def test_filter_applies_before_ranking(self, hierarchy):
        from vigil.filters import parse_filter

        streams = {}
        for source, signal, peak in [("prov1", "a", 9.0), ("prov2", "b", 7.0), ("prov1", "c", 5.0)]:
            key = StreamKey(source, signal, "state", "PA")
            streams[key] = [ScoredPoint(key, JAN, 0.0, 0.0, 1.0, peak)]
        rows = rank_streams(streams, 10, parse_filter("source:in:prov1"), hierarchy)
        assert [(r.key.signal, r.rank) for r in rows] == [("a", 1), ("c", 2)]

    def test_k_larger_than_universe(self):
        rng = random.Random(1)
        streams = scored_fixture(rng, 5)
        assert len(rank_streams(streams, 50)) == 5

    def test_empty_input(self):
        assert rank_streams({}, 10) == []


class TestLinearTime:
    def test_doubling_length_less_than_2p5x_time(self):
        import gc

        rng = random.Random(13)
        cfg = ExpectationConfig()

        def run_once(n: int) -> float:
            values = [100.0 + rng.gauss(0, 10) for _ in range(n)]
            frame = StreamFrame(
                key=key_of(),
                as_of=JAN + timedelta(days=n - 1),
                points=tuple((JAN + timedelta(days=i), v) for i, v in enumerate(values)),
                window_days=n + 1,
            )
            horizon = (JAN + timedelta(days=7), JAN + timedelta(days=n - 1))
            best = float("inf")
            for _ in range(5):
                gc.collect()
                gc.disable()
                try:
                    t0 = time.perf_counter()
                    score_stream(frame, cfg, horizon)
                    best = min(best, time.perf_counter() - t0)
                finally:
                    gc.enable()
            return best

        run_once(2_000)  # warm caches
        t_small = run_once(40_000)
        t_big = run_once(80_000)
        assert t_big < 2.5 * t_small
