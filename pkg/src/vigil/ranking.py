"""Event scoring and top-k ranking of data streams.

Every data point gets a nonnegative event score: its deviation from a
stream-local expectation, in units of a robust dispersion estimate. Scores
are comparable across streams, which raw values are not, so a single
ranked queue can cover every stream in the system. The expectation model
is pluggable; the default is a trailing median with an MAD-based scale.
"""

from __future__ import annotations

import heapq
from bisect import bisect_left
from dataclasses import dataclass
from datetime import date, timedelta
from typing import Iterable, Mapping, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InsufficientDataError
from .filters import FilterSpec, apply_filter
from .store import GeoHierarchy, StreamFrame, StreamKey

MODELS = ("rolling_robust", "rolling_gaussian", "last_value")

INTERPOLATIONS = ("none", "linear_max_gap_3")

# Minimum trailing points (after interpolation) needed to score a date.
MIN_HISTORY = 7

# Scales MAD to the standard deviation of a normal distribution.
MAD_SCALE = 1.4826

# Last-resort positive dispersion when both floors are configured to zero
# and the window is constant; keeps scores finite.
DISPERSION_EPS = 1e-12


@dataclass(frozen=True)
class ExpectationConfig:
    """Reviewer-tunable definition of "expected" for a stream family."""

    model: str = "rolling_robust"
    train_window: int = 28
    dispersion_floor_abs: float = 1.0
    dispersion_floor_rel: float = 0.01
    interpolation: str = "none"
    bounds: tuple[float | None, float | None] | None = None
    max_day_change: float | None = None

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model: {self.model!r}")
        if self.train_window < MIN_HISTORY:
            raise ValueError(f"train_window must be >= {MIN_HISTORY}")
        if self.dispersion_floor_abs < 0 or self.dispersion_floor_rel < 0:
            raise ValueError("dispersion floors must be nonnegative")
        if self.interpolation not in INTERPOLATIONS:
            raise ValueError(f"unknown interpolation: {self.interpolation!r}")
        if self.bounds is not None:
            lo, hi = self.bounds
            if lo is not None and hi is not None and lo > hi:
                raise ValueError("bounds.min must be <= bounds.max")
        if self.max_day_change is not None and self.max_day_change < 0:
            raise ValueError("max_day_change must be nonnegative")


@dataclass(frozen=True)
class ScoredPoint:
    key: StreamKey
    time_value: date
    value: float
    expected: float
    dispersion: float
    score: float
    violated_bound: bool = False


@dataclass(frozen=True)
class RankedRow:
    """One stream's row in the review queue, anchored at its peak-score point."""

    key: StreamKey
    peak: ScoredPoint
    rank: int
    window_scores: tuple[tuple[date, float], ...]


def _augment(
    frame: StreamFrame, cfg: ExpectationConfig
) -> tuple[list[date], np.ndarray, np.ndarray]:
    """Frame points plus any interpolated fill, as parallel arrays.

    Returns (dates, values, observed_mask); interpolated points count as
    history for expectations but are never scored themselves.
    """
    if cfg.interpolation == "none" or len(frame.points) < 2:
        dates = [p[0] for p in frame.points]
        values = np.array([p[1] for p in frame.points], dtype=np.float64)
        return dates, values, np.ones(len(dates), dtype=bool)
    dates: list[date] = []
    values: list[float] = []
    observed: list[bool] = []
    pts = frame.points
    for i, (d, v) in enumerate(pts):
        if i > 0:
            prev_d, prev_v = pts[i - 1]
            gap = (d - prev_d).days - 1
            if 1 <= gap <= 3:
                for step in range(1, gap + 1):
                    frac = step / (gap + 1)
                    dates.append(prev_d + timedelta(days=step))
                    values.append(prev_v + frac * (v - prev_v))
                    observed.append(False)
        dates.append(d)
        values.append(v)
        observed.append(True)
    return dates, np.array(values, dtype=np.float64), np.array(observed, dtype=bool)


def _median_sorted(ordered: list[float]) -> float:
    n = len(ordered)
    mid = n // 2
    if n % 2:
        return ordered[mid]
    return 0.5 * (ordered[mid - 1] + ordered[mid])


def _window_stats(window, cfg: ExpectationConfig) -> tuple[float, float]:
    values = [float(v) for v in window]
    if cfg.model == "rolling_robust":
        center = _median_sorted(sorted(values))
        spread = MAD_SCALE * _median_sorted(sorted(abs(v - center) for v in values))
    elif cfg.model == "rolling_gaussian":
        center = sum(values) / len(values)
        if len(values) > 1:
            ss = sum((v - center) ** 2 for v in values)
            spread = (ss / (len(values) - 1)) ** 0.5
        else:
            spread = 0.0
    else:
        center = values[-1]
        spread = 0.0
    return center, spread


def _floor(spread, center, cfg: ExpectationConfig):
    return np.maximum.reduce(
        [
            np.asarray(spread, dtype=np.float64),
            np.full_like(np.asarray(spread, dtype=np.float64), cfg.dispersion_floor_abs),
            cfg.dispersion_floor_rel * np.abs(center),
            np.full_like(np.asarray(spread, dtype=np.float64), DISPERSION_EPS),
        ]
    )


def _expectations(values: np.ndarray, cfg: ExpectationConfig) -> tuple[np.ndarray, np.ndarray]:
    """Trailing expectation and dispersion per index; NaN where history < MIN_HISTORY.

    The window at index i is the last min(train_window, i) values strictly
    before i, so scoring is causal by construction.
    """
    n = len(values)
    expected = np.full(n, np.nan)
    spread = np.full(n, np.nan)
    w = cfg.train_window
    head_end = min(w, n)
    for i in range(MIN_HISTORY, head_end):
        expected[i], spread[i] = _window_stats(values[:i], cfg)
    if n > w:
        windows = sliding_window_view(values, w)[: n - w]
        if cfg.model == "rolling_robust":
            med = np.median(windows, axis=1)
            mad = np.median(np.abs(windows - med[:, None]), axis=1)
            expected[w:] = med
            spread[w:] = MAD_SCALE * mad
        elif cfg.model == "rolling_gaussian":
            expected[w:] = np.mean(windows, axis=1)
            spread[w:] = np.std(windows, axis=1, ddof=1)
        else:
            expected[w:] = values[w - 1 : n - 1]
            spread[w:] = 0.0
    dispersion = _floor(spread, expected, cfg)
    dispersion[np.isnan(spread)] = np.nan
    return expected, dispersion


def _day_change_violations(
    dates: Sequence[date], values: np.ndarray, cfg: ExpectationConfig
) -> np.ndarray:
    """Bound and day-over-day plausibility violations per index."""
    n = len(values)
    violated = np.zeros(n, dtype=bool)
    if cfg.bounds is not None:
        lo, hi = cfg.bounds
        if lo is not None:
            violated |= values < lo
        if hi is not None:
            violated |= values > hi
    if cfg.max_day_change is not None and n > 1:
        prev = values[:-1]
        # Relative change against the prior day; unit denominator guards
        # zero-valued count streams.
        rel = np.abs(values[1:] - prev) / np.maximum(np.abs(prev), 1.0)
        adjacent = np.array(
            [(dates[i] - dates[i - 1]).days == 1 for i in range(1, n)], dtype=bool
        )
        violated[1:] |= adjacent & (rel > cfg.max_day_change)
    return violated


def expect(frame: StreamFrame, cfg: ExpectationConfig, at: date) -> tuple[float, float]:
    """Expected value and dispersion for `at`, from strictly trailing data."""
    if not frame.points or not (frame.points[0][0] <= at <= frame.points[-1][0]):
        raise ValueError(f"date {at} outside frame span")
    dates, values, _ = _augment(frame, cfg)
    idx = bisect_left(dates, at)
    if idx < MIN_HISTORY:
        raise InsufficientDataError(
            f"{frame.key}: {idx} points before {at}, need {MIN_HISTORY}"
        )
    window = values[max(0, idx - cfg.train_window) : idx]
    center, spread = _window_stats(window, cfg)
    dispersion = float(_floor(spread, center, cfg))
    return center, dispersion


def score_stream(
    frame: StreamFrame, cfg: ExpectationConfig, horizon: tuple[date, date]
) -> list[ScoredPoint]:
    """Score every observed point of the frame inside `horizon`.

    Each point is scored against its own trailing expectation; a bound or
    day-change violation promotes the point's score above every
    non-violating score in the horizon.
    """
    start, end = horizon
    if start > end:
        return []
    if not frame.points:
        raise ValueError("cannot score an empty frame")
    if start < frame.points[0][0] or end > frame.points[-1][0]:
        raise ValueError("horizon must lie within the frame span")
    dates, values, observed = _augment(frame, cfg)
    expected, dispersion = _expectations(values, cfg)
    violated = _day_change_violations(dates, values, cfg)
    target = [
        i for i, d in enumerate(dates) if observed[i] and start <= d <= end
    ]
    if not target:
        return []
    if target[0] < MIN_HISTORY:
        raise InsufficientDataError(
            f"{frame.key}: {target[0]} points before {dates[target[0]]}, need {MIN_HISTORY}"
        )
    raw = np.abs(values - expected) / dispersion
    non_violating = [raw[i] for i in target if not violated[i]]
    promotion = 1.0 + (max(non_violating) if non_violating else 0.0)
    points = []
    for i in target:
        score = float(raw[i])
        if violated[i]:
            score = max(score, float(promotion))
        points.append(
            ScoredPoint(
                key=frame.key,
                time_value=dates[i],
                value=float(values[i]),
                expected=float(expected[i]),
                dispersion=float(dispersion[i]),
                score=score,
                violated_bound=bool(violated[i]),
            )
        )
    return points


def _rank_sort_key(row: tuple[StreamKey, ScoredPoint, tuple]):
    key, peak, _ = row
    return (-peak.score, -peak.time_value.toordinal(), key)


def stream_peak(points: Sequence[ScoredPoint]) -> ScoredPoint:
    """Max-score point; equal scores resolve to the most recent date."""
    return max(points, key=lambda p: (p.score, p.time_value))


def rank_streams(
    scored: Mapping[StreamKey, Sequence[ScoredPoint]] | Iterable[Sequence[ScoredPoint]],
    k: int,
    filter_spec: FilterSpec | None = None,
    hierarchy: GeoHierarchy | None = None,
) -> list[RankedRow]:
    """Top-k streams by peak score under a deterministic total order.

    Ties break toward the more recent peak, then the lexicographically
    smaller stream key, so ranking is stable across runs and processes.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if isinstance(scored, Mapping):
        per_stream = [list(points) for points in scored.values() if points]
    else:
        per_stream = [list(points) for points in scored if points]
    if filter_spec is not None:
        allowed = set(
            apply_filter(filter_spec, [pts[0].key for pts in per_stream], hierarchy)
        )
        per_stream = [pts for pts in per_stream if pts[0].key in allowed]
    candidates = []
    for points in per_stream:
        ordered = sorted(points, key=lambda p: p.time_value)
        candidates.append((points[0].key, stream_peak(points), tuple(ordered)))
    top = heapq.nsmallest(k, candidates, key=_rank_sort_key)
    return [
        RankedRow(
            key=key,
            peak=peak,
            rank=rank,
            window_scores=tuple((p.time_value, p.score) for p in ordered),
        )
        for rank, (key, peak, ordered) in enumerate(top, start=1)
    ]
