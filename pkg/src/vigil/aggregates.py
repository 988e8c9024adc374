"""Situational-awareness aggregates over persisted event scores.

Three families: choropleth map values per county, indicator panel scores,
and the per-point evolution of scores across data revisions (an online
mean/variance per reference date, surfaced as a 1D heat-map series).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date
from statistics import stdev
from typing import Iterable, Mapping, Sequence

from .errors import KeyNotFoundError, LeafRegionError
from .results import ResultsStore
from .store import DEFAULT_WINDOW_DAYS, GeoHierarchy, StreamKey, StreamStore

Z_95 = 1.96


@dataclass(frozen=True)
class MapConfig:
    """Aggregation policy for the awareness panels.

    `w` is the log-normalization base; None means "renormalize per run" so
    the hottest cell of the day maps to 1.0. A fixed w keeps color scales
    comparable across days at the cost of possible clamping.
    """

    trailing_days: int = 7
    w: float | None = None
    tiers: tuple[str, ...] = ("county", "state", "nation")

    def __post_init__(self):
        if self.trailing_days < 1:
            raise ValueError("trailing_days must be >= 1")
        if self.w is not None and self.w <= 1:
            raise ValueError("w must be > 1")
        if not self.tiers:
            raise ValueError("tiers must be non-empty")


@dataclass(frozen=True)
class MapCell:
    county: str
    c: float


@dataclass(frozen=True)
class IndicatorScore:
    signal: str
    score: float


@dataclass(frozen=True)
class EvolutionTrack:
    """Online mean/variance of one point's score across data revisions."""

    key: StreamKey
    time_value: date
    n: int = 0
    mean: float = 0.0
    variance: float = 0.0


@dataclass(frozen=True)
class HeatmapSeries:
    key: StreamKey
    dates: tuple[date, ...]
    means: tuple[float, ...]
    avg_variance: float


@dataclass(frozen=True)
class ContextBand:
    geo: tuple[str, str]
    dates: tuple[date, ...]
    mean_of_children: tuple[float, ...]
    ci_low: tuple[float, ...]
    ci_high: tuple[float, ...]


def update_evolution(track: EvolutionTrack, new_score: float) -> EvolutionTrack:
    """Fold one more revision's score into the track (Welford update).

    Variance is the population form (sum of squared deviations over n),
    which a two-pass computation over all scores seen reproduces exactly.
    """
    if not math.isfinite(new_score):
        raise ValueError("score must be finite")
    n = track.n + 1
    delta = new_score - track.mean
    mean = track.mean + delta / n
    m2 = track.variance * track.n + delta * (new_score - mean)
    return EvolutionTrack(
        key=track.key,
        time_value=track.time_value,
        n=n,
        mean=mean,
        variance=m2 / n,
    )


def _mean_scores_by_stream(
    rows: Iterable[tuple[str, str, str, str, float]],
) -> dict[tuple[str, str, str], float]:
    """Mean trailing-window score per (signal, geo_type, geo_value), pooling sources."""
    sums: dict[tuple[str, str, str], list[float]] = {}
    for _source, signal, geo_type, geo_value, score in rows:
        acc = sums.setdefault((signal, geo_type, geo_value), [0.0, 0])
        acc[0] += score
        acc[1] += 1
    return {k: total / count for k, (total, count) in sums.items()}


def choropleth_from_means(
    sbar: Mapping[tuple[str, str, str], float],
    county_ancestors: Mapping[str, Mapping[str, str]],
    indicators: Sequence[str],
    cfg: MapConfig,
    w: float | None = None,
) -> list[MapCell]:
    """Map color values from per-(indicator, tier, region) mean scores.

    For each county the mean over tiers of the mean over indicators of
    log(mean score + 1) / log(w), clamped into [0, 1]. Streams absent from
    `sbar` contribute 0, keeping the tier and indicator denominators fixed.
    """
    if w is None:
        w = cfg.w
    if w is None:
        peak = max(sbar.values(), default=0.0)
        w = 1.0 + peak if peak > 0 else 2.0
    log_w = math.log(w)
    indicators = sorted(indicators)
    cells = []
    for county in sorted(county_ancestors):
        ancestors = county_ancestors[county]
        tier_total = 0.0
        for tier in cfg.tiers:
            region = ancestors.get(tier)
            if region is None:
                continue
            ind_total = 0.0
            for signal in indicators:
                mean_score = max(sbar.get((signal, tier, region), 0.0), 0.0)
                ind_total += math.log(mean_score + 1.0) / log_w
            tier_total += ind_total / len(indicators) if indicators else 0.0
        c = tier_total / len(cfg.tiers)
        cells.append(MapCell(county=county, c=min(1.0, max(0.0, c))))
    return cells


def _county_ancestors(
    hierarchy: GeoHierarchy, tiers: Sequence[str]
) -> dict[str, dict[str, str]]:
    out: dict[str, dict[str, str]] = {}
    for county in hierarchy.counties():
        ancestors = {}
        for tier in tiers:
            code = hierarchy.ancestor_at(county.geo_type, county.geo_value, tier)
            if code is not None:
                ancestors[tier] = code
        out[county.geo_value] = ancestors
    return out


def choropleth_scores(
    results: ResultsStore,
    hierarchy: GeoHierarchy,
    as_of: date,
    indicators: Sequence[str],
    cfg: MapConfig,
) -> list[MapCell]:
    """County map values for the `as_of` run; requires the run to exist."""
    results.require_run(as_of)
    sbar = _mean_scores_by_stream(results.window_scores(as_of, cfg.trailing_days))
    return choropleth_from_means(
        sbar, _county_ancestors(hierarchy, cfg.tiers), indicators, cfg
    )


def indicator_scores(
    results: ResultsStore,
    as_of: date,
    regions: Sequence[tuple[str, str]],
    cfg: MapConfig,
    indicators: Sequence[str] | None = None,
) -> list[IndicatorScore]:
    """Per-indicator mean of regional trailing-window mean scores, descending.

    With `indicators` unset the run's own signals form the panel; an
    explicitly listed indicator with no data anywhere scores 0.
    """
    results.require_run(as_of)
    sbar = _mean_scores_by_stream(results.window_scores(as_of, cfg.trailing_days))
    signals = sorted(indicators) if indicators is not None else sorted(
        {signal for (signal, _, _) in sbar}
    )
    out = []
    for signal in signals:
        total = sum(sbar.get((signal, t, v), 0.0) for (t, v) in regions)
        out.append(IndicatorScore(signal=signal, score=total / len(regions) if regions else 0.0))
    out.sort(key=lambda s: (-s.score, s.signal))
    return out


def evolution_heatmap(results: ResultsStore, key: StreamKey, as_of: date) -> HeatmapSeries:
    """Per-date score evolution across revisions, for the row's 1D strip.

    Each date's track replays that point's scores from successive runs
    through the online update; the tag value is the mean of per-date
    variances.
    """
    history = results.scores_of_key(key, as_of)
    if not history:
        raise KeyNotFoundError(f"no scored history for {key}")
    dates = sorted(history)
    means = []
    variances = []
    for d in dates:
        track = EvolutionTrack(key=key, time_value=d)
        for _as_of, score in history[d]:
            track = update_evolution(track, score)
        means.append(track.mean)
        variances.append(track.variance)
    return HeatmapSeries(
        key=key,
        dates=tuple(dates),
        means=tuple(means),
        avg_variance=sum(variances) / len(variances),
    )


def export_map_csv(cells: Sequence[MapCell]) -> str:
    """Delimited `county,c` rows for offline inspection."""
    lines = ["county,c"]
    lines += [f"{cell.county},{cell.c!r}" for cell in cells]
    return "\n".join(lines) + "\n"


def export_indicators_csv(scores: Sequence[IndicatorScore]) -> str:
    """Delimited `signal,score` rows for offline inspection."""
    lines = ["signal,score"]
    lines += [f"{s.signal},{s.score!r}" for s in scores]
    return "\n".join(lines) + "\n"


def context_band(
    store: StreamStore,
    hierarchy: GeoHierarchy,
    source: str,
    signal: str,
    geo: tuple[str, str],
    as_of: date,
    window_days: int = DEFAULT_WINDOW_DAYS,
    z: float = Z_95,
) -> ContextBand:
    """Mean of child-region values with a normal-approximation CI band.

    Dates where a single child reports get a zero-width band.
    """
    relatives = hierarchy.relatives(*geo)
    if not relatives.children:
        raise LeafRegionError(f"region {geo} has no child regions")
    per_date: dict[date, list[float]] = {}
    for child in relatives.children:
        key = StreamKey(source, signal, child.geo_type, child.geo_value)
        try:
            frame = store.latest_frame(key, as_of, window_days)
        except KeyNotFoundError:
            continue
        for d, v in frame.points:
            per_date.setdefault(d, []).append(v)
    if not per_date:
        raise LeafRegionError(f"no child of {geo} has data for {source}:{signal}")
    dates = sorted(per_date)
    means, lows, highs = [], [], []
    for d in dates:
        values = per_date[d]
        n = len(values)
        mean = sum(values) / n
        half = z * stdev(values) / math.sqrt(n) if n > 1 else 0.0
        means.append(mean)
        lows.append(mean - half)
        highs.append(mean + half)
    return ContextBand(
        geo=tuple(geo),
        dates=tuple(dates),
        mean_of_children=tuple(means),
        ci_low=tuple(lows),
        ci_high=tuple(highs),
    )
