"""Ranking-based monitoring for revisioned, hierarchical public-health time series."""

from .aggregates import (
    ContextBand,
    EvolutionTrack,
    HeatmapSeries,
    IndicatorScore,
    MapCell,
    MapConfig,
    choropleth_from_means,
    choropleth_scores,
    context_band,
    evolution_heatmap,
    indicator_scores,
    update_evolution,
)
from .config import ExpectationPolicy, ServiceConfig, load_service_config
from .errors import (
    EmptyRunError,
    FilterParseError,
    InsufficientDataError,
    KeyNotFoundError,
    LeafRegionError,
    RecordNotFoundError,
    UnknownRegionError,
    ValidationError,
    VigilError,
)
from .filters import FilterSpec, Predicate, apply_filter, parse_filter
from .ranking import (
    ExpectationConfig,
    RankedRow,
    ScoredPoint,
    expect,
    rank_streams,
    score_stream,
)
from .results import ResultsStore, RunInfo
from .runner import RunReport, run_daily
from .store import (
    GeoHierarchy,
    GeoNode,
    IngestReport,
    Observation,
    StreamFrame,
    StreamKey,
    StreamStore,
)
from .triage import KpiReport, MetaEvent, SessionEntry, TriageRecord, TriageStore

__version__ = "0.1.0"

__all__ = [
    "ContextBand",
    "EvolutionTrack",
    "EmptyRunError",
    "ExpectationConfig",
    "ExpectationPolicy",
    "FilterParseError",
    "FilterSpec",
    "GeoHierarchy",
    "GeoNode",
    "HeatmapSeries",
    "IndicatorScore",
    "IngestReport",
    "InsufficientDataError",
    "KeyNotFoundError",
    "KpiReport",
    "LeafRegionError",
    "MapCell",
    "MapConfig",
    "MetaEvent",
    "Observation",
    "Predicate",
    "RankedRow",
    "RecordNotFoundError",
    "ResultsStore",
    "RunInfo",
    "RunReport",
    "ScoredPoint",
    "ServiceConfig",
    "SessionEntry",
    "StreamFrame",
    "StreamKey",
    "StreamStore",
    "TriageRecord",
    "TriageStore",
    "UnknownRegionError",
    "ValidationError",
    "VigilError",
    "apply_filter",
    "choropleth_from_means",
    "choropleth_scores",
    "context_band",
    "evolution_heatmap",
    "expect",
    "indicator_scores",
    "load_service_config",
    "parse_filter",
    "rank_streams",
    "run_daily",
    "score_stream",
    "update_evolution",
]
