"""HTTP query surface over the stores: rankings, context, panels, triage.

Every read endpoint answers from a single store snapshot (per-request
connections over atomically written runs), and responses carry the as_of
and run id so clients can detect staleness.
"""

from __future__ import annotations

from datetime import date
from typing import Any, Mapping

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .aggregates import (
    choropleth_scores,
    context_band,
    evolution_heatmap,
    indicator_scores,
)
from .config import ServiceConfig
from .errors import (
    EmptyRunError,
    FilterParseError,
    KeyNotFoundError,
    LeafRegionError,
    RecordNotFoundError,
    UnknownRegionError,
    ValidationError,
)
from .filters import parse_filter
from .ranking import ScoredPoint, rank_streams
from .results import ResultsStore
from .store import GeoHierarchy, StreamKey, StreamStore
from .triage import MetaEvent, TriageRecord, TriageStore


class EventDraft(BaseModel):
    reviewer: str
    key: str
    time_value: date
    as_of: date
    event_type: str
    severity: str
    is_source: bool
    note: str = ""
    other_label: str = ""
    created_at: str | None = None


class EventPatch(BaseModel):
    event_type: str | None = None
    severity: str | None = None
    is_source: bool | None = None
    note: str | None = None
    other_label: str | None = None
    edited_at: str | None = None


class MetaEventDraft(BaseModel):
    reviewer: str
    title: str
    hypothesis: str = ""
    member_event_ids: list[int]
    created_at: str | None = None


class SessionEntryIn(BaseModel):
    ts: str
    action: str
    payload: dict[str, Any] = Field(default_factory=dict)


class SessionLogIn(BaseModel):
    session_id: str
    reviewer: str = ""
    entries: list[SessionEntryIn]


def _record_json(record: TriageRecord) -> dict[str, Any]:
    return {
        "id": record.id,
        "reviewer": record.reviewer,
        "key": str(record.key),
        "time_value": record.time_value.isoformat(),
        "event_type": record.event_type,
        "other_label": record.other_label,
        "severity": record.severity,
        "is_source": record.is_source,
        "note": record.note,
        "created_at": record.created_at,
        "edited_at": record.edited_at,
        "edit_count": record.edit_count,
    }


def _meta_json(meta: MetaEvent) -> dict[str, Any]:
    return {
        "id": meta.id,
        "reviewer": meta.reviewer,
        "title": meta.title,
        "hypothesis": meta.hypothesis,
        "member_event_ids": list(meta.member_event_ids),
        "created_at": meta.created_at,
    }


def _series_json(points) -> dict[str, Any]:
    return {
        "dates": [d.isoformat() for d, _ in points],
        "values": [v for _, v in points],
    }


def create_app(
    cfg: ServiceConfig,
    *,
    streams: StreamStore | None = None,
    results: ResultsStore | None = None,
    triage: TriageStore | None = None,
    hierarchy: GeoHierarchy | None = None,
) -> FastAPI:
    streams = streams or StreamStore(cfg.streams_db)
    results = results or ResultsStore(cfg.results_db)
    triage = triage or TriageStore(cfg.triage_db)
    hierarchy = hierarchy or GeoHierarchy.from_csv(cfg.geo_file)

    app = FastAPI(title="vigil monitor service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    panels_cache: dict[str, dict[str, Any]] = {}

    def _not_found(_request: Request, exc: Exception) -> JSONResponse:
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    for exc_type in (EmptyRunError, KeyNotFoundError, UnknownRegionError, RecordNotFoundError):
        app.add_exception_handler(exc_type, _not_found)

    def _bad_filter(_request: Request, exc: FilterParseError) -> JSONResponse:
        return JSONResponse(
            status_code=400, content={"detail": str(exc), "position": exc.position}
        )

    app.add_exception_handler(FilterParseError, _bad_filter)

    def _bad_input(_request: Request, exc: Exception) -> JSONResponse:
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    app.add_exception_handler(ValidationError, _bad_input)

    def parse_key(text: str) -> StreamKey:
        try:
            return StreamKey.parse(text)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None

    @app.get("/rankings")
    def rankings(
        as_of: date,
        k: int | None = None,
        filter: str | None = Query(default=None),
    ) -> dict[str, Any]:
        if k is not None and k < 1:
            raise HTTPException(status_code=400, detail="k must be >= 1")
        info = results.require_run(as_of)
        spec = parse_filter(filter) if filter else None
        scored: dict[StreamKey, list[ScoredPoint]] = {}
        for key, points in results.stream_rows(as_of):
            scored[key] = [
                ScoredPoint(
                    key=key,
                    time_value=d,
                    value=0.0,
                    expected=expected,
                    dispersion=dispersion,
                    score=score,
                    violated_bound=violated,
                )
                for d, score, expected, dispersion, violated in points
            ]
        rows = rank_streams(scored, k or cfg.k_default, spec, hierarchy)
        payload = []
        for row in rows:
            try:
                summary = evolution_heatmap(results, row.key, as_of)
                avg_variance = summary.avg_variance
                evolution = {
                    "dates": [d.isoformat() for d in summary.dates],
                    "means": list(summary.means),
                }
            except KeyNotFoundError:
                avg_variance = 0.0
                evolution = {"dates": [], "means": []}
            window_dates = {d for d, _ in row.window_scores}
            attached = [
                _record_json(r)
                for r in triage.events_for_stream(row.key)
                if r.time_value in window_dates
            ]
            try:
                display_name = hierarchy.display_name(row.key.geo_type, row.key.geo_value)
                geo_path = hierarchy.geo_path(row.key.geo_type, row.key.geo_value)
            except UnknownRegionError:
                display_name = row.key.geo_value
                geo_path = row.key.geo_value
            payload.append(
                {
                    "rank": row.rank,
                    "key": str(row.key),
                    "source": row.key.source,
                    "signal": row.key.signal,
                    "geo_type": row.key.geo_type,
                    "geo_value": row.key.geo_value,
                    "display_name": display_name,
                    "geo_path": geo_path,
                    "peak": {
                        "time_value": row.peak.time_value.isoformat(),
                        "score": row.peak.score,
                        "expected": row.peak.expected,
                        "dispersion": row.peak.dispersion,
                        "violated_bound": row.peak.violated_bound,
                    },
                    "window_scores": [
                        {"date": d.isoformat(), "score": s} for d, s in row.window_scores
                    ],
                    "avg_variance": avg_variance,
                    "evolution": evolution,
                    "triage": attached,
                }
            )
        return {"as_of": as_of.isoformat(), "run_id": info.run_id, "rows": payload}

    @app.get("/streams/{key}/context")
    def stream_context(key: str, as_of: date) -> dict[str, Any]:
        stream_key = parse_key(key)
        frame = streams.latest_frame(stream_key, as_of, cfg.window_days)
        relatives = hierarchy.relatives(stream_key.geo_type, stream_key.geo_value)
        body: dict[str, Any] = {
            "as_of": as_of.isoformat(),
            "key": str(stream_key),
            "self": _series_json(frame.points),
            "parent": None,
            "siblings": [],
            "children": None,
        }
        if relatives.parent is not None:
            parent_key = StreamKey(
                stream_key.source,
                stream_key.signal,
                relatives.parent.geo_type,
                relatives.parent.geo_value,
            )
            try:
                parent_frame = streams.latest_frame(parent_key, as_of, cfg.window_days)
                body["parent"] = {"key": str(parent_key), **_series_json(parent_frame.points)}
            except KeyNotFoundError:
                pass
        for sibling in relatives.siblings:
            sibling_key = StreamKey(
                stream_key.source, stream_key.signal, sibling.geo_type, sibling.geo_value
            )
            try:
                sib_frame = streams.latest_frame(sibling_key, as_of, cfg.window_days)
            except KeyNotFoundError:
                continue
            body["siblings"].append({"key": str(sibling_key), **_series_json(sib_frame.points)})
        if relatives.children:
            try:
                band = context_band(
                    streams,
                    hierarchy,
                    stream_key.source,
                    stream_key.signal,
                    (stream_key.geo_type, stream_key.geo_value),
                    as_of,
                    cfg.window_days,
                )
                body["children"] = {
                    "dates": [d.isoformat() for d in band.dates],
                    "mean": list(band.mean_of_children),
                    "ci_low": list(band.ci_low),
                    "ci_high": list(band.ci_high),
                }
            except LeafRegionError:
                body["children"] = None
        return body

    @app.get("/streams/{key}/evolution")
    def stream_evolution(key: str, as_of: date) -> dict[str, Any]:
        stream_key = parse_key(key)
        summary = evolution_heatmap(results, stream_key, as_of)
        return {
            "key": str(stream_key),
            "as_of": as_of.isoformat(),
            "dates": [d.isoformat() for d in summary.dates],
            "means": list(summary.means),
            "avg_variance": summary.avg_variance,
        }

    @app.get("/panels")
    def panels(as_of: date) -> dict[str, Any]:
        info = results.require_run(as_of)
        if info.run_id in panels_cache:
            return panels_cache[info.run_id]
        indicators = results.signals(as_of)
        cells = choropleth_scores(results, hierarchy, as_of, indicators, cfg.map)
        scores = indicator_scores(results, as_of, results.regions(as_of), cfg.map, indicators)
        body = {
            "as_of": as_of.isoformat(),
            "run_id": info.run_id,
            "map": [{"county": c.county, "c": c.c} for c in cells],
            "indicators": [{"signal": s.signal, "score": s.score} for s in scores],
        }
        panels_cache.clear()
        panels_cache[info.run_id] = body
        return body

    @app.post("/events", status_code=201)
    def post_event(draft: EventDraft) -> dict[str, Any]:
        record = triage.record_event(
            reviewer=draft.reviewer,
            key=parse_key(draft.key),
            time_value=draft.time_value,
            event_type=draft.event_type,
            severity=draft.severity,
            is_source=draft.is_source,
            note=draft.note,
            other_label=draft.other_label,
            created_at=draft.created_at,
            results=results,
            as_of=draft.as_of,
        )
        return _record_json(record)

    @app.patch("/events/{event_id}")
    def patch_event(event_id: int, patch: EventPatch) -> dict[str, Any]:
        fields: Mapping[str, Any] = {
            name: value
            for name, value in patch.model_dump().items()
            if value is not None and name != "edited_at"
        }
        record = triage.edit_event(event_id, fields, edited_at=patch.edited_at)
        return _record_json(record)

    @app.post("/meta-events", status_code=201)
    def post_meta_event(draft: MetaEventDraft) -> dict[str, Any]:
        meta = triage.record_meta_event(
            reviewer=draft.reviewer,
            title=draft.title,
            hypothesis=draft.hypothesis,
            member_event_ids=draft.member_event_ids,
            created_at=draft.created_at,
        )
        return _meta_json(meta)

    @app.post("/sessions/log")
    def post_session_log(body: SessionLogIn) -> dict[str, Any]:
        count = triage.add_session_entries(
            body.session_id,
            body.reviewer,
            [(e.ts, e.action, e.payload) for e in body.entries],
        )
        return {"session_id": body.session_id, "imported": count}

    @app.get("/kpis")
    def kpis(
        start: date = Query(alias="from"),
        end: date = Query(alias="to"),
    ) -> dict[str, Any]:
        report = triage.compute_kpis((start, end))
        return {
            "period": {"from": start.isoformat(), "to": end.isoformat()},
            "time_per_row": {
                "mean_sec": report.time_per_row.mean,
                "ci_low": report.time_per_row.ci_low,
                "ci_high": report.time_per_row.ci_high,
            },
            "events_per_session": {
                "mean": report.events_per_session.mean,
                "ci_low": report.events_per_session.ci_low,
                "ci_high": report.events_per_session.ci_high,
            },
            "events_per_minute": report.events_per_minute,
            "edits": report.edits,
            "meta_events": report.meta_events,
            "pct_not_source": report.pct_not_source,
            "filter_uses_per_day": {
                "mean": report.filter_uses_per_day.mean,
                "sd": report.filter_uses_per_day.sd,
            },
            "predicates_per_filter": report.predicates_per_filter,
            "characterization": [
                {"event_type": et, "severity": sev, "count": count}
                for (et, sev), count in sorted(report.characterization.items())
            ],
        }

    return app
