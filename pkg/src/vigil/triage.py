"""Reviewer triage outputs: event records, meta-events, session logs, KPIs.

Everything here is append-only. Edits never rewrite a record's past:
the prior content moves into a history table and the edit counter
increments, so any earlier state of the store is recoverable.
"""

from __future__ import annotations

import csv
import io
import json
import math
import sqlite3
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from pathlib import Path
from statistics import mean, stdev
from typing import Any, Iterable, Mapping, Sequence, TextIO

from .errors import RecordNotFoundError, ValidationError
from .results import ResultsStore
from .store import StreamKey

EVENT_TYPES = ("data_quality", "public_health", "non_event", "other")

SEVERITIES = ("low", "medium", "high")

ACTIONS = (
    "row_expanded",
    "row_collapsed",
    "event_recorded",
    "filter_applied",
    "panel_viewed",
    "session_end",
)

# Gaps longer than this are idle time, not active review (lunch breaks
# must not deflate events-per-minute).
IDLE_CAP_SECONDS = 600.0

Z_95 = 1.96


@dataclass(frozen=True)
class TriageRecord:
    id: int
    reviewer: str
    key: StreamKey
    time_value: date
    event_type: str
    severity: str
    is_source: bool
    note: str = ""
    other_label: str = ""
    created_at: str = ""
    edited_at: str = ""
    edit_count: int = 0


@dataclass(frozen=True)
class MetaEvent:
    id: int
    reviewer: str
    title: str
    hypothesis: str
    member_event_ids: tuple[int, ...]
    created_at: str = ""


@dataclass(frozen=True)
class SessionEntry:
    ts: datetime
    action: str
    payload: Mapping[str, Any]


@dataclass(frozen=True)
class MeanCI:
    mean: float
    ci_low: float
    ci_high: float


@dataclass(frozen=True)
class MeanSd:
    mean: float
    sd: float


@dataclass
class KpiReport:
    period: tuple[date, date]
    time_per_row: MeanCI = field(default_factory=lambda: MeanCI(0.0, 0.0, 0.0))
    events_per_session: MeanCI = field(default_factory=lambda: MeanCI(0.0, 0.0, 0.0))
    events_per_minute: float = 0.0
    edits: int = 0
    meta_events: int = 0
    pct_not_source: float = 0.0
    filter_uses_per_day: MeanSd = field(default_factory=lambda: MeanSd(0.0, 0.0))
    predicates_per_filter: float = 0.0
    characterization: dict[tuple[str, str], int] = field(default_factory=dict)


def _mean_ci(samples: Sequence[float]) -> MeanCI:
    if not samples:
        return MeanCI(0.0, 0.0, 0.0)
    m = mean(samples)
    half = Z_95 * stdev(samples) / math.sqrt(len(samples)) if len(samples) > 1 else 0.0
    return MeanCI(m, m - half, m + half)


def _parse_ts(value: str | datetime) -> datetime:
    if isinstance(value, datetime):
        ts = value
    else:
        text = value.replace("Z", "+00:00") if isinstance(value, str) else value
        try:
            ts = datetime.fromisoformat(text)
        except (TypeError, ValueError):
            raise ValidationError(f"bad timestamp: {value!r}") from None
    if ts.tzinfo is not None:
        ts = ts.astimezone(timezone.utc).replace(tzinfo=None)
    return ts


def _now_iso() -> str:
    return datetime.now().isoformat(timespec="seconds")


class TriageStore:
    """SQLite store for triage records, meta-events, and session logs."""

    def __init__(self, path: str | Path):
        self.path = str(path)
        self._write_lock = threading.Lock()
        with self._session() as conn:
            conn.executescript(
                """
                CREATE TABLE IF NOT EXISTS events (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    reviewer TEXT NOT NULL,
                    source TEXT NOT NULL,
                    signal TEXT NOT NULL,
                    geo_type TEXT NOT NULL,
                    geo_value TEXT NOT NULL,
                    time_value TEXT NOT NULL,
                    event_type TEXT NOT NULL,
                    other_label TEXT NOT NULL DEFAULT '',
                    severity TEXT NOT NULL,
                    is_source INTEGER NOT NULL,
                    note TEXT NOT NULL DEFAULT '',
                    created_at TEXT NOT NULL,
                    edited_at TEXT NOT NULL,
                    edit_count INTEGER NOT NULL DEFAULT 0
                );
                CREATE TABLE IF NOT EXISTS event_history (
                    event_id INTEGER NOT NULL,
                    version INTEGER NOT NULL,
                    event_type TEXT NOT NULL,
                    other_label TEXT NOT NULL,
                    severity TEXT NOT NULL,
                    is_source INTEGER NOT NULL,
                    note TEXT NOT NULL,
                    replaced_at TEXT NOT NULL,
                    PRIMARY KEY (event_id, version)
                );
                CREATE TABLE IF NOT EXISTS meta_events (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    reviewer TEXT NOT NULL,
                    title TEXT NOT NULL,
                    hypothesis TEXT NOT NULL,
                    created_at TEXT NOT NULL
                );
                CREATE TABLE IF NOT EXISTS meta_event_members (
                    meta_id INTEGER NOT NULL,
                    event_id INTEGER NOT NULL,
                    PRIMARY KEY (meta_id, event_id)
                );
                CREATE TABLE IF NOT EXISTS session_entries (
                    session_id TEXT NOT NULL,
                    reviewer TEXT NOT NULL,
                    ts TEXT NOT NULL,
                    action TEXT NOT NULL,
                    payload TEXT NOT NULL DEFAULT '{}'
                );
                """
            )

    def _connect(self) -> sqlite3.Connection:
        conn = sqlite3.connect(self.path)
        conn.execute("PRAGMA journal_mode=WAL")
        conn.execute("PRAGMA synchronous=NORMAL")
        return conn

    @contextmanager
    def _session(self):
        conn = self._connect()
        try:
            yield conn
            conn.commit()
        except BaseException:
            conn.rollback()
            raise
        finally:
            conn.close()

    # -- triage records -------------------------------------------------

    def record_event(
        self,
        *,
        reviewer: str,
        key: StreamKey,
        time_value: date,
        event_type: str,
        severity: str,
        is_source: bool,
        note: str = "",
        other_label: str = "",
        created_at: str | None = None,
        results: ResultsStore | None = None,
        as_of: date | None = None,
    ) -> TriageRecord:
        """Persist a new triage record.

        When a results store and run date are given, the referenced
        stream/date must have been scored in that run.
        """
        _validate_characterization(event_type, severity, other_label)
        if results is not None and as_of is not None:
            if not results.has_score(key, time_value, as_of):
                raise ValidationError(
                    f"stream {key} has no score for {time_value.isoformat()}"
                    f" in the {as_of.isoformat()} run"
                )
        stamp = created_at or _now_iso()
        with self._write_lock, self._session() as conn:
            cur = conn.execute(
                "INSERT INTO events (reviewer, source, signal, geo_type, geo_value,"
                " time_value, event_type, other_label, severity, is_source, note,"
                " created_at, edited_at, edit_count)"
                " VALUES (?,?,?,?,?,?,?,?,?,?,?,?,?,0)",
                (
                    reviewer,
                    key.source,
                    key.signal,
                    key.geo_type,
                    key.geo_value,
                    time_value.isoformat(),
                    event_type,
                    other_label,
                    severity,
                    int(is_source),
                    note,
                    stamp,
                    stamp,
                ),
            )
            record_id = cur.lastrowid
        record = self.get_event(record_id)
        assert record is not None
        return record

    def get_event(self, record_id: int) -> TriageRecord | None:
        with self._session() as conn:
            row = conn.execute(
                "SELECT id, reviewer, source, signal, geo_type, geo_value, time_value,"
                " event_type, other_label, severity, is_source, note, created_at,"
                " edited_at, edit_count FROM events WHERE id=?",
                (record_id,),
            ).fetchone()
        return _record_from_row(row) if row else None

    def edit_event(self, record_id: int, patch: Mapping[str, Any], edited_at: str | None = None) -> TriageRecord:
        """Apply a patch; the prior content is retained in the history."""
        allowed = {"event_type", "other_label", "severity", "is_source", "note"}
        unknown = set(patch) - allowed
        if unknown:
            raise ValidationError(f"cannot edit fields: {sorted(unknown)}")
        current = self.get_event(record_id)
        if current is None:
            raise RecordNotFoundError(f"no triage record with id {record_id}")
        event_type = patch.get("event_type", current.event_type)
        severity = patch.get("severity", current.severity)
        other_label = patch.get("other_label", current.other_label)
        _validate_characterization(event_type, severity, other_label)
        is_source = bool(patch.get("is_source", current.is_source))
        note = patch.get("note", current.note)
        stamp = edited_at or _now_iso()
        with self._write_lock, self._session() as conn:
            conn.execute("BEGIN IMMEDIATE")
            conn.execute(
                "INSERT INTO event_history (event_id, version, event_type, other_label,"
                " severity, is_source, note, replaced_at) VALUES (?,?,?,?,?,?,?,?)",
                (
                    record_id,
                    current.edit_count,
                    current.event_type,
                    current.other_label,
                    current.severity,
                    int(current.is_source),
                    current.note,
                    stamp,
                ),
            )
            conn.execute(
                "UPDATE events SET event_type=?, other_label=?, severity=?, is_source=?,"
                " note=?, edited_at=?, edit_count=edit_count+1 WHERE id=?",
                (event_type, other_label, severity, int(is_source), note, stamp, record_id),
            )
        updated = self.get_event(record_id)
        assert updated is not None
        return updated

    def event_history(self, record_id: int) -> list[dict[str, Any]]:
        with self._session() as conn:
            rows = conn.execute(
                "SELECT version, event_type, other_label, severity, is_source, note,"
                " replaced_at FROM event_history WHERE event_id=? ORDER BY version",
                (record_id,),
            ).fetchall()
        return [
            {
                "version": r[0],
                "event_type": r[1],
                "other_label": r[2],
                "severity": r[3],
                "is_source": bool(r[4]),
                "note": r[5],
                "replaced_at": r[6],
            }
            for r in rows
        ]

    def events_for_stream(self, key: StreamKey) -> list[TriageRecord]:
        with self._session() as conn:
            rows = conn.execute(
                "SELECT id, reviewer, source, signal, geo_type, geo_value, time_value,"
                " event_type, other_label, severity, is_source, note, created_at,"
                " edited_at, edit_count FROM events"
                " WHERE source=? AND signal=? AND geo_type=? AND geo_value=? ORDER BY id",
                (key.source, key.signal, key.geo_type, key.geo_value),
            ).fetchall()
        return [_record_from_row(r) for r in rows]

    # -- meta-events ------------------------------------------------------

    def record_meta_event(
        self,
        *,
        reviewer: str,
        title: str,
        hypothesis: str,
        member_event_ids: Sequence[int],
        created_at: str | None = None,
    ) -> MetaEvent:
        if not member_event_ids:
            raise ValidationError("meta-event needs at least one member event")
        with self._write_lock, self._session() as conn:
            conn.execute("BEGIN IMMEDIATE")
            for event_id in member_event_ids:
                row = conn.execute(
                    "SELECT 1 FROM events WHERE id=?", (event_id,)
                ).fetchone()
                if row is None:
                    raise ValidationError(f"meta-event references unknown event id {event_id}")
            stamp = created_at or _now_iso()
            cur = conn.execute(
                "INSERT INTO meta_events (reviewer, title, hypothesis, created_at)"
                " VALUES (?,?,?,?)",
                (reviewer, title, hypothesis, stamp),
            )
            meta_id = cur.lastrowid
            conn.executemany(
                "INSERT INTO meta_event_members (meta_id, event_id) VALUES (?,?)",
                [(meta_id, event_id) for event_id in dict.fromkeys(member_event_ids)],
            )
        meta = self.get_meta_event(meta_id)
        assert meta is not None
        return meta

    def get_meta_event(self, meta_id: int) -> MetaEvent | None:
        with self._session() as conn:
            row = conn.execute(
                "SELECT id, reviewer, title, hypothesis, created_at FROM meta_events WHERE id=?",
                (meta_id,),
            ).fetchone()
            if row is None:
                return None
            members = conn.execute(
                "SELECT event_id FROM meta_event_members WHERE meta_id=? ORDER BY event_id",
                (meta_id,),
            ).fetchall()
        return MetaEvent(
            id=row[0],
            reviewer=row[1],
            title=row[2],
            hypothesis=row[3],
            member_event_ids=tuple(m[0] for m in members),
            created_at=row[4],
        )

    def meta_events(self) -> list[MetaEvent]:
        with self._session() as conn:
            ids = [r[0] for r in conn.execute("SELECT id FROM meta_events ORDER BY id")]
        return [m for m in (self.get_meta_event(i) for i in ids) if m is not None]

    # -- session logs ------------------------------------------------------

    def add_session_entries(
        self,
        session_id: str,
        reviewer: str,
        entries: Iterable[SessionEntry | tuple | Mapping[str, Any]],
    ) -> int:
        """Append entries to a session log.

        The batch is sorted by timestamp, must not precede already-stored
        entries, and nothing may follow a stored session_end.
        """
        normalized = sorted(
            (_normalize_entry(e) for e in entries),
            key=lambda e: (e.ts, ACTIONS.index(e.action), _canonical_json(e.payload)),
        )
        if not normalized:
            return 0
        terminal_seen = False
        for entry in normalized:
            if terminal_seen:
                raise ValidationError("session_end must be the final entry")
            if entry.action == "session_end":
                terminal_seen = True
        with self._write_lock, self._session() as conn:
            conn.execute("BEGIN IMMEDIATE")
            last = conn.execute(
                "SELECT ts, action FROM session_entries WHERE session_id=?"
                " ORDER BY ts DESC LIMIT 1",
                (session_id,),
            ).fetchone()
            if last is not None:
                if last[1] == "session_end":
                    raise ValidationError(f"session {session_id} already ended")
                if normalized[0].ts < _parse_ts(last[0]):
                    raise ValidationError("entries must not precede stored session entries")
            conn.executemany(
                "INSERT INTO session_entries (session_id, reviewer, ts, action, payload)"
                " VALUES (?,?,?,?,?)",
                [
                    (
                        session_id,
                        reviewer,
                        e.ts.isoformat(),
                        e.action,
                        _canonical_json(e.payload),
                    )
                    for e in normalized
                ],
            )
        return len(normalized)

    def import_session_lines(self, lines: Iterable[str]) -> int:
        """Import line-delimited JSON log records grouped by session."""
        by_session: dict[tuple[str, str], list[Mapping[str, Any]]] = {}
        for line_no, line in enumerate(lines, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"line {line_no}: bad JSON ({exc})") from None
            try:
                ident = (str(record["session_id"]), str(record.get("reviewer", "")))
            except KeyError:
                raise ValidationError(f"line {line_no}: missing session_id") from None
            by_session.setdefault(ident, []).append(record)
        total = 0
        for (session_id, reviewer), records in sorted(by_session.items()):
            total += self.add_session_entries(session_id, reviewer, records)
        return total

    def session_ids(self) -> list[str]:
        with self._session() as conn:
            rows = conn.execute(
                "SELECT DISTINCT session_id FROM session_entries ORDER BY session_id"
            ).fetchall()
        return [r[0] for r in rows]

    # -- KPIs ---------------------------------------------------------------

    def compute_kpis(self, period: tuple[date, date]) -> KpiReport:
        """Reviewer KPIs over a date range, derived only from stored state."""
        start, end = period
        report = KpiReport(period=period)
        sessions = self._entries_in_period(start, end)

        row_gaps: list[float] = []
        events_per_session: list[float] = []
        active_seconds = 0.0
        total_events = 0
        filter_counts_by_day: dict[date, int] = {}
        predicate_counts: list[float] = []

        for entries in sessions.values():
            events = sum(1 for e in entries if e.action == "event_recorded")
            events_per_session.append(float(events))
            total_events += events
            for prev, cur in zip(entries, entries[1:]):
                gap = (cur.ts - prev.ts).total_seconds()
                if gap <= IDLE_CAP_SECONDS:
                    active_seconds += gap
            for i, entry in enumerate(entries):
                if entry.action == "row_expanded":
                    for later in entries[i + 1 :]:
                        if later.action in ("row_expanded", "row_collapsed", "session_end"):
                            row_gaps.append((later.ts - entry.ts).total_seconds())
                            break
                elif entry.action == "filter_applied":
                    day = entry.ts.date()
                    filter_counts_by_day[day] = filter_counts_by_day.get(day, 0) + 1
                    predicate_counts.append(float(entry.payload.get("predicates", 0)))

        active_days = {e.ts.date() for entries in sessions.values() for e in entries}
        for day in active_days:
            filter_counts_by_day.setdefault(day, 0)

        report.time_per_row = _mean_ci(row_gaps)
        report.events_per_session = _mean_ci(events_per_session)
        if active_seconds > 0:
            report.events_per_minute = total_events / (active_seconds / 60.0)
        if filter_counts_by_day:
            counts = [float(c) for c in filter_counts_by_day.values()]
            report.filter_uses_per_day = MeanSd(
                mean(counts), stdev(counts) if len(counts) > 1 else 0.0
            )
        if predicate_counts:
            report.predicates_per_filter = mean(predicate_counts)

        records = self._records_in_period(start, end)
        eventful = [r for r in records if r.event_type != "non_event"]
        if eventful:
            not_source = sum(1 for r in eventful if not r.is_source)
            report.pct_not_source = 100.0 * not_source / len(eventful)
        for record in records:
            pair = (record.event_type, record.severity)
            report.characterization[pair] = report.characterization.get(pair, 0) + 1

        with self._session() as conn:
            report.edits = conn.execute(
                "SELECT COUNT(*) FROM event_history WHERE substr(replaced_at, 1, 10) BETWEEN ? AND ?",
                (start.isoformat(), end.isoformat()),
            ).fetchone()[0]
            report.meta_events = conn.execute(
                "SELECT COUNT(*) FROM meta_events WHERE substr(created_at, 1, 10) BETWEEN ? AND ?",
                (start.isoformat(), end.isoformat()),
            ).fetchone()[0]
        return report

    def _entries_in_period(self, start: date, end: date) -> dict[str, list[SessionEntry]]:
        with self._session() as conn:
            rows = conn.execute(
                "SELECT session_id, ts, action, payload FROM session_entries"
                " WHERE substr(ts, 1, 10) BETWEEN ? AND ?",
                (start.isoformat(), end.isoformat()),
            ).fetchall()
        sessions: dict[str, list[SessionEntry]] = {}
        for session_id, ts, action, payload in rows:
            sessions.setdefault(session_id, []).append(
                SessionEntry(ts=_parse_ts(ts), action=action, payload=json.loads(payload))
            )
        for entries in sessions.values():
            entries.sort(key=lambda e: (e.ts, ACTIONS.index(e.action), _canonical_json(e.payload)))
        return dict(sorted(sessions.items()))

    def _records_in_period(self, start: date, end: date) -> list[TriageRecord]:
        with self._session() as conn:
            rows = conn.execute(
                "SELECT id, reviewer, source, signal, geo_type, geo_value, time_value,"
                " event_type, other_label, severity, is_source, note, created_at,"
                " edited_at, edit_count FROM events"
                " WHERE substr(created_at, 1, 10) BETWEEN ? AND ? ORDER BY id",
                (start.isoformat(), end.isoformat()),
            ).fetchall()
        return [_record_from_row(r) for r in rows]

    # -- export ---------------------------------------------------------------

    def dump_events(self, out: TextIO | None = None) -> str:
        buf = out if out is not None else io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            [
                "id",
                "reviewer",
                "source",
                "signal",
                "geo_type",
                "geo_value",
                "time_value",
                "event_type",
                "other_label",
                "severity",
                "is_source",
                "note",
                "created_at",
                "edited_at",
                "edit_count",
            ]
        )
        with self._session() as conn:
            for row in conn.execute(
                "SELECT id, reviewer, source, signal, geo_type, geo_value, time_value,"
                " event_type, other_label, severity, is_source, note, created_at,"
                " edited_at, edit_count FROM events ORDER BY id"
            ):
                writer.writerow(row)
        return "" if out is not None else buf.getvalue()

    def dump_meta_events(self, out: TextIO | None = None) -> str:
        buf = out if out is not None else io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["id", "reviewer", "title", "hypothesis", "member_event_ids", "created_at"])
        for meta in self.meta_events():
            writer.writerow(
                [
                    meta.id,
                    meta.reviewer,
                    meta.title,
                    meta.hypothesis,
                    "|".join(str(i) for i in meta.member_event_ids),
                    meta.created_at,
                ]
            )
        return "" if out is not None else buf.getvalue()


def kpi_report_csv(report: KpiReport) -> str:
    """Delimited `metric,value` rendering of a KPI report."""
    rows = [
        ("period_from", report.period[0].isoformat()),
        ("period_to", report.period[1].isoformat()),
        ("time_per_row_mean_sec", repr(report.time_per_row.mean)),
        ("time_per_row_ci_low", repr(report.time_per_row.ci_low)),
        ("time_per_row_ci_high", repr(report.time_per_row.ci_high)),
        ("events_per_session_mean", repr(report.events_per_session.mean)),
        ("events_per_session_ci_low", repr(report.events_per_session.ci_low)),
        ("events_per_session_ci_high", repr(report.events_per_session.ci_high)),
        ("events_per_minute", repr(report.events_per_minute)),
        ("edits", str(report.edits)),
        ("meta_events", str(report.meta_events)),
        ("pct_not_source", repr(report.pct_not_source)),
        ("filter_uses_per_day_mean", repr(report.filter_uses_per_day.mean)),
        ("filter_uses_per_day_sd", repr(report.filter_uses_per_day.sd)),
        ("predicates_per_filter", repr(report.predicates_per_filter)),
    ]
    rows += [
        (f"characterization[{event_type}|{severity}]", str(count))
        for (event_type, severity), count in sorted(report.characterization.items())
    ]
    return "metric,value\n" + "\n".join(f"{k},{v}" for k, v in rows) + "\n"


def _validate_characterization(event_type: str, severity: str, other_label: str) -> None:
    if event_type not in EVENT_TYPES:
        raise ValidationError(f"unknown event_type: {event_type!r}")
    if severity not in SEVERITIES:
        raise ValidationError(f"unknown severity: {severity!r}")
    if event_type == "other" and not other_label:
        raise ValidationError("event_type 'other' requires other_label")


def _record_from_row(row) -> TriageRecord:
    return TriageRecord(
        id=row[0],
        reviewer=row[1],
        key=StreamKey(row[2], row[3], row[4], row[5]),
        time_value=date.fromisoformat(row[6]),
        event_type=row[7],
        other_label=row[8],
        severity=row[9],
        is_source=bool(row[10]),
        note=row[11],
        created_at=row[12],
        edited_at=row[13],
        edit_count=row[14],
    )


def _normalize_entry(entry: SessionEntry | tuple | Mapping[str, Any]) -> SessionEntry:
    if isinstance(entry, SessionEntry):
        ts, action, payload = entry.ts, entry.action, dict(entry.payload)
    elif isinstance(entry, Mapping):
        ts = entry.get("ts")
        action = entry.get("action")
        payload = dict(entry.get("payload") or {})
    else:
        ts, action, payload = entry[0], entry[1], dict(entry[2]) if len(entry) > 2 else {}
    if action not in ACTIONS:
        raise ValidationError(f"unknown action: {action!r}")
    if ts is None:
        raise ValidationError("entry missing timestamp")
    return SessionEntry(ts=_parse_ts(ts), action=str(action), payload=payload)


def _canonical_json(payload: Mapping[str, Any]) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))
