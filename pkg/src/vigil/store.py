"""Revision-aware storage for hierarchical public-health time series.

Observations are immutable facts keyed by (stream, reference date, issue
date): a correction to an already-reported value must arrive as a new
issue. Queries reconstruct what a stream looked like "as of" any date.
"""

from __future__ import annotations

import csv
import io
import math
import sqlite3
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path
from typing import Iterable, Iterator, TextIO

from .errors import KeyNotFoundError, UnknownRegionError, VigilError

TIERS = ("county", "state", "nation")

DEFAULT_WINDOW_DAYS = 200

INGEST_FIELDS = ("source", "signal", "geo_type", "geo_value", "time_value", "issue", "value")

GEO_FIELDS = ("geo_type", "geo_value", "parent_type", "parent_value", "display_name")


@dataclass(frozen=True, order=True)
class StreamKey:
    """Identity of one univariate stream: provider, indicator, and region."""

    source: str
    signal: str
    geo_type: str
    geo_value: str

    def __post_init__(self):
        for name in ("source", "signal", "geo_type", "geo_value"):
            if not getattr(self, name):
                raise ValueError(f"StreamKey.{name} must be non-empty")
        if self.geo_type not in TIERS:
            raise ValueError(f"unknown tier: {self.geo_type!r}")

    def __str__(self) -> str:
        return f"{self.source}:{self.signal}:{self.geo_type}:{self.geo_value}"

    @classmethod
    def parse(cls, text: str) -> "StreamKey":
        parts = text.split(":")
        if len(parts) != 4:
            raise ValueError(f"stream key must have 4 colon-separated fields: {text!r}")
        return cls(*parts)


@dataclass(frozen=True)
class Observation:
    """One revisioned data point: the value reported for `time_value` on `issue`."""

    key: StreamKey
    time_value: date
    issue: date
    value: float

    def __post_init__(self):
        if self.issue < self.time_value:
            raise ValueError(f"issue {self.issue} precedes time_value {self.time_value}")
        if not math.isfinite(self.value):
            raise ValueError("value must be finite")

    @property
    def lag(self) -> int:
        return (self.issue - self.time_value).days


@dataclass(frozen=True)
class StreamFrame:
    """A stream as visible on `as_of`: per date, the latest issue <= as_of."""

    key: StreamKey
    as_of: date
    points: tuple[tuple[date, float], ...]
    window_days: int = DEFAULT_WINDOW_DAYS

    def __post_init__(self):
        for prev, cur in zip(self.points, self.points[1:]):
            if cur[0] <= prev[0]:
                raise ValueError("frame points must be strictly increasing in time_value")
        if self.points:
            span = (self.points[-1][0] - self.points[0][0]).days + 1
            if span > self.window_days:
                raise ValueError(f"frame span {span} exceeds window_days {self.window_days}")

    @property
    def dates(self) -> tuple[date, ...]:
        return tuple(p[0] for p in self.points)

    @property
    def values(self) -> tuple[float, ...]:
        return tuple(p[1] for p in self.points)


@dataclass(frozen=True)
class GeoNode:
    geo_type: str
    geo_value: str
    parent: tuple[str, str] | None
    children: tuple[tuple[str, str], ...]
    display_name: str = ""


@dataclass(frozen=True)
class GeoRelatives:
    parent: GeoNode | None
    siblings: tuple[GeoNode, ...]
    children: tuple[GeoNode, ...]


@dataclass(frozen=True)
class RowRejection:
    row: int
    reason: str


@dataclass
class IngestReport:
    """Outcome of one ingestion batch.

    inserted: novel (key, time_value) reference dates.
    replaced: new issues revising an already-stored reference date.
    unchanged: rows identical to ones already stored (idempotent re-ingest).
    """

    inserted: int = 0
    replaced: int = 0
    unchanged: int = 0
    rejected: int = 0
    rejections: list[RowRejection] = field(default_factory=list)

    def reject(self, row: int, reason: str) -> None:
        self.rejected += 1
        self.rejections.append(RowRejection(row, reason))


class GeoHierarchy:
    """Static geographic containment tree: counties under states under one nation.

    Loaded from a crosswalk file at startup rather than inferred from data,
    so that reporting gaps never break parent/sibling context.
    """

    def __init__(self, rows: Iterable[tuple[str, str, str, str, str]]):
        self._nodes: dict[tuple[str, str], dict] = {}
        self._root: tuple[str, str] | None = None
        pending: list[tuple[str, str, str, str, str]] = []
        for geo_type, geo_value, parent_type, parent_value, display_name in rows:
            if geo_type not in TIERS:
                raise VigilError(f"unknown tier in hierarchy: {geo_type!r}")
            node_id = (geo_type, geo_value)
            if node_id in self._nodes:
                raise VigilError(f"duplicate region in hierarchy: {node_id}")
            parent = (parent_type, parent_value) if parent_type or parent_value else None
            if geo_type == "nation":
                if parent is not None:
                    raise VigilError("nation must have no parent")
                if self._root is not None:
                    raise VigilError("hierarchy must have exactly one nation root")
                self._root = node_id
            elif parent is None:
                raise VigilError(f"region {node_id} has no parent")
            self._nodes[node_id] = {
                "parent": parent,
                "children": [],
                "display_name": display_name,
            }
            if parent is not None:
                pending.append((geo_type, geo_value, parent_type, parent_value, display_name))
        if self._root is None:
            raise VigilError("hierarchy has no nation root")
        for geo_type, geo_value, parent_type, parent_value, _ in pending:
            parent_id = (parent_type, parent_value)
            if parent_id not in self._nodes:
                raise VigilError(f"region ({geo_type}, {geo_value}) references unknown parent {parent_id}")
            expected_parent_tier = TIERS[TIERS.index(geo_type) + 1]
            if parent_type != expected_parent_tier:
                raise VigilError(
                    f"region ({geo_type}, {geo_value}) must have a {expected_parent_tier} parent, got {parent_type}"
                )
            self._nodes[parent_id]["children"].append((geo_type, geo_value))
        for entry in self._nodes.values():
            entry["children"].sort()

    @classmethod
    def from_csv(cls, path: str | Path) -> "GeoHierarchy":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            missing = set(GEO_FIELDS) - set(reader.fieldnames or ())
            if missing:
                raise VigilError(f"hierarchy file missing columns: {sorted(missing)}")
            rows = [
                (r["geo_type"], r["geo_value"], r["parent_type"], r["parent_value"], r["display_name"])
                for r in reader
            ]
        return cls(rows)

    def __contains__(self, geo: tuple[str, str]) -> bool:
        return tuple(geo) in self._nodes

    def node(self, geo_type: str, geo_value: str) -> GeoNode:
        entry = self._nodes.get((geo_type, geo_value))
        if entry is None:
            raise UnknownRegionError(f"unknown region: ({geo_type}, {geo_value})")
        return GeoNode(
            geo_type=geo_type,
            geo_value=geo_value,
            parent=entry["parent"],
            children=tuple(entry["children"]),
            display_name=entry["display_name"],
        )

    def relatives(self, geo_type: str, geo_value: str) -> GeoRelatives:
        node = self.node(geo_type, geo_value)
        parent = self.node(*node.parent) if node.parent else None
        siblings: tuple[GeoNode, ...] = ()
        if parent is not None:
            siblings = tuple(
                self.node(*child) for child in parent.children if child != (geo_type, geo_value)
            )
        children = tuple(self.node(*child) for child in node.children)
        return GeoRelatives(parent=parent, siblings=siblings, children=children)

    def ancestor_at(self, geo_type: str, geo_value: str, tier: str) -> str | None:
        """Region code of the ancestor (or self) at `tier`, walking upward."""
        current: tuple[str, str] | None = (geo_type, geo_value)
        if current not in self._nodes:
            raise UnknownRegionError(f"unknown region: ({geo_type}, {geo_value})")
        while current is not None:
            if current[0] == tier:
                return current[1]
            current = self._nodes[current]["parent"]
        return None

    def is_within(self, geo_type: str, geo_value: str, region_code: str) -> bool:
        """True when the region equals `region_code` or descends from it."""
        current: tuple[str, str] | None = (geo_type, geo_value)
        if current not in self._nodes:
            return False
        while current is not None:
            if current[1] == region_code:
                return True
            current = self._nodes[current]["parent"]
        return False

    def nation(self) -> GeoNode:
        assert self._root is not None
        return self.node(*self._root)

    def counties(self) -> tuple[GeoNode, ...]:
        return tuple(self.node(t, v) for (t, v) in sorted(self._nodes) if t == "county")

    def display_name(self, geo_type: str, geo_value: str) -> str:
        return self.node(geo_type, geo_value).display_name

    def geo_path(self, geo_type: str, geo_value: str) -> str:
        """Human-readable containment path from the nation root down."""
        names = []
        current: tuple[str, str] | None = (geo_type, geo_value)
        while current is not None:
            entry = self._nodes.get(current)
            if entry is None:
                raise UnknownRegionError(f"unknown region: {current}")
            names.append(entry["display_name"] or current[1])
            current = entry["parent"]
        return " / ".join(reversed(names))


def _parse_date(token, reason: str):
    if isinstance(token, date):
        return token
    try:
        return date.fromisoformat(str(token).strip())
    except ValueError:
        raise ValueError(reason) from None


def _normalize_row(raw) -> Observation:
    if isinstance(raw, Observation):
        return raw
    if isinstance(raw, dict):
        try:
            raw = tuple(raw[f] for f in INGEST_FIELDS)
        except KeyError as exc:
            raise ValueError(f"missing field {exc.args[0]}") from None
    if raw is None or any(f is None for f in raw):
        raise ValueError("missing field")
    if len(raw) != len(INGEST_FIELDS):
        raise ValueError(f"expected {len(INGEST_FIELDS)} fields, got {len(raw)}")
    source, signal, geo_type, geo_value, time_value, issue, value = raw
    source = str(source).strip()
    signal = str(signal).strip()
    geo_type = str(geo_type).strip()
    geo_value = str(geo_value).strip()
    if not (source and signal and geo_type and geo_value):
        raise ValueError("empty key field")
    if geo_type not in TIERS:
        raise ValueError("unknown tier")
    key = StreamKey(source, signal, geo_type, geo_value)
    time_value = _parse_date(time_value, "bad time_value date")
    issue = _parse_date(issue, "bad issue date")
    if issue < time_value:
        raise ValueError("issue precedes time_value")
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ValueError("bad value") from None
    if not math.isfinite(value):
        raise ValueError("non-finite value")
    return Observation(key=key, time_value=time_value, issue=issue, value=value)


class StreamStore:
    """SQLite-backed observation store with snapshot-consistent readers.

    Ingestion is a single-writer batch committed atomically; reads open
    their own connections and therefore see only committed batches.
    """

    def __init__(self, path: str | Path):
        self.path = str(path)
        self._write_lock = threading.Lock()
        with self._session(write=True) as conn:
            conn.execute(
                """
                CREATE TABLE IF NOT EXISTS observations (
                    source TEXT NOT NULL,
                    signal TEXT NOT NULL,
                    geo_type TEXT NOT NULL,
                    geo_value TEXT NOT NULL,
                    time_value TEXT NOT NULL,
                    issue TEXT NOT NULL,
                    value REAL NOT NULL,
                    PRIMARY KEY (source, signal, geo_type, geo_value, time_value, issue)
                ) WITHOUT ROWID
                """
            )

    def _connect(self) -> sqlite3.Connection:
        conn = sqlite3.connect(self.path)
        conn.execute("PRAGMA journal_mode=WAL")
        conn.execute("PRAGMA synchronous=NORMAL")
        return conn

    @contextmanager
    def _session(self, write: bool = False):
        conn = self._connect()
        try:
            yield conn
            conn.commit()
        except BaseException:
            conn.rollback()
            raise
        finally:
            conn.close()

    # -- ingestion ----------------------------------------------------

    def ingest(self, rows: Iterable) -> IngestReport:
        """Insert validated rows; re-ingesting identical rows is a no-op.

        A row that re-reports an existing (key, time_value, issue) with a
        different value is rejected: revisions are immutable and a changed
        value requires a new issue.
        """
        report = IngestReport()
        with self._write_lock, self._session(write=True) as conn:
            conn.execute("BEGIN IMMEDIATE")
            for row_no, raw in enumerate(rows, start=1):
                try:
                    obs = _normalize_row(raw)
                except ValueError as exc:
                    report.reject(row_no, str(exc))
                    continue
                key = obs.key
                ident = (key.source, key.signal, key.geo_type, key.geo_value)
                existing = conn.execute(
                    "SELECT value FROM observations WHERE source=? AND signal=? AND geo_type=?"
                    " AND geo_value=? AND time_value=? AND issue=?",
                    ident + (obs.time_value.isoformat(), obs.issue.isoformat()),
                ).fetchone()
                if existing is not None:
                    if existing[0] == obs.value:
                        report.unchanged += 1
                    else:
                        report.reject(row_no, "conflict: issue already recorded with a different value")
                    continue
                had_date = conn.execute(
                    "SELECT 1 FROM observations WHERE source=? AND signal=? AND geo_type=?"
                    " AND geo_value=? AND time_value=? LIMIT 1",
                    ident + (obs.time_value.isoformat(),),
                ).fetchone()
                conn.execute(
                    "INSERT INTO observations VALUES (?,?,?,?,?,?,?)",
                    ident + (obs.time_value.isoformat(), obs.issue.isoformat(), obs.value),
                )
                if had_date:
                    report.replaced += 1
                else:
                    report.inserted += 1
        return report

    def ingest_csv(self, source: str | Path | TextIO) -> IngestReport:
        """Ingest the delimited wire format (header row required)."""
        if isinstance(source, (str, Path)):
            fh: TextIO = open(source, newline="", encoding="utf-8")
            close = True
        else:
            fh, close = source, False
        try:
            reader = csv.DictReader(fh)
            missing = set(INGEST_FIELDS) - set(reader.fieldnames or ())
            if missing:
                raise VigilError(f"ingest file missing columns: {sorted(missing)}")
            return self.ingest(reader)
        finally:
            if close:
                fh.close()

    def bulk_load(self, observations: Iterable[Observation]) -> int:
        """Fast path for trusted, pre-validated rows (fixtures, generators).

        Bypasses per-row duplicate accounting; rows must be novel.
        """
        return self.bulk_load_rows(
            (
                o.key.source,
                o.key.signal,
                o.key.geo_type,
                o.key.geo_value,
                o.time_value.isoformat(),
                o.issue.isoformat(),
                o.value,
            )
            for o in observations
        )

    def bulk_load_rows(self, rows: Iterable[tuple]) -> int:
        """Insert pre-formatted (source, signal, geo_type, geo_value,
        time_value_iso, issue_iso, value) tuples without validation."""
        with self._write_lock, self._session(write=True) as conn:
            conn.execute("BEGIN IMMEDIATE")
            cur = conn.executemany("INSERT INTO observations VALUES (?,?,?,?,?,?,?)", rows)
            return cur.rowcount

    # -- queries ------------------------------------------------------

    def has_key(self, key: StreamKey) -> bool:
        with self._session() as conn:
            row = conn.execute(
                "SELECT 1 FROM observations WHERE source=? AND signal=? AND geo_type=? AND geo_value=? LIMIT 1",
                (key.source, key.signal, key.geo_type, key.geo_value),
            ).fetchone()
        return row is not None

    def keys(self) -> list[StreamKey]:
        with self._session() as conn:
            rows = conn.execute(
                "SELECT DISTINCT source, signal, geo_type, geo_value FROM observations"
                " ORDER BY source, signal, geo_type, geo_value"
            ).fetchall()
        return [StreamKey(*row) for row in rows]

    def count(self) -> int:
        with self._session() as conn:
            return conn.execute("SELECT COUNT(*) FROM observations").fetchone()[0]

    def latest_frame(
        self, key: StreamKey, as_of: date, window_days: int = DEFAULT_WINDOW_DAYS
    ) -> StreamFrame:
        """Frame of per-date values using, per date, the latest issue <= as_of."""
        if not self.has_key(key):
            raise KeyNotFoundError(f"unknown stream: {key}")
        start = (as_of - timedelta(days=window_days - 1)).isoformat()
        with self._session() as conn:
            rows = conn.execute(
                "SELECT time_value, value FROM observations"
                " WHERE source=? AND signal=? AND geo_type=? AND geo_value=?"
                " AND issue<=? AND time_value>=? AND time_value<=?"
                " ORDER BY time_value, issue",
                (
                    key.source,
                    key.signal,
                    key.geo_type,
                    key.geo_value,
                    as_of.isoformat(),
                    start,
                    as_of.isoformat(),
                ),
            ).fetchall()
        points: list[tuple[date, float]] = []
        for time_value, value in rows:
            d = date.fromisoformat(time_value)
            if points and points[-1][0] == d:
                points[-1] = (d, value)
            else:
                points.append((d, value))
        return StreamFrame(key=key, as_of=as_of, points=tuple(points), window_days=window_days)

    def issues_of(self, key: StreamKey, time_value: date) -> list[tuple[date, float]]:
        if not self.has_key(key):
            raise KeyNotFoundError(f"unknown stream: {key}")
        with self._session() as conn:
            rows = conn.execute(
                "SELECT issue, value FROM observations"
                " WHERE source=? AND signal=? AND geo_type=? AND geo_value=? AND time_value=?"
                " ORDER BY issue",
                (key.source, key.signal, key.geo_type, key.geo_value, time_value.isoformat()),
            ).fetchall()
        return [(date.fromisoformat(issue), value) for issue, value in rows]

    def frames_for_run(
        self, as_of: date, window_days: int = DEFAULT_WINDOW_DAYS
    ) -> Iterator[StreamFrame]:
        """All streams' frames for a batch run, in canonical key order.

        Single ordered scan; memory stays bounded by one stream at a time.
        """
        start = (as_of - timedelta(days=window_days - 1)).isoformat()
        conn = self._connect()
        try:
            cursor = conn.execute(
                "SELECT source, signal, geo_type, geo_value, time_value, value FROM observations"
                " WHERE issue<=? AND time_value>=? AND time_value<=?"
                " ORDER BY source, signal, geo_type, geo_value, time_value, issue",
                (as_of.isoformat(), start, as_of.isoformat()),
            )
            current: tuple[str, str, str, str] | None = None
            points: list[tuple[date, float]] = []
            while True:
                rows = cursor.fetchmany(50_000)
                if not rows:
                    break
                for source, signal, geo_type, geo_value, time_value, value in rows:
                    ident = (source, signal, geo_type, geo_value)
                    d = date.fromisoformat(time_value)
                    if ident != current:
                        if current is not None:
                            yield StreamFrame(
                                key=StreamKey(*current),
                                as_of=as_of,
                                points=tuple(points),
                                window_days=window_days,
                            )
                        current = ident
                        points = []
                    if points and points[-1][0] == d:
                        points[-1] = (d, value)
                    else:
                        points.append((d, value))
            if current is not None:
                yield StreamFrame(
                    key=StreamKey(*current), as_of=as_of, points=tuple(points), window_days=window_days
                )
        finally:
            conn.close()

    # -- dump/restore -------------------------------------------------

    def dump(self, out: TextIO | None = None) -> str:
        """Canonical wire-format dump; ingesting it into a fresh store round-trips."""
        buf = out if out is not None else io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(INGEST_FIELDS)
        with self._session() as conn:
            cursor = conn.execute(
                "SELECT source, signal, geo_type, geo_value, time_value, issue, value"
                " FROM observations ORDER BY source, signal, geo_type, geo_value, time_value, issue"
            )
            for row in cursor:
                writer.writerow([*row[:6], repr(row[6])])
        return "" if out is not None else buf.getvalue()
