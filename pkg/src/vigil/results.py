"""Persistent store for batch scoring output, separate from the raw data.

One row per (stream, reference date, run date). A run replaces its own
rows atomically, so readers either see the whole run or the previous one;
each completed run gets a content hash that doubles as its identifier.
"""

from __future__ import annotations

import csv
import hashlib
import io
import sqlite3
import threading
from contextlib import contextmanager
from dataclasses import dataclass
from datetime import date, timedelta
from pathlib import Path
from typing import Iterable, Iterator, TextIO

from .errors import EmptyRunError
from .store import StreamKey

RESULT_FIELDS = (
    "source",
    "signal",
    "geo_type",
    "geo_value",
    "time_value",
    "as_of",
    "score",
    "expected",
    "dispersion",
    "violated_bound",
)

# source, signal, geo_type, geo_value, time_value, score, expected,
# dispersion, violated_bound — as_of is supplied per run.
ScoreRow = tuple[str, str, str, str, str, float, float, float, int]


@dataclass(frozen=True)
class RunInfo:
    as_of: date
    run_id: str
    row_hash: str
    streams_scored: int
    points_scored: int


class ResultsStore:
    """SQLite results database behind the scoring and aggregation layers."""

    def __init__(self, path: str | Path):
        self.path = str(path)
        self._write_lock = threading.Lock()
        with self._session() as conn:
            conn.execute(
                """
                CREATE TABLE IF NOT EXISTS scores (
                    source TEXT NOT NULL,
                    signal TEXT NOT NULL,
                    geo_type TEXT NOT NULL,
                    geo_value TEXT NOT NULL,
                    time_value TEXT NOT NULL,
                    as_of TEXT NOT NULL,
                    score REAL NOT NULL,
                    expected REAL NOT NULL,
                    dispersion REAL NOT NULL,
                    violated_bound INTEGER NOT NULL,
                    PRIMARY KEY (source, signal, geo_type, geo_value, time_value, as_of)
                ) WITHOUT ROWID
                """
            )
            conn.execute(
                """
                CREATE TABLE IF NOT EXISTS runs (
                    as_of TEXT PRIMARY KEY,
                    row_hash TEXT NOT NULL,
                    streams_scored INTEGER NOT NULL,
                    points_scored INTEGER NOT NULL,
                    completed_at TEXT NOT NULL
                )
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

    # -- writes -------------------------------------------------------

    def write_run(
        self,
        as_of: date,
        batches: Iterable[list[ScoreRow]],
        completed_at: str,
    ) -> tuple[RunInfo, bool]:
        """Replace the run for `as_of` in one transaction.

        Returns the run info and whether an identical run already existed.
        Rows must arrive grouped by stream in canonical stream/date order;
        the content hash is computed over that ordering.
        """
        digest = hashlib.sha256()
        points = 0
        streams = 0
        last_ident: tuple[str, str, str, str] | None = None
        with self._write_lock, self._session() as conn:
            conn.execute("BEGIN IMMEDIATE")
            prior = conn.execute(
                "SELECT row_hash FROM runs WHERE as_of=?", (as_of.isoformat(),)
            ).fetchone()
            conn.execute("DELETE FROM scores WHERE as_of=?", (as_of.isoformat(),))
            iso = as_of.isoformat()
            for batch in batches:
                digest.update(repr(batch).encode())
                for row in batch:
                    if row[:4] != last_ident:
                        last_ident = row[:4]
                        streams += 1
                points += len(batch)
                conn.executemany(
                    "INSERT INTO scores VALUES (?,?,?,?,?,?,?,?,?,?)",
                    (
                        (r[0], r[1], r[2], r[3], r[4], iso, r[5], r[6], r[7], r[8])
                        for r in batch
                    ),
                )
            row_hash = digest.hexdigest()
            conn.execute(
                "INSERT INTO runs VALUES (?,?,?,?,?) ON CONFLICT(as_of) DO UPDATE SET"
                " row_hash=excluded.row_hash, streams_scored=excluded.streams_scored,"
                " points_scored=excluded.points_scored, completed_at=excluded.completed_at",
                (iso, row_hash, streams, points, completed_at),
            )
        info = RunInfo(
            as_of=as_of,
            run_id=f"{iso}:{row_hash[:12]}",
            row_hash=row_hash,
            streams_scored=streams,
            points_scored=points,
        )
        return info, prior is not None and prior[0] == row_hash

    # -- reads ----------------------------------------------------------

    def run_info(self, as_of: date) -> RunInfo | None:
        with self._session() as conn:
            row = conn.execute(
                "SELECT row_hash, streams_scored, points_scored FROM runs WHERE as_of=?",
                (as_of.isoformat(),),
            ).fetchone()
        if row is None:
            return None
        return RunInfo(
            as_of=as_of,
            run_id=f"{as_of.isoformat()}:{row[0][:12]}",
            row_hash=row[0],
            streams_scored=row[1],
            points_scored=row[2],
        )

    def require_run(self, as_of: date) -> RunInfo:
        info = self.run_info(as_of)
        if info is None:
            raise EmptyRunError(f"no scoring run for {as_of.isoformat()}")
        return info

    def run_dates(self) -> list[date]:
        with self._session() as conn:
            rows = conn.execute("SELECT as_of FROM runs ORDER BY as_of").fetchall()
        return [date.fromisoformat(r[0]) for r in rows]

    def window_scores(
        self, as_of: date, trailing_days: int
    ) -> Iterator[tuple[str, str, str, str, float]]:
        """(source, signal, geo_type, geo_value, score) rows in the trailing window."""
        start = (as_of - timedelta(days=trailing_days - 1)).isoformat()
        with self._session() as conn:
            yield from conn.execute(
                "SELECT source, signal, geo_type, geo_value, score FROM scores"
                " WHERE as_of=? AND time_value>=? AND time_value<=?",
                (as_of.isoformat(), start, as_of.isoformat()),
            ).fetchall()

    def stream_rows(
        self, as_of: date
    ) -> Iterator[tuple[StreamKey, list[tuple[date, float, float, float, bool]]]]:
        """Per-stream (time_value, score, expected, dispersion, violated) lists."""
        with self._session() as conn:
            cursor = conn.execute(
                "SELECT source, signal, geo_type, geo_value, time_value, score, expected,"
                " dispersion, violated_bound FROM scores WHERE as_of=?"
                " ORDER BY source, signal, geo_type, geo_value, time_value",
                (as_of.isoformat(),),
            )
            current: tuple[str, str, str, str] | None = None
            points: list[tuple[date, float, float, float, bool]] = []
            for row in cursor:
                ident = row[:4]
                if ident != current:
                    if current is not None:
                        yield StreamKey(*current), points
                    current = ident
                    points = []
                points.append(
                    (date.fromisoformat(row[4]), row[5], row[6], row[7], bool(row[8]))
                )
            if current is not None:
                yield StreamKey(*current), points

    def scores_of_key(
        self, key: StreamKey, up_to: date
    ) -> dict[date, list[tuple[date, float]]]:
        """Per reference date, the (as_of, score) history across runs <= up_to."""
        with self._session() as conn:
            rows = conn.execute(
                "SELECT time_value, as_of, score FROM scores"
                " WHERE source=? AND signal=? AND geo_type=? AND geo_value=? AND as_of<=?"
                " ORDER BY time_value, as_of",
                (key.source, key.signal, key.geo_type, key.geo_value, up_to.isoformat()),
            ).fetchall()
        history: dict[date, list[tuple[date, float]]] = {}
        for time_value, as_of, score in rows:
            history.setdefault(date.fromisoformat(time_value), []).append(
                (date.fromisoformat(as_of), score)
            )
        return history

    def has_score(self, key: StreamKey, time_value: date, as_of: date) -> bool:
        with self._session() as conn:
            row = conn.execute(
                "SELECT 1 FROM scores WHERE source=? AND signal=? AND geo_type=?"
                " AND geo_value=? AND time_value=? AND as_of=? LIMIT 1",
                (
                    key.source,
                    key.signal,
                    key.geo_type,
                    key.geo_value,
                    time_value.isoformat(),
                    as_of.isoformat(),
                ),
            ).fetchone()
        return row is not None

    def signals(self, as_of: date) -> list[str]:
        with self._session() as conn:
            rows = conn.execute(
                "SELECT DISTINCT signal FROM scores WHERE as_of=? ORDER BY signal",
                (as_of.isoformat(),),
            ).fetchall()
        return [r[0] for r in rows]

    def regions(self, as_of: date) -> list[tuple[str, str]]:
        with self._session() as conn:
            rows = conn.execute(
                "SELECT DISTINCT geo_type, geo_value FROM scores WHERE as_of=?"
                " ORDER BY geo_type, geo_value",
                (as_of.isoformat(),),
            ).fetchall()
        return [tuple(r) for r in rows]

    # -- export ---------------------------------------------------------

    def dump(self, as_of: date | None = None, out: TextIO | None = None) -> str:
        """Canonical delimited dump of score rows (optionally one run)."""
        buf = out if out is not None else io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(RESULT_FIELDS)
        query = (
            "SELECT source, signal, geo_type, geo_value, time_value, as_of, score,"
            " expected, dispersion, violated_bound FROM scores"
        )
        params: tuple = ()
        if as_of is not None:
            query += " WHERE as_of=?"
            params = (as_of.isoformat(),)
        query += " ORDER BY source, signal, geo_type, geo_value, time_value, as_of"
        with self._session() as conn:
            for row in conn.execute(query, params):
                writer.writerow(
                    [*row[:6], repr(row[6]), repr(row[7]), repr(row[8]), row[9]]
                )
        return "" if out is not None else buf.getvalue()
