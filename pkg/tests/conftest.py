"""Shared fixtures: a FIPS-style hierarchy and small observation builders."""

from __future__ import annotations

from datetime import date, timedelta

import pytest

from vigil.store import GeoHierarchy, Observation, StreamKey, StreamStore


def _fips_rows() -> list[tuple[str, str, str, str, str]]:
    rows = [("nation", "us", "", "", "United States")]
    rows.append(("state", "PA", "nation", "us", "Pennsylvania"))
    rows.append(("state", "OH", "nation", "us", "Ohio"))
    rows.append(("state", "PR", "nation", "us", "Puerto Rico"))
    # Pennsylvania county FIPS codes are the odd numbers 42001..42133 (67).
    for n in range(1, 134, 2):
        rows.append(("county", f"42{n:03d}", "state", "PA", f"PA county {n:03d}"))
    for n in range(1, 16, 2):
        rows.append(("county", f"39{n:03d}", "state", "OH", f"OH county {n:03d}"))
    for n in range(1, 10, 2):
        rows.append(("county", f"72{n:03d}", "state", "PR", f"PR municipio {n:03d}"))
    return rows


@pytest.fixture(scope="session")
def hierarchy() -> GeoHierarchy:
    return GeoHierarchy(_fips_rows())


@pytest.fixture()
def geo_csv(tmp_path):
    path = tmp_path / "geo.csv"
    lines = ["geo_type,geo_value,parent_type,parent_value,display_name"]
    lines += [",".join(row) for row in _fips_rows()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture()
def stream_store(tmp_path) -> StreamStore:
    return StreamStore(tmp_path / "streams.db")


def daily_observations(
    key: StreamKey,
    start: date,
    values: list[float],
    lag: int = 1,
) -> list[Observation]:
    """One observation per day, each issued `lag` days after its reference date."""
    return [
        Observation(
            key=key,
            time_value=start + timedelta(days=i),
            issue=start + timedelta(days=i + lag),
            value=v,
        )
        for i, v in enumerate(values)
    ]


def key_of(
    source: str = "prov1",
    signal: str = "cases",
    geo_type: str = "county",
    geo_value: str = "42003",
) -> StreamKey:
    return StreamKey(source, signal, geo_type, geo_value)


def pytest_terminal_summary(terminalreporter):
    """Print one pass/fail line per acceptance criterion after the run."""
    try:
        from .test_acceptance import VERDICTS
    except ImportError:
        return
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
