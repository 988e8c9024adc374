"""Static top-k report: structure, determinism, no external references."""

from __future__ import annotations

import re
from datetime import date, timedelta

import pytest

from vigil.errors import EmptyRunError
from vigil.ranking import ExpectationConfig
from vigil.report import emit_report
from vigil.results import ResultsStore
from vigil.runner import run_daily
from vigil.store import GeoHierarchy, StreamKey, StreamStore

from .conftest import daily_observations

JAN = date(2024, 1, 1)
AS_OF = JAN + timedelta(days=30)


@pytest.fixture()
def seeded(tmp_path, geo_csv):
    streams = StreamStore(tmp_path / "s.db")
    results = ResultsStore(tmp_path / "r.db")
    for i, county in enumerate(["42001", "42003", "42005", "39001"]):
        key = StreamKey("prov1", "cases", "county", county)
        values = [100.0] * 25 + [100.0 + 40.0 * i] + [100.0] * 4
        streams.ingest(daily_observations(key, JAN, values))
    run_daily(streams, results, AS_OF, ExpectationConfig())
    return streams, results, GeoHierarchy.from_csv(geo_csv)


def test_report_has_k_sections_in_rank_order(seeded, tmp_path):
    streams, results, hierarchy = seeded
    out = emit_report(streams, results, hierarchy, AS_OF, 3, tmp_path / "top3.html")
    html = out.read_text()
    ranks = re.findall(r"#(\d+) · ", html)
    assert ranks == ["1", "2", "3"]
    assert "prov1:cases:county:39001" in html  # biggest spike ranks first


def test_two_emissions_byte_identical(seeded, tmp_path):
    streams, results, hierarchy = seeded
    first = emit_report(streams, results, hierarchy, AS_OF, 4, tmp_path / "a.html")
    second = emit_report(streams, results, hierarchy, AS_OF, 4, tmp_path / "b.html")
    assert first.read_bytes() == second.read_bytes()


def test_k_beyond_universe_lists_all_streams(seeded, tmp_path):
    streams, results, hierarchy = seeded
    out = emit_report(streams, results, hierarchy, AS_OF, 50, tmp_path / "all.html")
    html = out.read_text()
    assert len(re.findall(r'<section class="row">', html)) == 4


def test_no_external_fetches(seeded, tmp_path):
    streams, results, hierarchy = seeded
    html = emit_report(streams, results, hierarchy, AS_OF, 2, tmp_path / "x.html").read_text()
    assert "http://" not in html.replace("http://www.w3.org/2000/svg", "")
    assert "https://" not in html
    assert "<script src" not in html


def test_missing_run_errors(seeded, tmp_path):
    streams, results, hierarchy = seeded
    with pytest.raises(EmptyRunError):
        emit_report(streams, results, hierarchy, date(2030, 1, 1), 3, tmp_path / "x.html")
