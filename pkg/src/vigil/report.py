"""Self-contained static HTML report of the day's top-k streams.

The file embeds all series data and a small inline script for hover
readouts: no network fetches, no external assets. Output bytes depend
only on the persisted run, so re-emitting is reproducible.
"""

from __future__ import annotations

import json
from datetime import date
from pathlib import Path

from .errors import UnknownRegionError
from .ranking import RankedRow
from .results import ResultsStore
from .store import GeoHierarchy, StreamStore

_PAGE = """<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8">
<title>Top-{k} streams — {as_of}</title>
<style>
body {{ font-family: system-ui, sans-serif; margin: 2rem auto; max-width: 960px; color: #222; }}
h1 {{ font-size: 1.4rem; }}
.meta {{ color: #666; font-size: 0.9rem; margin-bottom: 1.5rem; }}
section.row {{ border: 1px solid #ddd; border-radius: 6px; padding: 1rem; margin-bottom: 1rem; }}
section.row h2 {{ font-size: 1.05rem; margin: 0 0 0.25rem 0; }}
.stats {{ color: #555; font-size: 0.85rem; margin-bottom: 0.5rem; }}
svg {{ width: 100%; height: 160px; background: #fafafa; }}
.series {{ fill: none; stroke: #1f77b4; stroke-width: 1.5; }}
.peak {{ fill: #d62728; }}
.readout {{ font-size: 0.8rem; fill: #333; }}
.cursor {{ stroke: #999; stroke-dasharray: 3 3; }}
</style>
</head>
<body>
<h1>Top-{k} ranked data streams</h1>
<div class="meta">as of {as_of} · run {run_id} · {n} rows</div>
{sections}
<script>
const DATA = {data_json};
function fmt(x) {{ return Number(x.toPrecision(6)); }}
DATA.forEach(function (row, idx) {{
  const svg = document.getElementById("plot-" + idx);
  if (!svg || row.dates.length === 0) return;
  const W = 920, H = 160, PAD = 28;
  svg.setAttribute("viewBox", "0 0 " + W + " " + H);
  const vals = row.values;
  let lo = Math.min.apply(null, vals), hi = Math.max.apply(null, vals);
  if (lo === hi) {{ lo -= 1; hi += 1; }}
  const x = function (i) {{ return PAD + (W - 2 * PAD) * (vals.length === 1 ? 0.5 : i / (vals.length - 1)); }};
  const y = function (v) {{ return H - PAD - (H - 2 * PAD) * (v - lo) / (hi - lo); }};
  const path = vals.map(function (v, i) {{ return (i ? "L" : "M") + x(i).toFixed(1) + " " + y(v).toFixed(1); }}).join("");
  const p = document.createElementNS("http://www.w3.org/2000/svg", "path");
  p.setAttribute("d", path);
  p.setAttribute("class", "series");
  svg.appendChild(p);
  const peakIdx = row.dates.indexOf(row.peak_date);
  if (peakIdx >= 0) {{
    const dot = document.createElementNS("http://www.w3.org/2000/svg", "circle");
    dot.setAttribute("cx", x(peakIdx)); dot.setAttribute("cy", y(vals[peakIdx]));
    dot.setAttribute("r", 3.5); dot.setAttribute("class", "peak");
    svg.appendChild(dot);
  }}
  const cursor = document.createElementNS("http://www.w3.org/2000/svg", "line");
  cursor.setAttribute("class", "cursor"); cursor.setAttribute("y1", PAD); cursor.setAttribute("y2", H - PAD);
  cursor.setAttribute("visibility", "hidden");
  svg.appendChild(cursor);
  const readout = document.createElementNS("http://www.w3.org/2000/svg", "text");
  readout.setAttribute("class", "readout"); readout.setAttribute("x", PAD); readout.setAttribute("y", 14);
  svg.appendChild(readout);
  svg.addEventListener("mousemove", function (evt) {{
    const rect = svg.getBoundingClientRect();
    const fx = (evt.clientX - rect.left) / rect.width * W;
    let i = Math.round((fx - PAD) / (W - 2 * PAD) * (vals.length - 1));
    i = Math.max(0, Math.min(vals.length - 1, i));
    cursor.setAttribute("x1", x(i)); cursor.setAttribute("x2", x(i));
    cursor.setAttribute("visibility", "visible");
    readout.textContent = row.dates[i] + "  value " + fmt(vals[i]) + "  score " + fmt(row.scores[i]);
  }});
  svg.addEventListener("mouseleave", function () {{
    cursor.setAttribute("visibility", "hidden");
    readout.textContent = "";
  }});
}});
</script>
</body>
</html>
"""

_SECTION = """<section class="row">
<h2>#{rank} · {key}</h2>
<div class="stats">peak score {peak_score} on {peak_date} · expected {expected} · dispersion {dispersion}{flag}{geo}</div>
<svg id="plot-{idx}" role="img" aria-label="line plot for {key}"></svg>
</section>"""


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def render_report(
    rows: list[RankedRow],
    series: dict[str, tuple[list[str], list[float], list[float]]],
    as_of: date,
    run_id: str,
    k: int,
    geo_paths: dict[str, str],
) -> str:
    sections = []
    data = []
    for idx, row in enumerate(rows):
        key_text = str(row.key)
        dates, values, scores = series[key_text]
        flag = " · bound violated" if row.peak.violated_bound else ""
        geo = f" · {geo_paths[key_text]}" if key_text in geo_paths else ""
        sections.append(
            _SECTION.format(
                rank=row.rank,
                key=key_text,
                peak_score=_fmt(row.peak.score),
                peak_date=row.peak.time_value.isoformat(),
                expected=_fmt(row.peak.expected),
                dispersion=_fmt(row.peak.dispersion),
                flag=flag,
                geo=geo,
                idx=idx,
            )
        )
        data.append(
            {
                "key": key_text,
                "dates": dates,
                "values": values,
                "scores": scores,
                "peak_date": row.peak.time_value.isoformat(),
            }
        )
    return _PAGE.format(
        k=k,
        as_of=as_of.isoformat(),
        run_id=run_id,
        n=len(rows),
        sections="\n".join(sections),
        data_json=json.dumps(data, sort_keys=True, separators=(",", ":")),
    )


def emit_report(
    streams: StreamStore,
    results: ResultsStore,
    hierarchy: GeoHierarchy | None,
    as_of: date,
    k: int,
    out_path: str | Path,
    window_days: int = 200,
) -> Path:
    """Write the top-k report for an existing run and return its path."""
    from .ranking import ScoredPoint, rank_streams

    info = results.require_run(as_of)
    scored = {}
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
    rows = rank_streams(scored, k)
    series: dict[str, tuple[list[str], list[float], list[float]]] = {}
    geo_paths: dict[str, str] = {}
    for row in rows:
        frame = streams.latest_frame(row.key, as_of, window_days)
        values_by_date = dict(frame.points)
        score_by_date = dict(row.window_scores)
        dates = [d for d, _ in frame.points]
        series[str(row.key)] = (
            [d.isoformat() for d in dates],
            [values_by_date[d] for d in dates],
            [score_by_date.get(d, 0.0) for d in dates],
        )
        if hierarchy is not None:
            try:
                geo_paths[str(row.key)] = hierarchy.geo_path(row.key.geo_type, row.key.geo_value)
            except UnknownRegionError:
                pass
    html = render_report(rows, series, as_of, info.run_id, k, geo_paths)
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(html, encoding="utf-8")
    return out
