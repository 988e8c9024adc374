/** Fixture builders and a routing fake for fetch. */

import type { FetchLike } from "../src/api.js";
import type {
  ContextBody,
  PanelsBody,
  RankedRowView,
  RankingsBody,
} from "../src/types.js";

export const AS_OF = "2024-01-31";

export function makeRow(overrides: Partial<RankedRowView> & { rank: number }): RankedRowView {
  const geo = overrides.geo_value ?? `42${String(overrides.rank).padStart(3, "0")}`;
  return {
    key: `prov1:cases:county:${geo}`,
    source: "prov1",
    signal: "cases",
    geo_type: "county",
    geo_value: geo,
    display_name: `County ${geo}`,
    geo_path: `United States / Pennsylvania / County ${geo}`,
    peak: {
      time_value: "2024-01-28",
      score: 40.0 - overrides.rank,
      expected: 100.0,
      dispersion: 1.0,
      violated_bound: false,
    },
    window_scores: [
      { date: "2024-01-27", score: 1.0 },
      { date: "2024-01-28", score: 40.0 - overrides.rank },
    ],
    avg_variance: 0.0,
    evolution: { dates: ["2024-01-27", "2024-01-28"], means: [1.0, 2.0] },
    triage: [],
    ...overrides,
  };
}

export function makeRankings(n: number): RankingsBody {
  return {
    as_of: AS_OF,
    run_id: `${AS_OF}:abc123`,
    rows: Array.from({ length: n }, (_, i) => makeRow({ rank: i + 1 })),
  };
}

export function makeContext(key: string): ContextBody {
  const dates = ["2024-01-26", "2024-01-27", "2024-01-28"];
  return {
    as_of: AS_OF,
    key,
    self: { dates, values: [100, 101, 140] },
    parent: { key: "prov1:cases:state:PA", dates, values: [90, 95, 96] },
    siblings: [
      { key: "prov1:cases:county:42005", dates, values: [80, 82, 81] },
    ],
    children: null,
  };
}

export function makePanels(): PanelsBody {
  return {
    as_of: AS_OF,
    run_id: `${AS_OF}:abc123`,
    map: [
      { county: "42001", c: 0.2 },
      { county: "42003", c: 0.9 },
    ],
    indicators: [
      { signal: "cases", score: 3.5 },
      { signal: "deaths", score: 0.5 },
    ],
  };
}

export interface RouteResult {
  status?: number;
  body: unknown;
}

export type Route = (url: URL, init?: RequestInit) => RouteResult;

export interface FakeFetch {
  fetch: FetchLike;
  calls: { url: URL; init?: RequestInit }[];
}

export function fakeFetch(routes: Record<string, Route>): FakeFetch {
  const calls: { url: URL; init?: RequestInit }[] = [];
  const impl: FetchLike = async (input, init) => {
    const url = new URL(input, "http://fake");
    calls.push({ url, init });
    for (const [prefix, route] of Object.entries(routes)) {
      if (url.pathname.startsWith(prefix)) {
        const result = route(url, init);
        const status = result.status ?? 200;
        return {
          ok: status >= 200 && status < 300,
          status,
          json: async () => result.body,
        } as Response;
      }
    }
    throw new Error(`no route for ${url.pathname}`);
  };
  return { fetch: impl, calls };
}

export function skeleton(doc: Document): void {
  doc.body.innerHTML = `
    <main>
      <section id="panels"></section>
      <section id="filter-box"></section>
      <section id="queue"></section>
      <section id="sidebar"></section>
    </main>`;
}

export function fixedClock(startIso: string, stepSeconds = 30): () => Date {
  let tick = 0;
  const start = new Date(startIso).getTime();
  return () => new Date(start + 1000 * stepSeconds * tick++);
}
