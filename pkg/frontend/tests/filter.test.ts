import { beforeEach, describe, expect, it } from "vitest";

import { App } from "../src/app.js";
import {
  AS_OF,
  fakeFetch,
  makePanels,
  makeRankings,
  makeRow,
  skeleton,
} from "./helpers.js";

beforeEach(() => skeleton(document));

function setup() {
  const fake = fakeFetch({
    "/rankings": (url) => {
      const filter = url.searchParams.get("filter");
      if (filter && filter.split(",").length > 4) {
        return {
          status: 400,
          body: { detail: "at most 4 predicates (at position 48)", position: 48 },
        };
      }
      if (filter === "geo_region:in:PR") {
        const body = makeRankings(0);
        body.rows = [
          makeRow({ rank: 1, geo_value: "72001", key: "prov1:cases:county:72001" }),
        ];
        return { body };
      }
      return { body: makeRankings(6) };
    },
    "/panels": () => ({ body: makePanels() }),
  });
  const app = new App({
    doc: document,
    baseUrl: "http://fake",
    reviewer: "r1",
    asOf: AS_OF,
    fetchFn: fake.fetch,
  });
  return { app, fake };
}

describe("filter_box", () => {
  it("narrows the queue and leaves the panels untouched", async () => {
    const { app } = setup();
    await app.start();
    const panelsBefore = (document.querySelector("#panels") as HTMLElement).innerHTML;
    app.filterBox.seed("geo_region:in:PR");
    await new Promise((r) => setTimeout(r, 0));
    const rows = [...document.querySelectorAll(".queue-row")] as HTMLElement[];
    expect(rows.map((r) => r.dataset.key)).toEqual(["prov1:cases:county:72001"]);
    expect((document.querySelector("#panels") as HTMLElement).innerHTML).toBe(
      panelsBefore,
    );
  });

  it("restores the full queue when cleared", async () => {
    const { app } = setup();
    await app.start();
    app.filterBox.seed("geo_region:in:PR");
    await new Promise((r) => setTimeout(r, 0));
    expect(document.querySelectorAll(".queue-row")).toHaveLength(1);
    (document.querySelector(".filter-clear") as HTMLElement).click();
    await new Promise((r) => setTimeout(r, 0));
    expect(document.querySelectorAll(".queue-row")).toHaveLength(6);
  });

  it("echoes grammar errors from the service verbatim", async () => {
    const { app } = setup();
    await app.start();
    app.filterBox.seed("a:in:1,b:in:2,c:in:3,d:in:4,e:in:5");
    await new Promise((r) => setTimeout(r, 0));
    expect(document.querySelector(".filter-error")?.textContent).toBe(
      "at most 4 predicates (at position 48)",
    );
    // The previous queue stays on screen; the filter did not apply.
    expect(document.querySelectorAll(".queue-row")).toHaveLength(6);
  });

  it("logs one filter_applied entry with the predicate count", async () => {
    const { app } = setup();
    await app.start();
    app.filterBox.seed("geo_region:in:PR");
    await new Promise((r) => setTimeout(r, 0));
    const entries = app.logger.pending.filter((e) => e.action === "filter_applied");
    expect(entries).toHaveLength(1);
    expect(entries[0].payload).toEqual({ filter: "geo_region:in:PR", predicates: 1 });
  });

  it("click-through from the map seeds a geo_region predicate", async () => {
    const { app } = setup();
    await app.start();
    (document.querySelector('[data-county="42003"]') as HTMLElement).click();
    await new Promise((r) => setTimeout(r, 0));
    expect(app.filterBox.value).toBe("geo_region:in:42003");
    expect(app.filterText).toBe("geo_region:in:42003");
  });

  it("click-through from an indicator seeds a signal predicate", async () => {
    const { app } = setup();
    await app.start();
    (document.querySelector('[data-signal="cases"]') as HTMLElement).click();
    await new Promise((r) => setTimeout(r, 0));
    expect(app.filterBox.value).toBe("signal:in:cases");
  });
});
