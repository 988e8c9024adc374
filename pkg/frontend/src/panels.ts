/** Situational-awareness panels: county map grid and indicator scores.
 *
 * Clicking a region or indicator seeds the filter box, steering the queue
 * toward that slice of the data.
 */

import { heatColor } from "./heatmap.js";
import type { PanelsBody } from "./types.js";

export interface PanelsOptions {
  doc: Document;
  root: HTMLElement;
  onSeedFilter: (filterText: string) => void;
}

export class PanelsView {
  private readonly opts: PanelsOptions;
  selectedRegion: string | null = null;
  selectedIndicator: string | null = null;

  constructor(opts: PanelsOptions) {
    this.opts = opts;
  }

  render(panels: PanelsBody): void {
    const { doc, root } = this.opts;
    root.textContent = "";
    root.dataset.runId = panels.run_id;

    const map = doc.createElement("div");
    map.className = "map-grid";
    for (const cell of panels.map) {
      const el = doc.createElement("button");
      el.className = "map-cell";
      el.dataset.county = cell.county;
      el.style.backgroundColor = heatColor(cell.c, 1);
      el.title = `${cell.county}: ${cell.c.toFixed(3)}`;
      el.addEventListener("click", () => {
        this.selectedRegion = cell.county;
        this.opts.onSeedFilter(`geo_region:in:${cell.county}`);
      });
      map.appendChild(el);
    }

    const indicators = doc.createElement("ol");
    indicators.className = "indicator-list";
    for (const indicator of panels.indicators) {
      const li = doc.createElement("li");
      const button = doc.createElement("button");
      button.dataset.signal = indicator.signal;
      button.textContent = `${indicator.signal} ${indicator.score.toFixed(3)}`;
      button.addEventListener("click", () => {
        this.selectedIndicator = indicator.signal;
        this.opts.onSeedFilter(`signal:in:${indicator.signal}`);
      });
      li.appendChild(button);
      indicators.appendChild(li);
    }

    root.appendChild(map);
    root.appendChild(indicators);
  }

  renderError(message: string): void {
    const { doc, root } = this.opts;
    root.textContent = "";
    const note = doc.createElement("div");
    note.className = "panel-error";
    note.textContent = message;
    root.appendChild(note);
  }
}
