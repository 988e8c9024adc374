/** Minimal SVG line plot with toggleable overlay series and a CI band.
 *
 * Series values come straight from the API; this module only maps them to
 * pixel coordinates. All layers are supplied up front so they share one
 * y-scale; legend toggles flip visibility without refetching or rescaling.
 */

import type { ChildrenBand, SeriesView } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const W = 640;
const H = 140;
const PAD = 10;

export interface PlotSeries {
  id: string;
  series: SeriesView;
  color: string;
  hidden?: boolean;
}

export interface PlotBand {
  id: string;
  band: ChildrenBand;
  color: string;
  hidden?: boolean;
}

export class LinePlot {
  readonly element: SVGSVGElement;
  private readonly layers = new Map<string, SVGGElement>();
  private readonly dates: string[];
  private readonly lo: number;
  private readonly hi: number;

  constructor(doc: Document, baseDates: string[], series: PlotSeries[], bands: PlotBand[] = []) {
    this.dates = baseDates;
    let lo = Infinity;
    let hi = -Infinity;
    for (const s of series) {
      for (const v of s.series.values) {
        lo = Math.min(lo, v);
        hi = Math.max(hi, v);
      }
    }
    for (const b of bands) {
      for (const v of b.band.ci_low) lo = Math.min(lo, v);
      for (const v of b.band.ci_high) hi = Math.max(hi, v);
    }
    this.lo = lo === Infinity ? 0 : lo;
    this.hi = hi === -Infinity ? 1 : hi;
    this.element = doc.createElementNS(SVG_NS, "svg") as SVGSVGElement;
    this.element.setAttribute("viewBox", `0 0 ${W} ${H}`);
    this.element.setAttribute("class", "line-plot");
    for (const b of bands) {
      this.layers.set(b.id, this.drawBand(doc, b));
    }
    for (const s of series) {
      this.layers.set(s.id, this.drawSeries(doc, s));
    }
  }

  private x(dateText: string): number {
    const i = this.dates.indexOf(dateText);
    const n = Math.max(1, this.dates.length - 1);
    return PAD + ((W - 2 * PAD) * Math.max(0, i)) / n;
  }

  private y(value: number): number {
    if (this.hi === this.lo) return H / 2;
    return H - PAD - ((H - 2 * PAD) * (value - this.lo)) / (this.hi - this.lo);
  }

  private drawSeries(doc: Document, s: PlotSeries): SVGGElement {
    const group = doc.createElementNS(SVG_NS, "g") as SVGGElement;
    group.setAttribute("data-series", s.id);
    if (s.hidden) group.setAttribute("visibility", "hidden");
    const path = doc.createElementNS(SVG_NS, "path");
    const d = s.series.values
      .map(
        (v, i) =>
          `${i === 0 ? "M" : "L"}${this.x(s.series.dates[i]).toFixed(1)} ${this.y(v).toFixed(1)}`,
      )
      .join("");
    path.setAttribute("d", d);
    path.setAttribute("fill", "none");
    path.setAttribute("stroke", s.color);
    group.appendChild(path);
    this.element.appendChild(group);
    return group;
  }

  private drawBand(doc: Document, b: PlotBand): SVGGElement {
    const group = doc.createElementNS(SVG_NS, "g") as SVGGElement;
    group.setAttribute("data-series", b.id);
    if (b.hidden) group.setAttribute("visibility", "hidden");
    const polygon = doc.createElementNS(SVG_NS, "polygon");
    const upper = b.band.dates.map(
      (d, i) => `${this.x(d).toFixed(1)},${this.y(b.band.ci_high[i]).toFixed(1)}`,
    );
    const lower = b.band.dates
      .map((d, i) => `${this.x(d).toFixed(1)},${this.y(b.band.ci_low[i]).toFixed(1)}`)
      .reverse();
    polygon.setAttribute("points", [...upper, ...lower].join(" "));
    polygon.setAttribute("fill", b.color);
    polygon.setAttribute("opacity", "0.25");
    group.appendChild(polygon);
    this.element.appendChild(group);
    return group;
  }

  setVisible(id: string, visible: boolean): void {
    const layer = this.layers.get(id);
    if (layer) layer.setAttribute("visibility", visible ? "visible" : "hidden");
  }

  isVisible(id: string): boolean {
    const layer = this.layers.get(id);
    return !!layer && layer.getAttribute("visibility") !== "hidden";
  }

  has(id: string): boolean {
    return this.layers.has(id);
  }
}
