/** The ranked review queue: rows, expansion with geographic context, toggles. */

import { ApiClient, ApiError } from "./api.js";
import { buildHeatStrip } from "./heatmap.js";
import { LinePlot, PlotBand, PlotSeries } from "./plot.js";
import type { SessionLogger } from "./session.js";
import { MetaEventSidebar, TriageForm } from "./triage.js";
import type { ContextBody, RankedRowView, TriageRecordView } from "./types.js";

const SERIES_COLORS = ["#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b"];

export interface QueueOptions {
  doc: Document;
  root: HTMLElement;
  api: ApiClient;
  logger: SessionLogger;
  reviewer: string;
  sidebar: MetaEventSidebar;
  clock?: () => Date;
}

export class QueueView {
  private readonly opts: QueueOptions;
  private asOf = "";
  private expandedKey: string | null = null;

  constructor(opts: QueueOptions) {
    this.opts = opts;
  }

  /** Render rows in rank order; an error state is always visible, never
   * a silently empty queue. */
  render(asOf: string, rows: RankedRowView[]): void {
    const { doc, root } = this.opts;
    this.asOf = asOf;
    this.expandedKey = null;
    root.textContent = "";
    for (const row of rows) {
      root.appendChild(this.buildRow(row));
    }
    if (rows.length === 0) {
      const empty = doc.createElement("div");
      empty.className = "queue-empty";
      empty.textContent = "no streams match";
      root.appendChild(empty);
    }
  }

  renderError(message: string, onRetry: () => void): void {
    const { doc, root } = this.opts;
    root.textContent = "";
    const box = doc.createElement("div");
    box.className = "queue-error";
    const text = doc.createElement("span");
    text.textContent = message;
    const retry = doc.createElement("button");
    retry.className = "retry";
    retry.textContent = "Retry";
    retry.addEventListener("click", onRetry);
    box.appendChild(text);
    box.appendChild(retry);
    root.appendChild(box);
  }

  private buildRow(row: RankedRowView): HTMLElement {
    const doc = this.opts.doc;
    const article = doc.createElement("article");
    article.className = "queue-row";
    article.dataset.key = row.key;
    article.dataset.rank = String(row.rank);

    const header = doc.createElement("header");
    header.className = "row-header";
    const rank = doc.createElement("span");
    rank.className = "rank";
    rank.textContent = String(row.rank);
    const title = doc.createElement("span");
    title.className = "row-title";
    title.textContent = `${row.signal} · ${row.display_name || row.geo_value}`;
    const path = doc.createElement("span");
    path.className = "geo-path";
    path.textContent = row.geo_path;
    const score = doc.createElement("span");
    score.className = "peak-score";
    score.textContent = row.peak.score.toFixed(2);
    score.title = `peak on ${row.peak.time_value}`;
    const varianceTag = doc.createElement("span");
    varianceTag.className = "variance-tag";
    varianceTag.textContent = row.avg_variance.toFixed(2);
    header.append(rank, title, path, score, varianceTag);
    if (row.peak.violated_bound) {
      const flag = doc.createElement("span");
      flag.className = "bound-flag";
      flag.textContent = "bound";
      header.appendChild(flag);
    }
    header.addEventListener("click", () => {
      void this.toggleRow(article, row);
    });
    article.appendChild(header);

    const strip =
      row.evolution && row.evolution.dates.length > 0
        ? buildHeatStrip(doc, row.evolution.dates, row.evolution.means)
        : buildHeatStrip(
            doc,
            row.window_scores.map((w) => w.date),
            row.window_scores.map(() => 0),
          );
    article.appendChild(strip);

    const badges = doc.createElement("div");
    badges.className = "triage-badges";
    for (const record of row.triage) {
      badges.appendChild(this.buildBadge(record));
    }
    article.appendChild(badges);
    return article;
  }

  private buildBadge(record: TriageRecordView): HTMLElement {
    const badge = this.opts.doc.createElement("button");
    badge.className = "triage-badge";
    badge.dataset.recordId = String(record.id);
    badge.textContent = `${record.event_type}/${record.severity}`;
    badge.title = "click to select for a meta-event";
    badge.addEventListener("click", (event) => {
      event.stopPropagation();
      this.opts.sidebar.toggleSelection(record);
    });
    return badge;
  }

  async toggleRow(article: HTMLElement, row: RankedRowView): Promise<void> {
    const existing = article.querySelector(".row-context");
    if (existing) {
      existing.remove();
      this.expandedKey = null;
      this.opts.logger.log("row_collapsed", { key: row.key });
      return;
    }
    this.opts.logger.log("row_expanded", { key: row.key, rank: row.rank });
    this.expandedKey = row.key;
    try {
      const context = await this.opts.api.context(row.key, this.asOf);
      article.appendChild(this.buildContext(row, context));
    } catch (error) {
      const fail = this.opts.doc.createElement("div");
      fail.className = "row-context row-context-error";
      fail.textContent =
        error instanceof ApiError ? error.detail : "context unavailable";
      article.appendChild(fail);
    }
  }

  private buildContext(row: RankedRowView, context: ContextBody): HTMLElement {
    const doc = this.opts.doc;
    const wrap = doc.createElement("section");
    wrap.className = "row-context";

    const series: PlotSeries[] = [
      { id: "self", series: context.self, color: SERIES_COLORS[0] },
    ];
    if (context.parent) {
      series.push({
        id: "parent",
        series: context.parent,
        color: SERIES_COLORS[1],
        hidden: true,
      });
    }
    context.siblings.forEach((sibling, i) => {
      series.push({
        id: `sibling-${i}`,
        series: sibling,
        color: SERIES_COLORS[(i + 2) % SERIES_COLORS.length],
        hidden: true,
      });
    });
    const bands: PlotBand[] = [];
    if (context.children) {
      bands.push({ id: "children-ci", band: context.children, color: "#1f77b4", hidden: true });
    }
    const plot = new LinePlot(doc, context.self.dates, series, bands);
    wrap.appendChild(plot.element);

    const legend = doc.createElement("div");
    legend.className = "legend";
    const addToggle = (id: string, label: string, members: string[]) => {
      const button = doc.createElement("button");
      button.className = "legend-toggle";
      button.dataset.toggle = id;
      button.textContent = label;
      button.addEventListener("click", () => {
        const visible = !plot.isVisible(members[0]);
        for (const member of members) plot.setVisible(member, visible);
        button.classList.toggle("on", visible);
      });
      legend.appendChild(button);
    };
    if (context.parent) addToggle("parent", "parent", ["parent"]);
    const siblingIds = context.siblings.map((_, i) => `sibling-${i}`);
    if (siblingIds.length > 0) addToggle("siblings", "siblings", siblingIds);
    if (context.children) addToggle("children-ci", "children CI", ["children-ci"]);
    wrap.appendChild(legend);

    const thumb = doc.createElement("div");
    thumb.className = "map-thumb";
    thumb.textContent = row.geo_path;
    wrap.appendChild(thumb);

    const form = new TriageForm({
      doc,
      api: this.opts.api,
      logger: this.opts.logger,
      reviewer: this.opts.reviewer,
      asOf: this.asOf,
      streamKey: row.key,
      timeValue: row.peak.time_value,
      clock: this.opts.clock,
      onRecorded: (record) => {
        const badges = wrap.parentElement?.querySelector(".triage-badges");
        badges?.appendChild(this.buildBadge(record));
      },
    });
    wrap.appendChild(form.element);
    return wrap;
  }

  get expanded(): string | null {
    return this.expandedKey;
  }
}
