/** Single-page wiring: panels above the filterable ranked queue.
 *
 * The UI computes no scores; every number on screen comes from an API
 * field. Interactions feed the session log so reviewer KPIs can be
 * derived server-side.
 */

import { ApiClient, ApiError, FetchLike } from "./api.js";
import { FilterBox } from "./filterBox.js";
import { PanelsView } from "./panels.js";
import { QueueView } from "./queue.js";
import { SessionLogger } from "./session.js";
import { MetaEventSidebar } from "./triage.js";

export interface AppConfig {
  doc: Document;
  baseUrl: string;
  reviewer: string;
  asOf: string;
  k?: number;
  fetchFn?: FetchLike;
  clock?: () => Date;
  sessionId?: string;
}

export class App {
  readonly api: ApiClient;
  readonly logger: SessionLogger;
  readonly queue: QueueView;
  readonly panels: PanelsView;
  readonly filterBox: FilterBox;
  readonly sidebar: MetaEventSidebar;
  asOf: string;
  k: number;
  filterText = "";

  constructor(cfg: AppConfig) {
    const doc = cfg.doc;
    this.asOf = cfg.asOf;
    this.k = cfg.k ?? 50;
    this.api = new ApiClient(cfg.baseUrl, cfg.fetchFn);
    this.logger = new SessionLogger(this.api, cfg.reviewer, cfg.clock, cfg.sessionId);
    this.sidebar = new MetaEventSidebar({
      doc,
      api: this.api,
      reviewer: cfg.reviewer,
      clock: cfg.clock,
    });
    const sidebarRoot = must(doc, "#sidebar");
    sidebarRoot.appendChild(this.sidebar.element);
    this.panels = new PanelsView({
      doc,
      root: must(doc, "#panels"),
      onSeedFilter: (text) => this.filterBox.seed(text),
    });
    this.filterBox = new FilterBox({
      doc,
      root: must(doc, "#filter-box"),
      onApply: (text) => void this.applyFilter(text),
    });
    this.queue = new QueueView({
      doc,
      root: must(doc, "#queue"),
      api: this.api,
      logger: this.logger,
      reviewer: cfg.reviewer,
      sidebar: this.sidebar,
      clock: cfg.clock,
    });
  }

  async start(): Promise<void> {
    await Promise.all([this.loadQueue(), this.loadPanels()]);
  }

  async loadQueue(): Promise<void> {
    try {
      const body = await this.api.rankings(this.asOf, this.k, this.filterText || undefined);
      this.queue.render(body.as_of, body.rows);
    } catch (error) {
      if (error instanceof ApiError && error.status === 404) {
        this.queue.renderError(`no run for date ${this.asOf}`, () => void this.loadQueue());
      } else {
        this.queue.renderError("queue unavailable", () => void this.loadQueue());
      }
    }
  }

  async loadPanels(): Promise<void> {
    try {
      const body = await this.api.panels(this.asOf);
      this.panels.render(body);
      this.logger.log("panel_viewed", { run_id: body.run_id });
    } catch (error) {
      this.panels.renderError(
        error instanceof ApiError && error.status === 404
          ? `no run for date ${this.asOf}`
          : "panels unavailable",
      );
    }
  }

  /** Filter submissions re-query the queue; panels stay as they are. */
  async applyFilter(text: string): Promise<void> {
    this.filterBox.clearError();
    try {
      const body = await this.api.rankings(this.asOf, this.k, text || undefined);
      this.filterText = text;
      const predicates = text.trim() === "" ? 0 : text.split(",").length;
      this.logger.log("filter_applied", { filter: text, predicates });
      this.queue.render(body.as_of, body.rows);
    } catch (error) {
      if (error instanceof ApiError && error.status === 400) {
        this.filterBox.showError(error.detail);
      } else {
        this.queue.renderError("queue unavailable", () => void this.applyFilter(text));
      }
    }
  }

  async endSession(): Promise<void> {
    await this.logger.end();
  }
}

function must(doc: Document, selector: string): HTMLElement {
  const el = doc.querySelector(selector);
  if (!el) throw new Error(`missing element ${selector}`);
  return el as HTMLElement;
}

export function bootstrapSkeleton(doc: Document): void {
  const root = doc.body;
  root.innerHTML = `
    <main class="vigil">
      <section id="panels"></section>
      <section id="filter-box"></section>
      <section id="queue"></section>
      <section id="sidebar"></section>
    </main>`;
}
