/** Triage record form (per expanded row) and the meta-event sidebar. */

import { ApiClient, ApiError } from "./api.js";
import type { SessionLogger } from "./session.js";
import type { EventDraft, MetaEventView, TriageRecordView } from "./types.js";

export const EVENT_TYPES = ["data_quality", "public_health", "non_event", "other"] as const;
export const SEVERITIES = ["low", "medium", "high"] as const;

function option(doc: Document, value: string, label?: string): HTMLOptionElement {
  const el = doc.createElement("option");
  el.value = value;
  el.textContent = label ?? value;
  return el;
}

export interface TriageFormOptions {
  doc: Document;
  api: ApiClient;
  logger: SessionLogger;
  reviewer: string;
  asOf: string;
  streamKey: string;
  timeValue: string;
  clock?: () => Date;
  onRecorded: (record: TriageRecordView) => void;
}

export class TriageForm {
  readonly element: HTMLFormElement;
  private readonly opts: TriageFormOptions;
  private readonly errorEl: HTMLElement;
  private submitting = false;

  constructor(opts: TriageFormOptions) {
    this.opts = opts;
    const doc = opts.doc;
    this.element = doc.createElement("form");
    this.element.className = "triage-form";

    const typeSelect = doc.createElement("select");
    typeSelect.name = "event_type";
    typeSelect.appendChild(option(doc, "", "event type…"));
    for (const t of EVENT_TYPES) typeSelect.appendChild(option(doc, t));

    const otherLabel = doc.createElement("input");
    otherLabel.name = "other_label";
    otherLabel.placeholder = "label for 'other'";

    const severitySelect = doc.createElement("select");
    severitySelect.name = "severity";
    severitySelect.appendChild(option(doc, "", "severity…"));
    for (const s of SEVERITIES) severitySelect.appendChild(option(doc, s));

    const sourceSelect = doc.createElement("select");
    sourceSelect.name = "is_source";
    sourceSelect.appendChild(option(doc, "", "source of event?"));
    sourceSelect.appendChild(option(doc, "yes"));
    sourceSelect.appendChild(option(doc, "no"));

    const note = doc.createElement("textarea");
    note.name = "note";
    note.placeholder = "notes";

    const submit = doc.createElement("button");
    submit.type = "submit";
    submit.textContent = "Record event";

    this.errorEl = doc.createElement("div");
    this.errorEl.className = "form-error";

    for (const el of [typeSelect, otherLabel, severitySelect, sourceSelect, note, submit, this.errorEl]) {
      this.element.appendChild(el);
    }
    this.element.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.submit();
    });
  }

  private field<T extends HTMLElement>(name: string): T {
    return this.element.querySelector(`[name="${name}"]`) as T;
  }

  private showError(message: string): void {
    this.errorEl.textContent = message;
  }

  async submit(): Promise<TriageRecordView | null> {
    if (this.submitting) return null; // one in-flight submission per row
    const eventType = this.field<HTMLSelectElement>("event_type").value;
    const severity = this.field<HTMLSelectElement>("severity").value;
    const isSource = this.field<HTMLSelectElement>("is_source").value;
    const otherLabel = this.field<HTMLInputElement>("other_label").value;
    if (!eventType) {
      this.showError("choose an event type");
      return null;
    }
    if (!severity) {
      this.showError("choose a severity");
      return null;
    }
    if (!isSource) {
      this.showError("choose whether this point is the source");
      return null;
    }
    if (eventType === "other" && !otherLabel) {
      this.showError("label the 'other' event type");
      return null;
    }
    this.showError("");
    const draft: EventDraft = {
      reviewer: this.opts.reviewer,
      key: this.opts.streamKey,
      time_value: this.opts.timeValue,
      as_of: this.opts.asOf,
      event_type: eventType,
      severity,
      is_source: isSource === "yes",
      note: this.field<HTMLTextAreaElement>("note").value,
      other_label: otherLabel,
    };
    if (this.opts.clock) draft.created_at = this.opts.clock().toISOString();
    this.submitting = true;
    try {
      const record = await this.opts.api.postEvent(draft);
      this.opts.logger.log("event_recorded", { record_id: record.id });
      this.opts.onRecorded(record);
      return record;
    } catch (error) {
      this.showError(error instanceof ApiError ? error.detail : String(error));
      return null;
    } finally {
      this.submitting = false;
    }
  }
}

export interface MetaSidebarOptions {
  doc: Document;
  api: ApiClient;
  reviewer: string;
  clock?: () => Date;
}

export class MetaEventSidebar {
  readonly element: HTMLElement;
  private readonly opts: MetaSidebarOptions;
  private readonly selected = new Map<number, TriageRecordView>();
  private readonly selectedList: HTMLElement;
  private readonly metaList: HTMLElement;
  private readonly errorEl: HTMLElement;

  constructor(opts: MetaSidebarOptions) {
    this.opts = opts;
    const doc = opts.doc;
    this.element = doc.createElement("aside");
    this.element.className = "meta-sidebar";
    const heading = doc.createElement("h3");
    heading.textContent = "Meta-events";
    const title = doc.createElement("input");
    title.name = "meta_title";
    title.placeholder = "title";
    const hypothesis = doc.createElement("textarea");
    hypothesis.name = "meta_hypothesis";
    hypothesis.placeholder = "hypothesis across events";
    this.selectedList = doc.createElement("ul");
    this.selectedList.className = "meta-selected";
    const submit = doc.createElement("button");
    submit.textContent = "Record meta-event";
    submit.addEventListener("click", () => void this.submit());
    this.errorEl = doc.createElement("div");
    this.errorEl.className = "form-error";
    this.metaList = doc.createElement("ul");
    this.metaList.className = "meta-list";
    for (const el of [heading, title, hypothesis, this.selectedList, submit, this.errorEl, this.metaList]) {
      this.element.appendChild(el);
    }
  }

  toggleSelection(record: TriageRecordView): void {
    if (this.selected.has(record.id)) {
      this.selected.delete(record.id);
    } else {
      this.selected.set(record.id, record);
    }
    this.renderSelection();
  }

  private renderSelection(): void {
    this.selectedList.textContent = "";
    for (const record of this.selected.values()) {
      const li = this.opts.doc.createElement("li");
      li.textContent = `#${record.id} ${record.key} ${record.time_value}`;
      this.selectedList.appendChild(li);
    }
  }

  async submit(): Promise<MetaEventView | null> {
    const title = (this.element.querySelector('[name="meta_title"]') as HTMLInputElement).value;
    const hypothesis = (
      this.element.querySelector('[name="meta_hypothesis"]') as HTMLTextAreaElement
    ).value;
    if (!title) {
      this.errorEl.textContent = "meta-event needs a title";
      return null;
    }
    if (this.selected.size === 0) {
      this.errorEl.textContent = "select at least one recorded event";
      return null;
    }
    this.errorEl.textContent = "";
    try {
      const meta = await this.opts.api.postMetaEvent({
        reviewer: this.opts.reviewer,
        title,
        hypothesis,
        member_event_ids: [...this.selected.keys()],
        ...(this.opts.clock ? { created_at: this.opts.clock().toISOString() } : {}),
      });
      const li = this.opts.doc.createElement("li");
      li.className = "meta-item";
      li.textContent = `${meta.title} (${meta.member_event_ids.length} events)`;
      this.metaList.appendChild(li);
      this.selected.clear();
      this.renderSelection();
      return meta;
    } catch (error) {
      this.errorEl.textContent = error instanceof ApiError ? error.detail : String(error);
      return null;
    }
  }
}
