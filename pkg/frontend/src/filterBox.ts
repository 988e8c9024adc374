/** Filter input: applies the service's predicate grammar to the queue. */

export interface FilterBoxOptions {
  doc: Document;
  root: HTMLElement;
  onApply: (text: string) => void;
}

export class FilterBox {
  private readonly input: HTMLInputElement;
  private readonly errorEl: HTMLElement;
  private readonly opts: FilterBoxOptions;

  constructor(opts: FilterBoxOptions) {
    this.opts = opts;
    const doc = opts.doc;
    this.input = doc.createElement("input");
    this.input.className = "filter-input";
    this.input.placeholder = "dim:op:v1|v2,… e.g. geo_region:in:PA";
    const apply = doc.createElement("button");
    apply.className = "filter-apply";
    apply.textContent = "Filter";
    const clear = doc.createElement("button");
    clear.className = "filter-clear";
    clear.textContent = "Clear";
    this.errorEl = doc.createElement("span");
    this.errorEl.className = "filter-error";

    apply.addEventListener("click", () => this.opts.onApply(this.input.value));
    clear.addEventListener("click", () => {
      this.input.value = "";
      this.opts.onApply("");
    });
    this.input.addEventListener("keydown", (event) => {
      if ((event as KeyboardEvent).key === "Enter") this.opts.onApply(this.input.value);
    });
    opts.root.append(this.input, apply, clear, this.errorEl);
  }

  get value(): string {
    return this.input.value;
  }

  seed(text: string): void {
    this.input.value = text;
    this.opts.onApply(text);
  }

  /** Grammar errors from the service are shown verbatim. */
  showError(message: string): void {
    this.errorEl.textContent = message;
  }

  clearError(): void {
    this.errorEl.textContent = "";
  }
}
