/** Client-side session log buffer.
 *
 * Every KPI-relevant interaction appends exactly one entry; the buffer
 * flushes to POST /sessions/log at most every 30 s and on page unload,
 * so reviewer KPIs can be recomputed server-side with full fidelity.
 */

import type { ApiClient } from "./api.js";
import type { SessionAction, SessionEntryOut } from "./types.js";

export const FLUSH_INTERVAL_MS = 30_000;

export type Clock = () => Date;

export class SessionLogger {
  readonly sessionId: string;
  readonly reviewer: string;
  private readonly api: ApiClient;
  private readonly clock: Clock;
  private buffer: SessionEntryOut[] = [];
  private timer: ReturnType<typeof setInterval> | null = null;
  private ended = false;

  constructor(api: ApiClient, reviewer: string, clock?: Clock, sessionId?: string) {
    this.api = api;
    this.reviewer = reviewer;
    this.clock = clock ?? (() => new Date());
    this.sessionId =
      sessionId ?? `${reviewer}-${this.clock().getTime()}-${Math.floor(Math.random() * 1e6)}`;
  }

  get pending(): readonly SessionEntryOut[] {
    return this.buffer;
  }

  log(action: SessionAction, payload: Record<string, unknown> = {}): void {
    if (this.ended) return;
    this.buffer.push({ ts: this.clock().toISOString(), action, payload });
  }

  async flush(): Promise<number> {
    if (this.buffer.length === 0) return 0;
    const batch = this.buffer;
    this.buffer = [];
    try {
      const result = await this.api.postSessionLog(this.sessionId, this.reviewer, batch);
      return result.imported;
    } catch (error) {
      // Keep entries for the next flush attempt rather than dropping them.
      this.buffer = batch.concat(this.buffer);
      throw error;
    }
  }

  async end(): Promise<void> {
    if (this.ended) return;
    this.log("session_end");
    this.ended = true;
    this.stopAutoFlush();
    await this.flush();
  }

  startAutoFlush(win: Pick<Window, "addEventListener"> & typeof globalThis = window): void {
    if (this.timer !== null) return;
    this.timer = setInterval(() => {
      void this.flush().catch(() => undefined);
    }, FLUSH_INTERVAL_MS);
    win.addEventListener("pagehide", () => {
      void this.end().catch(() => undefined);
    });
  }

  stopAutoFlush(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }
}
