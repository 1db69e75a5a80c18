/** Local draft buffer: labels that failed to POST survive reloads and are
 * flushed in order on reconnect. No label is dropped until the server has
 * accepted it. */

import { ApiClient, ApiError } from "./api.js";
import type { LabelSubmission } from "./types.js";

const STORAGE_KEY = "rarefind.drafts";

export class DraftBuffer {
  constructor(private storage: Storage = window.localStorage) {}

  list(): LabelSubmission[] {
    const raw = this.storage.getItem(STORAGE_KEY);
    if (!raw) return [];
    try {
      return JSON.parse(raw) as LabelSubmission[];
    } catch {
      return [];
    }
  }

  private save(drafts: LabelSubmission[]): void {
    if (drafts.length === 0) {
      this.storage.removeItem(STORAGE_KEY);
    } else {
      this.storage.setItem(STORAGE_KEY, JSON.stringify(drafts));
    }
  }

  enqueue(label: LabelSubmission): void {
    const drafts = this.list();
    // one draft per (complaint, reviewer): a newer verdict replaces the old
    const kept = drafts.filter(
      (d) =>
        d.complaint_id !== label.complaint_id ||
        d.reviewer_id !== label.reviewer_id,
    );
    kept.push(label);
    this.save(kept);
  }

  get size(): number {
    return this.list().length;
  }

  /** Try the server first; buffer on network failure. Returns true when
   * the label is durable server-side. */
  async submit(api: ApiClient, label: LabelSubmission): Promise<boolean> {
    try {
      await api.submitLabel(label);
      return true;
    } catch (err) {
      if (err instanceof ApiError && err.status === 0) {
        this.enqueue(label);
        return false;
      }
      throw err; // 4xx/409: a real rejection, not an offline condition
    }
  }

  /** Replay buffered drafts in order. Drafts behind a network failure stay
   * buffered (nothing is lost); drafts the server outright rejects (e.g.
   * the round sealed meanwhile) are counted separately for surfacing. */
  async flush(api: ApiClient): Promise<{ delivered: number; rejected: number }> {
    const drafts = this.list();
    const remaining: LabelSubmission[] = [];
    let delivered = 0;
    let rejected = 0;
    let offline = false;
    for (const draft of drafts) {
      if (offline) {
        remaining.push(draft);
        continue;
      }
      try {
        await api.submitLabel(draft);
        delivered += 1;
      } catch (err) {
        if (err instanceof ApiError && err.status === 0) {
          offline = true;
          remaining.push(draft);
        } else {
          rejected += 1;
        }
      }
    }
    this.save(remaining);
    return { delivered, rejected };
  }
}
