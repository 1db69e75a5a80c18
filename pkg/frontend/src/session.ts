/** Review-queue session: the cursor always points at an unlabeled assigned
 * item or end-of-queue. Submitting advances the cursor; the submission path
 * goes through the draft buffer so offline work is never lost. */

import { ApiClient } from "./api.js";
import { DraftBuffer } from "./drafts.js";
import type { LabelSubmission, ReviewItem, Verdict } from "./types.js";

export const SHORTCUTS: Record<string, Verdict> = {
  "1": "relevant",
  "2": "not_relevant",
  "3": "unsure",
};

export class UiSession {
  queue: ReviewItem[] = [];
  cursor = 0;

  constructor(
    public reviewerId: string,
    public iteration: number,
    private api: ApiClient,
    private drafts: DraftBuffer,
  ) {}

  async load(): Promise<void> {
    this.queue = await this.api.queue(this.iteration, this.reviewerId);
    // items already covered by a pending draft are not re-asked
    const drafted = new Set(
      this.drafts
        .list()
        .filter((d) => d.reviewer_id === this.reviewerId)
        .map((d) => d.complaint_id),
    );
    this.queue = this.queue.filter((i) => !drafted.has(i.complaint_id));
    this.cursor = 0;
  }

  get current(): ReviewItem | null {
    return this.cursor < this.queue.length ? this.queue[this.cursor] : null;
  }

  get remaining(): number {
    return this.queue.length - this.cursor;
  }

  get done(): boolean {
    return this.cursor >= this.queue.length;
  }

  /** Label the current item and advance. Returns false when the label was
   * buffered offline instead of delivered. */
  async submit(verdict: Verdict, note?: string,
               frameworkTags?: string[]): Promise<boolean> {
    const item = this.current;
    if (!item) throw new Error("queue exhausted");
    const label: LabelSubmission = {
      complaint_id: item.complaint_id,
      reviewer_id: this.reviewerId,
      verdict,
    };
    if (note) label.note = note;
    if (frameworkTags && frameworkTags.length > 0) {
      label.framework_tags = frameworkTags;
    }
    const delivered = await this.drafts.submit(this.api, label);
    this.cursor += 1;
    return delivered;
  }

  skip(): void {
    // move the current item to the back of the queue
    if (this.current === null) return;
    const [item] = this.queue.splice(this.cursor, 1);
    this.queue.push(item);
  }
}
